use nalgebra::ComplexField;
use num_complex::Complex;
use rayon::prelude::*;

use super::{DomainSpec, PhaseBox, Symbol};
use crate::error::{invalid, Error, Result};
use crate::real::Real;

/// Tensor midpoint grid with `n` cells per axis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadGrid {
    pub n: usize,
}

/// Grid used to verify a deformation: `n` points per axis on `[−L, L]²`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScanSpec<T: Real> {
    pub half_width: T,
    pub n: usize,
}

impl<T: Real> Default for ScanSpec<T> {
    fn default() -> Self {
        ScanSpec { half_width: T::lit(6.0), n: 601 }
    }
}

const SINGULAR_TOL: f64 = 1e-6;
const REFINE: usize = 4;

/// `I(z) = ∫ ln|p_z(ρ)| dρ` with `p_z = (p − z)/(p̃ − z)`, by midpoint
/// quadrature on the box. Cells whose midpoint has `|p_z| < 10⁻⁶` are split
/// once into `4×4` subcells.
pub fn integral_i<T: Real>(
    p_tilde: &Symbol<T>,
    p: &Symbol<T>,
    z: Complex<T>,
    bx: &PhaseBox<T>,
    grid: QuadGrid,
) -> Result<T> {
    if p.dim() != 1 || p_tilde.dim() != 1 || bx.dim != 1 {
        return Err(Error::Unsupported("integral_I is implemented for n = 1".into()));
    }
    if grid.n < 2 || !(bx.half_width > T::zero()) {
        return invalid("quadrature grid needs n >= 2 and a nonempty box");
    }
    let cell = T::lit(2.0) * bx.half_width / T::from_usize_lossy(grid.n);
    let lo = -bx.half_width;
    let tol = T::lit(SINGULAR_TOL);
    let sub = cell / T::from_usize_lossy(REFINE);
    let half = T::lit(0.5);
    let log_pz = |x: T, xi: T| -> Result<T> {
        let den = p_tilde.eval(&[x], &[xi]) - z;
        if den.modulus() == T::zero() || !den.modulus().is_finite() {
            return Err(Error::Postcondition(format!("p_tilde(ρ) = z at ({x}, {xi})")));
        }
        let num = p.eval(&[x], &[xi]) - z;
        Ok((num.modulus() / den.modulus()).ln())
    };
    let rows: Vec<T> = (0..grid.n)
        .into_par_iter()
        .map(|i| {
            let x = lo + cell * (T::from_usize_lossy(i) + half);
            let mut acc = T::zero();
            for j in 0..grid.n {
                let xi = lo + cell * (T::from_usize_lossy(j) + half);
                let v = log_pz(x, xi)?;
                if v.exp() >= tol {
                    acc += v;
                    continue;
                }
                let x0 = x - cell * half;
                let xi0 = xi - cell * half;
                let mut inner = T::zero();
                for a in 0..REFINE {
                    for b in 0..REFINE {
                        let xs = x0 + sub * (T::from_usize_lossy(a) + half);
                        let xis = xi0 + sub * (T::from_usize_lossy(b) + half);
                        let w = log_pz(xs, xis)?;
                        if w.exp() < tol {
                            return Err(Error::Quadrature(format!(
                                "log singularity of p_z unresolved after one refinement near ({xs}, {xis})"
                            )));
                        }
                        inner += w;
                    }
                }
                acc += inner / T::from_usize_lossy(REFINE * REFINE);
            }
            Ok(acc)
        })
        .collect::<Result<_>>()?;
    let total = rows.into_iter().fold(T::zero(), |a, r| a + r);
    Ok(total * cell * cell)
}

/// Minimum over the scan grid of the distance from `p(ρ)` to the closure of
/// `Ω`.
pub fn scan_distance<T: Real>(p: &Symbol<T>, omega: &DomainSpec<T>, scan: ScanSpec<T>) -> T {
    let n = scan.n.max(2);
    let step = T::lit(2.0) * scan.half_width / T::from_usize_lossy(n - 1);
    (0..n)
        .into_par_iter()
        .map(|i| {
            let x = -scan.half_width + step * T::from_usize_lossy(i);
            (0..n).fold(T::inf(), |m, j| {
                let xi = -scan.half_width + step * T::from_usize_lossy(j);
                m.min(omega.distance_to_closure(p.eval(&[x], &[xi])))
            })
        })
        .collect::<Vec<_>>()
        .into_iter()
        .fold(T::inf(), |a, b| a.min(b))
}

/// `p̃ = p + shift·β(|ρ|/bump_radius)`, verified by a grid scan to keep
/// `p̃` away from the closure of `Ω`.
pub fn deform_symbol<T: Real>(
    p: &Symbol<T>,
    omega: &DomainSpec<T>,
    shift: Complex<T>,
    bump_radius: T,
    scan: ScanSpec<T>,
) -> Result<Symbol<T>> {
    if !(bump_radius > T::zero()) {
        return invalid("bump radius must be positive");
    }
    if shift == Complex::default() {
        return Ok(p.clone());
    }
    let q = Symbol::with_deformation(p, shift, bump_radius);
    if p.dim() == 1 {
        let d = scan_distance(&q, omega, scan);
        if !(d > T::zero()) {
            return Err(Error::Postcondition(format!(
                "deformed symbol meets the closure of the domain (scan distance {d}); enlarge shift or radius"
            )));
        }
    }
    Ok(q)
}
