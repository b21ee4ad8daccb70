//! Structured Gaussian perturbations `Q = diag(ŝ)·G·diag(s̃)` and their norm
//! statistics.

use nalgebra::ComplexField;
use num_complex::Complex;
use rayon::prelude::*;

use crate::error::{invalid, Error, Result};
use crate::quadrature::{horizontal_line_integral, Decay, QuadTol};
use crate::quantize::{singular_triples_of, BasisSpec, OperatorMatrix};
use crate::real::Real;
use crate::rng::{derive_stream, gaussian_matrix};
use crate::special::{ks_two_sample, KsResult};
use crate::CMatrix;

/// Singular profiles, coupling and seed of a perturbation.
#[derive(Debug, Clone, PartialEq)]
pub struct PerturbationSpec<T: Real> {
    pub k: usize,
    pub s_hat: Vec<T>,
    pub s_tilde: Vec<T>,
    pub delta: T,
    pub master_seed: u64,
}

impl<T: Real> PerturbationSpec<T> {
    pub fn new(s_hat: Vec<T>, s_tilde: Vec<T>, delta: T, master_seed: u64) -> Result<Self> {
        let spec = PerturbationSpec { k: s_hat.len(), s_hat, s_tilde, delta, master_seed };
        spec.validate()?;
        Ok(spec)
    }

    /// `ŝⱼ = s̃ⱼ = (1 + h·j)^{−s}`, `j = 1..K`.
    pub fn with_default_profile(k: usize, h: T, s: T, delta: T, master_seed: u64) -> Result<Self> {
        let prof = default_profile(k, h, s);
        Self::new(prof.clone(), prof, delta, master_seed)
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0 || self.s_hat.len() != self.k || self.s_tilde.len() != self.k {
            return invalid("profiles must both have length K >= 1");
        }
        for prof in [&self.s_hat, &self.s_tilde] {
            if prof.iter().any(|&s| !(s > T::zero()) || !s.is_finite()) {
                return invalid("singular profiles must be positive and finite");
            }
            if prof.windows(2).any(|w| w[1] > w[0]) {
                return invalid("singular profiles must be nonincreasing");
            }
        }
        if !(self.delta >= T::zero()) {
            return invalid("coupling delta must be nonnegative");
        }
        Ok(())
    }

    /// The same perturbation law at a different truncation; shared rows and
    /// columns keep their entries.
    pub fn resized(&self, k: usize, h: T, s: T) -> Self {
        let prof = default_profile(k, h, s);
        PerturbationSpec { k, s_hat: prof.clone(), s_tilde: prof, delta: self.delta, master_seed: self.master_seed }
    }

    /// `(Σŝⱼ²)(Σs̃ₖ²)`, the expected squared HS norm of `Q`.
    pub fn expected_hs_sq(&self) -> T {
        let a = self.s_hat.iter().fold(T::zero(), |acc, &s| acc + s * s);
        let b = self.s_tilde.iter().fold(T::zero(), |acc, &s| acc + s * s);
        a * b
    }

    /// Entry variances `ŝⱼ² s̃ₖ²`, sorted descending.
    pub fn variances(&self) -> Vec<T> {
        let mut v: Vec<T> = self
            .s_hat
            .iter()
            .flat_map(|&a| self.s_tilde.iter().map(move |&b| a * a * b * b))
            .collect();
        v.sort_by(|a, b| b.partial_cmp(a).expect("finite"));
        v
    }
}

pub fn default_profile<T: Real>(k: usize, h: T, s: T) -> Vec<T> {
    (1..=k).map(|j| (T::one() + h * T::from_usize_lossy(j)).powf(-s)).collect()
}

/// `K × K` matrix of i.i.d. standard complex Gaussians.
pub fn sample_gaussian_matrix<T: Real>(k: usize, seed: u64) -> CMatrix<T> {
    gaussian_matrix(seed, 0, k, k)
}

/// `Q = diag(ŝ)·G·diag(s̃)` with `G` addressed by `(master_seed, trial)`.
pub fn build_perturbation<T: Real>(spec: &PerturbationSpec<T>, trial: u64) -> CMatrix<T> {
    let g = gaussian_matrix::<T>(spec.master_seed, trial, spec.k, spec.k);
    scale_rows_cols(&g, &spec.s_hat, &spec.s_tilde)
}

/// Seed of an independent per-trial stream under `master_seed`.
pub fn trial_seed(master_seed: u64, trial: u64) -> u64 {
    derive_stream(&[master_seed, trial])
}

/// [`build_perturbation`] wrapped in a basis.
pub fn perturbation_operator<T: Real>(spec: &PerturbationSpec<T>, trial: u64, h: T) -> Result<OperatorMatrix<T>> {
    OperatorMatrix::new(build_perturbation(spec, trial), BasisSpec::new(h, spec.k)?, format!("Q[{trial}]"))
}

fn scale_rows_cols<T: Real>(g: &CMatrix<T>, rows: &[T], cols: &[T]) -> CMatrix<T> {
    CMatrix::from_fn(g.nrows(), g.ncols(), |j, k| g[(j, k)] * (rows[j] * cols[k]))
}

pub fn hs_norm_sq<T: Real>(m: &CMatrix<T>) -> T {
    m.iter().fold(T::zero(), |a, z| a + z.norm_sqr())
}

/// Sum of singular values.
pub fn trace_norm<T: Real>(m: &CMatrix<T>) -> Result<T> {
    Ok(singular_triples_of(m)?.lambda.iter().fold(T::zero(), |a, &l| a + l.sqrt()))
}

/// Markov bound and exact tail of `Σ σⱼ² |αⱼ|²`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HsTail<T: Real> {
    pub chebyshev: T,
    pub exponential: T,
}

/// `min(1, Σσ²/a)` and `P(Σσⱼ²|αⱼ|² ≥ a)` by contour quadrature of the
/// characteristic-function representation.
///
/// The contour height is the saddle point of the integrand on the imaginary
/// axis, which keeps the integrand bounded for long variance lists. The value
/// does not depend on the height as long as it lies in `(0, 1/s₁)`.
pub fn hs_tail_bounds<T: Real>(sigma_sq: &[T], a: T) -> Result<HsTail<T>> {
    let (vals, mult) = compress(sigma_sq)?;
    if !(a > T::zero()) {
        return invalid("tail level a must be positive");
    }
    let total = vals.iter().zip(&mult).fold(T::zero(), |acc, (&s, &m)| acc + s * T::from_usize_lossy(m));
    let chebyshev = (total / a).min(T::one());
    let b = saddle_height(&vals, &mult, a);
    let exponential = tail_on_line(&vals, &mult, a, b)?;
    Ok(HsTail { chebyshev, exponential })
}

/// Tail probability along an explicit contour height `0 < b < 1/s₁`.
pub fn hs_tail_contour<T: Real>(sigma_sq: &[T], a: T, height: T) -> Result<T> {
    let (vals, mult) = compress(sigma_sq)?;
    if !(height > T::zero() && height * vals[0] < T::one()) {
        return invalid("contour height must lie in (0, 1/s1)");
    }
    tail_on_line(&vals, &mult, a, height)
}

fn compress<T: Real>(sigma_sq: &[T]) -> Result<(Vec<T>, Vec<usize>)> {
    if sigma_sq.is_empty() {
        return invalid("empty variance list");
    }
    if sigma_sq.iter().any(|&s| !(s > T::zero()) || !s.is_finite()) {
        return invalid("variances must be positive and finite");
    }
    let mut sorted = sigma_sq.to_vec();
    sorted.sort_by(|a, b| b.partial_cmp(a).expect("finite"));
    let mut vals: Vec<T> = Vec::new();
    let mut mult: Vec<usize> = Vec::new();
    for s in sorted {
        if vals.last() == Some(&s) {
            *mult.last_mut().expect("nonempty") += 1;
        } else {
            vals.push(s);
            mult.push(1);
        }
    }
    Ok((vals, mult))
}

/// Minimizer on `(0, 1/s₁)` of `−ab − Σ ln(1 − sⱼb) − ln b`.
fn saddle_height<T: Real>(vals: &[T], mult: &[usize], a: T) -> T {
    let deriv = |b: T| {
        vals.iter().zip(mult).fold(-a - T::one() / b, |acc, (&s, &m)| acc + T::from_usize_lossy(m) * s / (T::one() - s * b))
    };
    let mut lo = T::zero();
    let mut hi = T::one() / vals[0];
    for _ in 0..200 {
        let mid = (lo + hi) / T::lit(2.0);
        if deriv(mid) < T::zero() {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    (lo + hi) / T::lit(2.0)
}

fn log_integrand<T: Real>(vals: &[T], mult: &[usize], a: T, rho: Complex<T>) -> Complex<T> {
    let i = Complex::new(T::zero(), T::one());
    let mut acc = i * rho * a - rho.ln();
    for (&s, &m) in vals.iter().zip(mult) {
        acc -= (Complex::new(T::one(), T::zero()) + i * rho * s).ln() * T::from_usize_lossy(m);
    }
    acc
}

fn tail_on_line<T: Real>(vals: &[T], mult: &[usize], a: T, b: T) -> Result<T> {
    let i = Complex::new(T::zero(), T::one());
    let center = log_integrand(vals, mult, a, i * b).re;
    let f = |rho: Complex<T>| (log_integrand(vals, mult, a, rho) - center).exp();
    let curvature = vals.iter().zip(mult).fold(T::one() / (b * b), |acc, (&s, &m)| {
        let d = s / (T::one() - s * b);
        acc + T::from_usize_lossy(m) * d * d
    });
    let cut = T::lit(8.0) / curvature.sqrt();
    let tol = QuadTol { abs: 1e-14, rel: 1e-11, max_intervals: 4000 };
    let integral = horizontal_line_integral(f, b, cut, Decay::Up, tol)?;
    let value = (i * integral / T::two_pi()).re * center.exp();
    if !value.is_finite() {
        return Err(Error::Quadrature("non-finite tail value".into()));
    }
    Ok(value.max(T::zero()).min(T::one()))
}

/// KS comparisons of a rotated Gaussian ensemble against the original.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BasisInvariance {
    /// `‖U G V‖_HS` vs `‖G‖_HS` (independent draws).
    pub middle: KsResult,
    /// `‖diag(ŝ) U G V diag(s̃)‖_HS` vs `‖diag(ŝ) G diag(s̃)‖_HS`.
    pub full: KsResult,
    /// `Re (U G V)₀₀` vs `Re G₀₀`.
    pub entry: KsResult,
}

pub fn max_unitarity_defect<T: Real>(u: &CMatrix<T>) -> T {
    let id = CMatrix::<T>::identity(u.ncols(), u.ncols());
    (u.adjoint() * u - id).iter().fold(T::zero(), |a, z| a.max(z.modulus()))
}

/// Haar-distributed unitary from the QR factorization of a Gaussian matrix.
pub fn random_unitary<T: Real>(k: usize, seed: u64, stream: u64) -> CMatrix<T> {
    let g = gaussian_matrix::<T>(seed, stream, k, k);
    let qr = g.qr();
    let (mut q, r) = qr.unpack();
    for j in 0..k {
        let d = r[(j, j)];
        let m = d.modulus();
        if m > T::zero() {
            let phase = d / Complex::new(m, T::zero());
            for i in 0..k {
                q[(i, j)] *= phase;
            }
        }
    }
    q
}

/// Two-sample KS statistics of perturbation norms with and without the
/// rotations `U`, `V` applied to the Gaussian middle factor.
///
/// The two arms use disjoint trial streams so the comparison is between
/// independent samples.
pub fn basis_invariance_stat<T: Real>(
    spec: &PerturbationSpec<T>,
    u: &CMatrix<T>,
    v: &CMatrix<T>,
    trials: usize,
) -> Result<BasisInvariance> {
    spec.validate()?;
    let tol = T::lit(1e-12).max(T::eps() * T::lit(64.0));
    for (name, m) in [("U", u), ("V", v)] {
        if m.nrows() != spec.k || m.ncols() != spec.k {
            return invalid(format!("rotation {name} must be K x K"));
        }
        if max_unitarity_defect(m) > tol {
            return invalid(format!("rotation {name} is not unitary"));
        }
    }
    let rows: Vec<[f64; 6]> = (0..trials as u64)
        .into_par_iter()
        .map(|t| {
            let g0 = gaussian_matrix::<T>(spec.master_seed, derive_stream(&[0xB1, t]), spec.k, spec.k);
            let g1 = gaussian_matrix::<T>(spec.master_seed, derive_stream(&[0xB2, t]), spec.k, spec.k);
            let rot = u * g1 * v;
            [
                hs_norm_sq(&g0).sqrt().as_f64(),
                hs_norm_sq(&rot).sqrt().as_f64(),
                hs_norm_sq(&scale_rows_cols(&g0, &spec.s_hat, &spec.s_tilde)).sqrt().as_f64(),
                hs_norm_sq(&scale_rows_cols(&rot, &spec.s_hat, &spec.s_tilde)).sqrt().as_f64(),
                g0[(0, 0)].re.as_f64(),
                rot[(0, 0)].re.as_f64(),
            ]
        })
        .collect();
    let col = |c: usize| rows.iter().map(|r| r[c]).collect::<Vec<f64>>();
    Ok(BasisInvariance {
        middle: ks_two_sample(&col(0), &col(1)),
        full: ks_two_sample(&col(2), &col(3)),
        entry: ks_two_sample(&col(4), &col(5)),
    })
}
