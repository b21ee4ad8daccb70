//! Adaptive Gauss–Kronrod quadrature for complex-valued integrands, plus the
//! contour helpers used by the characteristic-function tail formulas.

use nalgebra::ComplexField;
use num_complex::Complex;

use crate::error::{Error, Result};
use crate::real::Real;

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
// Gauss weights on the odd-indexed Kronrod nodes (1, 3, 5, 7).
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

/// Tolerances for the adaptive integrator.
#[derive(Debug, Clone, Copy)]
pub struct QuadTol {
    pub abs: f64,
    pub rel: f64,
    pub max_intervals: usize,
}

impl Default for QuadTol {
    fn default() -> Self {
        Self {
            abs: 1e-13,
            rel: 1e-11,
            max_intervals: 4000,
        }
    }
}

struct Panel<T: Real> {
    a: T,
    b: T,
    value: Complex<T>,
    err: T,
}

fn gk15<T: Real, F>(f: &F, a: T, b: T) -> Result<(Complex<T>, T)>
where
    F: Fn(T) -> Complex<T>,
{
    let half = T::lit(0.5);
    let center = (a + b) * half;
    let radius = (b - a) * half;
    let fc = f(center);
    let mut kron = fc * T::lit(WGK[7]);
    let mut gauss = fc * T::lit(WG[3]);
    for i in 0..7 {
        let dx = radius * T::lit(XGK[i]);
        let f1 = f(center - dx);
        let f2 = f(center + dx);
        let s = f1 + f2;
        kron += s * T::lit(WGK[i]);
        if i % 2 == 1 {
            gauss += s * T::lit(WG[i / 2]);
        }
    }
    let value = kron * radius;
    if !(value.re.is_finite() && value.im.is_finite()) {
        return Err(Error::Quadrature(format!(
            "non-finite integrand on [{a}, {b}]"
        )));
    }
    let err = ((kron - gauss) * radius).modulus();
    Ok((value, err))
}

/// Adaptive quadrature of `f` over the finite interval `[a, b]`.
pub fn integrate<T: Real, F>(f: F, a: T, b: T, tol: QuadTol) -> Result<Complex<T>>
where
    F: Fn(T) -> Complex<T>,
{
    if a == b {
        return Ok(Complex::new(T::zero(), T::zero()));
    }
    let (v, e) = gk15(&f, a, b)?;
    let mut panels = vec![Panel { a, b, value: v, err: e }];
    loop {
        let total: Complex<T> = panels.iter().fold(Complex::new(T::zero(), T::zero()), |s, p| s + p.value);
        let err: T = panels.iter().fold(T::zero(), |s, p| s + p.err);
        let target = T::lit(tol.abs).max(T::lit(tol.rel) * total.modulus());
        if err <= target {
            return Ok(total);
        }
        if panels.len() >= tol.max_intervals {
            return Err(Error::Quadrature(format!(
                "no convergence after {} panels (error estimate {:e}, target {:e})",
                panels.len(),
                err,
                target
            )));
        }
        let (worst, _) = panels
            .iter()
            .enumerate()
            .fold((0usize, T::zero()), |(bi, be), (i, p)| if p.err > be { (i, p.err) } else { (bi, be) });
        let p = panels.swap_remove(worst);
        let mid = (p.a + p.b) * T::lit(0.5);
        if mid <= p.a || mid >= p.b {
            return Err(Error::Quadrature("interval can no longer be bisected".into()));
        }
        let (v1, e1) = gk15(&f, p.a, mid)?;
        let (v2, e2) = gk15(&f, mid, p.b)?;
        panels.push(Panel { a: p.a, b: mid, value: v1, err: e1 });
        panels.push(Panel { a: mid, b: p.b, value: v2, err: e2 });
    }
}

/// Real-valued convenience wrapper around [`integrate`].
pub fn integrate_real<T: Real, F>(f: F, a: T, b: T, tol: QuadTol) -> Result<T>
where
    F: Fn(T) -> T,
{
    integrate(|x| Complex::new(f(x), T::zero()), a, b, tol).map(|c| c.re)
}

/// `∫_a^∞ f(t) dt` via the map `t = a + u / (1 - u)`.
pub fn integrate_to_infinity<T: Real, F>(f: F, a: T, tol: QuadTol) -> Result<Complex<T>>
where
    F: Fn(T) -> Complex<T>,
{
    let one = T::one();
    integrate(
        |u: T| {
            let w = one - u;
            if w <= T::zero() {
                return Complex::new(T::zero(), T::zero());
            }
            let t = a + u / w;
            f(t) * (one / (w * w))
        },
        T::zero(),
        one,
        tol,
    )
}

/// Half-plane in which an integrand decays away from the real axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Decay {
    Up,
    Down,
}

/// `∫_{-∞}^{∞} f(s + i·height) ds` for an integrand analytic in the strip
/// swept by the two tails.
///
/// The central piece `|s| ≤ cut` is integrated directly; each tail is rotated
/// onto the vertical ray `Re τ = ±cut` pointing into the decay half-plane,
/// which is valid when all singularities lie in `|Re τ| < cut`.
pub fn horizontal_line_integral<T: Real, F>(
    f: F,
    height: T,
    cut: T,
    decay: Decay,
    tol: QuadTol,
) -> Result<Complex<T>>
where
    F: Fn(Complex<T>) -> Complex<T>,
{
    let i = Complex::new(T::zero(), T::one());
    let dir = match decay {
        Decay::Up => T::one(),
        Decay::Down => -T::one(),
    };
    let mid = integrate(|s: T| f(Complex::new(s, height)), -cut, cut, tol)?;
    let right = integrate_to_infinity(|t: T| f(Complex::new(cut, height + dir * t)), T::zero(), tol)? * i * dir;
    let left = integrate_to_infinity(|t: T| f(Complex::new(-cut, height + dir * t)), T::zero(), tol)? * i * dir;
    Ok(mid + right - left)
}
