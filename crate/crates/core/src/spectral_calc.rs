//! Functions of `Q = M*M` near its small spectrum: regularized log
//! determinants, smoothed traces, small-eigenvalue counts.

use std::cell::RefCell;

use nalgebra::SVD;
use num_complex::Complex;

use crate::error::{invalid, Error, Result};
use crate::grushin::small_count;
use crate::phase_space::{bump, Symbol};
use crate::quadrature::{integrate, integrate_real, QuadTol};
use crate::quantize::{build_weyl_matrix, BasisSpec};
use crate::real::Real;
use crate::special::linear_fit;
use crate::CMatrix;

/// Smooth cutoff `χ`: 1 on `(−∞, 1]`, 0 on `[2, ∞)`, values in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct CutoffFunction;

impl CutoffFunction {
    pub const SUPPORT_SUP: f64 = 2.0;
    pub const FLAT_END: f64 = 1.0;

    pub fn eval<T: Real>(&self, t: T) -> T {
        bump(t)
    }
}

pub fn smooth_cutoff() -> CutoffFunction {
    CutoffFunction
}

/// Regime guards `α/h ≥ min_alpha_over_h`, `α ≤ max_alpha`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CalcGuards {
    pub min_alpha_over_h: f64,
    pub max_alpha: f64,
}

impl Default for CalcGuards {
    fn default() -> Self {
        CalcGuards { min_alpha_over_h: 10.0, max_alpha: 0.3 }
    }
}

impl CalcGuards {
    pub fn check<T: Real>(&self, h: T, alpha: T) -> Result<()> {
        let (h, a) = (h.as_f64(), alpha.as_f64());
        if !(a > 0.0 && h > 0.0) {
            return invalid("alpha and h must be positive");
        }
        if a / h < self.min_alpha_over_h {
            return Err(Error::Guard(format!(
                "alpha/h = {} below {}",
                a / h,
                self.min_alpha_over_h
            )));
        }
        if a > self.max_alpha {
            return Err(Error::Guard(format!("alpha = {a} above {}", self.max_alpha)));
        }
        Ok(())
    }
}

/// Ascending eigenvalues of `M*M`, i.e. squared singular values of `M`.
pub fn gram_eigenvalues<T: Real>(m: &CMatrix<T>) -> Result<Vec<T>> {
    let n = m.nrows().min(m.ncols());
    let svd = SVD::try_new(m.clone(), false, false, T::eps(), 200 * n.max(1))
        .ok_or_else(|| Error::NoConvergence("singular values".into()))?;
    let mut l: Vec<T> = svd.singular_values.iter().map(|&s| s * s).collect();
    l.sort_by(|a, b| a.partial_cmp(b).expect("finite singular values"));
    Ok(l)
}

/// `∫∫ f` over the phase-space disc `x² + ξ² ≤ r_max²`, in polar
/// coordinates with nested adaptive quadrature.
pub fn disc_integral<T: Real, F>(f: F, r_max: T, tol: QuadTol) -> Result<T>
where
    F: Fn(T, T) -> T,
{
    let failure: RefCell<Option<Error>> = RefCell::new(None);
    let inner = |theta: T| {
        let (s, c) = theta.sin_cos();
        match integrate_real(|r: T| f(r * c, r * s) * r, T::zero(), r_max, tol) {
            Ok(v) => Complex::new(v, T::zero()),
            Err(e) => {
                failure.borrow_mut().get_or_insert(e);
                Complex::new(T::zero(), T::zero())
            }
        }
    };
    let out = integrate(inner, T::zero(), T::two_pi(), tol);
    if let Some(e) = failure.into_inner() {
        return Err(e);
    }
    Ok(out?.re)
}

/// Radius of the phase-space disc carried by the first `K` Hermite
/// functions: `πr² = 2πhK`.
pub fn basis_radius<T: Real>(basis: BasisSpec<T>) -> T {
    (T::lit(2.0) * T::from_usize_lossy(basis.k) * basis.h).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegularizedLogdet<T: Real> {
    /// `Σ ln(λⱼ + αχ(λⱼ/α))`.
    pub lhs: T,
    /// `(2πh)⁻¹ ∫∫ ln(q + αχ(q/α))` over the basis disc.
    pub rhs: T,
    /// `|lhs − rhs|·2πh`.
    pub residual: T,
    /// `Σ ln λⱼ`.
    pub plain: T,
}

fn regularize<T: Real>(chi: &CutoffFunction, alpha: T, t: T) -> T {
    t + alpha * chi.eval(t / alpha)
}

fn calc_tol() -> QuadTol {
    QuadTol { abs: 1e-10, rel: 1e-10, max_intervals: 4000 }
}

/// Compares `ln det(Q + αχ(Q/α))`, `Q = M*M` with `M` the quantization of
/// `p`, against its phase-space integral with `q = |p|²`.
pub fn regularized_logdet_compare<T: Real>(
    p: &Symbol<T>,
    basis: BasisSpec<T>,
    alpha: T,
    chi: &CutoffFunction,
    guards: &CalcGuards,
) -> Result<RegularizedLogdet<T>> {
    guards.check(basis.h, alpha)?;
    let m = build_weyl_matrix(p, basis)?;
    let lambda = gram_eigenvalues(&m.entries)?;
    let lhs = lambda.iter().fold(T::zero(), |a, &l| a + regularize(chi, alpha, l).ln());
    let plain = lambda.iter().fold(T::zero(), |a, &l| a + l.ln());
    let two_pi_h = T::two_pi() * basis.h;
    let integral = disc_integral(
        |x, xi| regularize(chi, alpha, p.eval(&[x], &[xi]).norm_sqr()).ln(),
        basis_radius(basis),
        calc_tol(),
    )?;
    let rhs = integral / two_pi_h;
    Ok(RegularizedLogdet { lhs, rhs, residual: (lhs - rhs).abs() * two_pi_h, plain })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceChi<T: Real> {
    /// `Σ χ(λⱼ/α)`.
    pub trace: T,
    /// `(2πh)⁻¹ ∫∫ χ(|p − z|²/α)` over the basis disc.
    pub integral: T,
    pub n_alpha: usize,
    pub n_two_alpha: usize,
}

impl<T: Real> TraceChi<T> {
    pub fn relative_error(&self) -> T {
        (self.trace - self.integral).abs() / self.integral.abs()
    }
}

/// `tr χ(Q/α)` for `Q = (P − z)*(P − z)` against its phase-space integral.
pub fn trace_chi_compare<T: Real>(
    p: &Symbol<T>,
    z: Complex<T>,
    basis: BasisSpec<T>,
    alpha: T,
    chi: &CutoffFunction,
    guards: &CalcGuards,
) -> Result<TraceChi<T>> {
    guards.check(basis.h, alpha)?;
    let m = build_weyl_matrix(p, basis)?.shifted(z);
    let lambda = gram_eigenvalues(&m.entries)?;
    let trace = lambda.iter().fold(T::zero(), |a, &l| a + chi.eval(l / alpha));
    let integral = disc_integral(
        |x, xi| chi.eval((p.eval(&[x], &[xi]) - z).norm_sqr() / alpha),
        basis_radius(basis),
        calc_tol(),
    )? / (T::two_pi() * basis.h);
    Ok(TraceChi {
        trace,
        integral,
        n_alpha: small_eig_count(&lambda, alpha),
        n_two_alpha: small_eig_count(&lambda, T::lit(2.0) * alpha),
    })
}

/// `#{j : λⱼ ≤ α}` for ascending eigenvalues.
pub fn small_eig_count<T: Real>(eigs: &[T], alpha: T) -> usize {
    small_count(eigs, alpha)
}

/// One row of [`integral_order_check`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OrderRow {
    pub alpha: f64,
    /// `∫₀^α ln q dV(q)`.
    pub log_integral: f64,
    /// `∫₀^{α₁} dV(q)/(α + q)`, the `h`-normalized resolvent integral.
    pub resolvent_integral: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OrderCheck {
    pub kappa: f64,
    pub alpha1: f64,
    pub rows: Vec<OrderRow>,
    /// Log–log slope of `|∫₀^α ln q dV|` against `α`.
    pub log_exponent: f64,
    /// Log–log slope of the resolvent integral against `α`.
    pub resolvent_exponent: f64,
    /// Slope of the resolvent integral against `ln(1/α)`.
    pub resolvent_log_slope: f64,
}

pub const ALPHA_1: f64 = 0.25;

/// Integrals against the model volume `V(q) = q^κ`, evaluated in the
/// variable `u = q^κ` so that `dV = du`.
pub fn integral_order_check(kappa: f64, alpha_grid: &[f64]) -> Result<OrderCheck> {
    if !(kappa > 0.0 && kappa <= 1.0) {
        return invalid("kappa must lie in (0, 1]");
    }
    if alpha_grid.len() < 2 || alpha_grid.iter().any(|&a| !(a > 0.0 && a < ALPHA_1)) {
        return invalid("alpha grid needs two or more points in (0, alpha_1)");
    }
    let tol = QuadTol { abs: 1e-14, rel: 1e-12, max_intervals: 4000 };
    let inv = 1.0 / kappa;
    let mut rows = Vec::with_capacity(alpha_grid.len());
    for &alpha in alpha_grid {
        let log_integral = integrate_real(|u: f64| inv * u.ln(), 0.0, alpha.powf(kappa), tol)?;
        let resolvent_integral = integrate_real(|u: f64| 1.0 / (alpha + u.powf(inv)), 0.0, ALPHA_1.powf(kappa), tol)?;
        rows.push(OrderRow { alpha, log_integral, resolvent_integral });
    }
    let la: Vec<f64> = rows.iter().map(|r| r.alpha.ln()).collect();
    let li: Vec<f64> = rows.iter().map(|r| r.log_integral.abs().ln()).collect();
    let lr: Vec<f64> = rows.iter().map(|r| r.resolvent_integral.ln()).collect();
    let ll: Vec<f64> = rows.iter().map(|r| -r.alpha.ln()).collect();
    let rv: Vec<f64> = rows.iter().map(|r| r.resolvent_integral).collect();
    Ok(OrderCheck {
        kappa,
        alpha1: ALPHA_1,
        log_exponent: linear_fit(&la, &li).0,
        resolvent_exponent: linear_fit(&la, &lr).0,
        resolvent_log_slope: linear_fit(&ll, &rv).0,
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::phase_space::Polynomial;
    use crate::real::c;

    fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
        (0..n).map(|k| lo * (hi / lo).powf(k as f64 / (n - 1) as f64)).collect()
    }

    #[test]
    fn cutoff_shape() {
        let chi = smooth_cutoff();
        assert_eq!(chi.eval(0.5f64), 1.0);
        assert_eq!(chi.eval(3.0f64), 0.0);
        assert!((chi.eval(1.5f64) - 0.5).abs() < 1e-15);
        let mut prev = 1.0f64;
        for k in 0..=4000 {
            let t = 0.5 + k as f64 * 2.0 / 4000.0;
            let v = chi.eval(t);
            assert!((0.0..=1.0).contains(&v));
            assert!((v - prev).abs() < 4.0 * 2.0 / 4000.0);
            prev = v;
        }
    }

    #[test]
    fn sandwich_holds() {
        let chi = smooth_cutoff();
        let alpha = 0.3;
        for k in 0..1000 {
            let t = k as f64 * 1.2 / 999.0;
            let lo = t + alpha / 4.0 * chi.eval(4.0 * t / alpha);
            let hi = t + alpha * chi.eval(t / alpha);
            let mid = alpha.max(t);
            assert!(lo <= mid + 1e-15 && mid <= hi + 1e-15, "t = {t}");
        }
    }

    #[test]
    fn guards_reject_outside_regime() {
        let g = CalcGuards::default();
        assert!(matches!(g.check(0.02, 0.16), Err(Error::Guard(_))));
        assert!(matches!(g.check(0.01, 0.5), Err(Error::Guard(_))));
        assert!(g.check(0.025, 0.25).is_ok());
    }

    #[test]
    fn disc_integral_of_gaussian() {
        let v = disc_integral(|x: f64, xi: f64| (-(x * x + xi * xi)).exp(), 3.0, calc_tol()).unwrap();
        let exact = std::f64::consts::PI * (1.0 - (-9.0f64).exp());
        assert!((v - exact).abs() < 1e-9);
    }

    #[test]
    fn separated_symbol_reduces_to_plain_logdet() {
        // p = (x² + ξ²)/2 + 1: q ≥ 1 > 2α, so χ vanishes on the spectrum.
        let chi = smooth_cutoff();
        let p = Symbol::harmonic_oscillator().minus(c(-1.0, 0.0));
        for h in [0.025f64, 0.0125] {
            let basis = BasisSpec::new(h, 80).unwrap();
            let r = regularized_logdet_compare(&p, basis, 0.3, &chi, &CalcGuards::default()).unwrap();
            assert!((r.lhs - r.plain).abs() < 1e-12);
            let exact: f64 = (0..80).map(|j| 2.0 * ((j as f64 + 0.5) * h + 1.0).ln()).sum();
            assert!((r.lhs - exact).abs() < 1e-9);
            assert!((r.lhs - r.rhs).abs() < h, "{h}: {r:?}");
        }
    }

    #[test]
    fn regularized_logdet_dominates_and_grows() {
        let chi = smooth_cutoff();
        let p = Symbol::rotated_oscillator().minus(c(1.0, 1.0));
        let basis = BasisSpec::new(0.0125, 200).unwrap();
        let mut prev = f64::NEG_INFINITY;
        for alpha in [0.125f64, 0.15, 0.2, 0.25, 0.3] {
            let r = regularized_logdet_compare(&p, basis, alpha, &chi, &CalcGuards::default()).unwrap();
            assert!(r.plain <= r.lhs);
            assert!(r.lhs >= prev);
            prev = r.lhs;
        }
    }

    /// Radial oracle for `p = (x² + ξ²)/2`, `z = 0`: with `u = r²/2`,
    /// `(2πh)⁻¹∫∫ χ(q/α) = h⁻¹∫₀^{Kh} χ(u²/α) du`.
    fn radial_trace_oracle(h: f64, k: usize, alpha: f64) -> f64 {
        let chi = smooth_cutoff();
        integrate_real(|u: f64| chi.eval(u * u / alpha), 0.0, k as f64 * h, calc_tol()).unwrap() / h
    }

    #[test]
    fn oscillator_trace_matches_radial_oracle() {
        let chi = smooth_cutoff();
        let p = Symbol::harmonic_oscillator();
        let (h, k) = (0.025, 120);
        let alpha = (20.0 * h) * (20.0 * h);
        let basis = BasisSpec::new(h, k).unwrap();
        let t = trace_chi_compare(&p, c(0.0, 0.0), basis, alpha, &chi, &CalcGuards::default()).unwrap();
        let exact: f64 = (0..k).map(|j| chi.eval(((j as f64 + 0.5) * h).powi(2) / alpha)).sum();
        assert!((t.trace - exact).abs() < 1e-9);
        assert!((t.integral - radial_trace_oracle(h, k, alpha)).abs() < 1e-6);
        assert!(t.relative_error() < 0.1);
        assert!(t.n_alpha as f64 <= t.trace && t.trace <= t.n_two_alpha as f64);
    }

    #[test]
    fn trace_saturates_when_alpha_covers_spectrum() {
        let chi = smooth_cutoff();
        let p = Symbol::harmonic_oscillator();
        let (h, k) = (0.01, 12);
        let basis = BasisSpec::new(h, k).unwrap();
        let t = trace_chi_compare(&p, c(0.0, 0.0), basis, 0.2, &chi, &CalcGuards::default()).unwrap();
        assert_eq!(t.trace, k as f64);
    }

    #[test]
    fn counts_follow_definition() {
        let eigs = [0.01, 0.02, 0.05, 0.3];
        assert_eq!(small_eig_count(&eigs, 0.001), 0);
        assert_eq!(small_eig_count(&eigs, 0.02), 2);
        assert_eq!(small_eig_count(&eigs, 1.0), 4);
        let m = crate::rng::gaussian_matrix::<f64>(5, 0, 30, 30);
        let lambda = gram_eigenvalues(&m).unwrap();
        let sys = crate::grushin::assemble_grushin(&m, lambda[7] * 1.0001).unwrap();
        assert_eq!(sys.n, small_eig_count(&lambda, lambda[7] * 1.0001));
    }

    #[test]
    fn unitary_conjugation_is_invisible() {
        let m = crate::rng::gaussian_matrix::<f64>(11, 0, 20, 20);
        let u = crate::random_pert::random_unitary::<f64>(20, 3, 0);
        let a = gram_eigenvalues(&m).unwrap();
        let b = gram_eigenvalues(&(&u * &m * u.adjoint())).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-10 * y.max(1.0));
        }
    }

    #[test]
    fn order_check_closed_forms() {
        let grid = log_grid(1e-4, 1e-2, 9);
        let one = integral_order_check(1.0, &grid).unwrap();
        for r in &one.rows {
            let a = r.alpha;
            assert!((r.log_integral - (a * a.ln() - a)).abs() < 1e-8);
            assert!((r.resolvent_integral - (1.0 + ALPHA_1 / a).ln()).abs() < 1e-8);
        }
        assert!((one.resolvent_log_slope - 1.0).abs() < 0.1);
        let half = integral_order_check(0.5, &grid).unwrap();
        for r in &half.rows {
            let a = r.alpha;
            let exact = (ALPHA_1 / a).sqrt().atan() / a.sqrt();
            assert!((r.resolvent_integral - exact).abs() < 1e-8 * exact);
        }
        assert!((half.resolvent_exponent + 0.5).abs() < 0.05, "{}", half.resolvent_exponent);
        assert!(integral_order_check(1.5, &grid).is_err());
    }

    #[test]
    fn polynomial_symbols_integrate() {
        let p = Symbol::from_polynomial(Polynomial::from_terms_1d(&[(0, 0, c(2.0, 0.0))]), "const");
        let basis = BasisSpec::new(0.05, 20).unwrap();
        let r = regularized_logdet_compare(&p, basis, 0.5, &smooth_cutoff(), &CalcGuards { min_alpha_over_h: 10.0, max_alpha: 1.0 })
            .unwrap();
        assert!((r.lhs - 20.0 * 4f64.ln()).abs() < 1e-10);
        assert!((r.rhs - 20.0 * 4f64.ln()).abs() < 1e-7);
    }
}
