//! Distribution of `ln|det G|²` for complex Gaussian matrices, its
//! truncated-exponential majorant, and Monte Carlo counterparts.

use nalgebra::ComplexField;
use num_complex::Complex;
use rayon::prelude::*;

use crate::error::{invalid, Error, Result};
use crate::quadrature::{horizontal_line_integral, integrate_to_infinity, Decay, QuadTol};
use crate::quantize::log_det_of;
use crate::real::Real;
use crate::rng::{complex_gaussian, derive_stream, gaussian_matrix, stream_rng};
use crate::special::{ln_factorial, linear_fit};
use crate::CMatrix;

/// Density of `|u|²` for a standard complex Gaussian `u ∈ ℂᴺ`:
/// `r^{N−1}e^{−r}/(N−1)!` on `r ≥ 0`.
pub fn vector_norm_density<T: Real>(n: usize, r: T) -> T {
    assert!(n >= 1, "N must be positive");
    if r < T::zero() {
        return T::zero();
    }
    if r == T::zero() {
        return if n == 1 { T::one() } else { T::zero() };
    }
    (T::from_usize_lossy(n - 1) * r.ln() - r - ln_factorial::<T>(n - 1)).exp()
}

/// `νⱼ(t) = e^{jt − eᵗ}/(j−1)!`, the density of `ln|u|²` for `u ∈ ℂʲ`.
pub fn nu<T: Real>(j: usize, t: T) -> T {
    (T::from_usize_lossy(j) * t - t.exp() - ln_factorial::<T>(j - 1)).exp()
}

/// `start + k·step`, `k < len`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UniformGrid<T: Real> {
    pub start: T,
    pub step: T,
    pub len: usize,
}

impl<T: Real> UniformGrid<T> {
    pub fn at(&self, k: usize) -> T {
        self.start + self.step * T::from_usize_lossy(k)
    }

    pub fn end(&self) -> T {
        self.at(self.len.saturating_sub(1))
    }

    /// Grid on `[−max(5eN, 24), ln N + 6]` at step `2⁻⁹`, wide enough for
    /// every factor `ν₁ … ν_N`.
    pub fn factor_default(n: usize) -> Self {
        let lo = -T::lit((5.0 * std::f64::consts::E * n as f64).max(24.0));
        let hi = T::from_usize_lossy(n).ln() + T::lit(6.0);
        let step = T::lit(1.0 / 512.0);
        let len = ((hi - lo) / step).ceil().to_usize().expect("grid length") + 1;
        UniformGrid { start: lo, step, len }
    }
}

/// Sampled density with its trapezoid mass.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityGrid<T: Real> {
    pub t: UniformGrid<T>,
    pub values: Vec<T>,
    pub total_mass: T,
}

impl<T: Real> DensityGrid<T> {
    fn cumulative(&self) -> Vec<T> {
        let half = T::lit(0.5);
        let mut acc = T::zero();
        let mut out = Vec::with_capacity(self.values.len());
        out.push(T::zero());
        for w in self.values.windows(2) {
            acc += (w[0] + w[1]) * half * self.t.step;
            out.push(acc);
        }
        out
    }

    /// Interpolated distribution function built from the cumulative
    /// trapezoid rule, normalized by the total mass.
    pub fn cdf_fn(&self) -> impl Fn(T) -> T + '_ {
        let cum = self.cumulative();
        let total = *cum.last().expect("nonempty grid");
        move |x: T| {
            if x <= self.t.start {
                return T::zero();
            }
            if x >= self.t.end() {
                return T::one();
            }
            let u = (x - self.t.start) / self.t.step;
            let k = u.floor().to_usize().expect("index").min(cum.len() - 2);
            let frac = u - T::from_usize_lossy(k);
            let v0 = self.values[k];
            let v1 = self.values[k + 1];
            // Exact integral of the linear interpolant over the partial cell.
            let part = self.t.step * frac * (v0 + (v1 - v0) * frac / T::lit(2.0));
            (cum[k] + part) / total
        }
    }

    pub fn mean(&self) -> T {
        let mut m = T::zero();
        for (k, &v) in self.values.iter().enumerate() {
            m += self.t.at(k) * v;
        }
        m * self.t.step / self.total_mass
    }
}

fn trapezoid<T: Real>(values: &[T], step: T) -> T {
    if values.len() < 2 {
        return T::zero();
    }
    let inner = values.iter().fold(T::zero(), |a, &v| a + v);
    (inner - (values[0] + values[values.len() - 1]) * T::lit(0.5)) * step
}

const MASS_TOL: f64 = 1e-8;

/// Density of `ln|det G|²` for an `N × N` complex Gaussian `G`, as the
/// convolution `ν₁ * … * ν_N` sampled from `factor_grid`.
///
/// The result lives on the grid starting at `N·factor_grid.start`.
pub fn logdet_density<T: Real>(n: usize, factor_grid: UniformGrid<T>) -> Result<DensityGrid<T>> {
    if n == 0 {
        return invalid("N must be positive");
    }
    if factor_grid.len < 2 || !(factor_grid.step > T::zero()) {
        return invalid("factor grid needs at least two points and a positive step");
    }
    let sample = |j: usize| (0..factor_grid.len).map(|k| nu(j, factor_grid.at(k))).collect::<Vec<T>>();
    let mut acc = sample(1);
    for j in 1..=n {
        let vj = if j == 1 { acc.clone() } else { sample(j) };
        let mass = trapezoid(&vj, factor_grid.step);
        if (mass - T::one()).abs() > T::lit(MASS_TOL) {
            return Err(Error::InvalidArgument(format!(
                "grid does not cover nu_{j}: mass {mass} on [{}, {}]",
                factor_grid.start,
                factor_grid.end()
            )));
        }
        if j > 1 {
            acc = T::fft_convolve(&acc, &vj).into_iter().map(|v| (v * factor_grid.step).max(T::zero())).collect();
        }
    }
    let grid = UniformGrid { start: factor_grid.start * T::from_usize_lossy(n), step: factor_grid.step, len: acc.len() };
    let total_mass = trapezoid(&acc, grid.step);
    Ok(DensityGrid { t: grid, values: acc, total_mass })
}

/// `x(N) = ln(N!)/N`.
pub fn x_of_n<T: Real>(n: usize) -> T {
    assert!(n >= 1, "N must be positive");
    ln_factorial::<T>(n) / T::from_usize_lossy(n)
}

/// `ln N + ln N/(2N) − 1 + C₀/N` with `C₀ = ln(2π)/2`.
pub fn x_expansion<T: Real>(n: usize) -> T {
    let nn = T::from_usize_lossy(n);
    let c0 = T::two_pi().ln() / T::lit(2.0);
    nn.ln() + nn.ln() / (T::lit(2.0) * nn) - T::one() + c0 / nn
}

/// Log–log slope and RMS residual of `|x(N) − expansion|` against `N`.
pub fn x_residual_slope<T: Real>(ns: &[usize]) -> (T, T) {
    let x: Vec<T> = ns.iter().map(|&n| T::from_usize_lossy(n).ln()).collect();
    let y: Vec<T> = ns.iter().map(|&n| (x_of_n::<T>(n) - x_expansion::<T>(n)).abs().ln()).collect();
    let (slope, _, rms) = linear_fit(&x, &y);
    (slope, rms)
}

/// `ρ_N(t) = 1_{t ≤ x(N)} e^{Nt}/(N−1)!`.
pub fn rho_density<T: Real>(n: usize, t: T) -> T {
    if t > x_of_n::<T>(n) {
        return T::zero();
    }
    (T::from_usize_lossy(n) * t - ln_factorial::<T>(n - 1)).exp()
}

/// `∫ e^{−itτ} ρ_N(t) dt = e^{−ix(N)τ}/(1 − iτ/N)`.
pub fn rho_fourier<T: Real>(n: usize, tau: T) -> Complex<T> {
    let x = x_of_n::<T>(n);
    let num = Complex::new(T::zero(), -x * tau).exp();
    num / Complex::new(T::one(), -tau / T::from_usize_lossy(n))
}

/// The same transform by direct quadrature, for cross-checks.
pub fn rho_fourier_quadrature<T: Real>(n: usize, tau: T) -> Result<Complex<T>> {
    let x = x_of_n::<T>(n);
    let nn = T::from_usize_lossy(n);
    let lg = ln_factorial::<T>(n - 1);
    let f = |s: T| {
        let t = x - s;
        Complex::new(T::zero(), -t * tau).exp() * (nn * t - lg).exp()
    };
    integrate_to_infinity(f, T::zero(), QuadTol::default())
}

/// `∫_{−∞}^a ρ₁ * … * ρ_N` and its exponential majorant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RhoTail<T: Real> {
    pub value: T,
    /// `e^{−(Σx(j) − a)/2}·prefactor`.
    pub majorant: T,
    /// `(1/2π)∫ |τ|⁻¹ Πⱼ |1 − iτ/j|⁻¹ dRe τ` along `Im τ = −1/2`.
    pub prefactor: T,
}

pub fn sum_x<T: Real>(n: usize) -> T {
    (1..=n).fold(T::zero(), |a, j| a + x_of_n::<T>(j))
}

fn rho_log_integrand<T: Real>(n: usize, c: T, tau: Complex<T>) -> Complex<T> {
    let i = Complex::new(T::zero(), T::one());
    let mut acc = -i * tau * c + (-i / tau).ln();
    for j in 1..=n {
        acc -= (Complex::new(T::one(), T::zero()) - i * tau / T::from_usize_lossy(j)).ln();
    }
    acc
}

/// Distribution function at `a ≤ Σx(j)` of the sum of independent `ρⱼ`
/// variables, by quadrature of its Fourier inversion along `Im τ = −1/2`.
pub fn rho_tail<T: Real>(n: usize, a: T) -> Result<RhoTail<T>> {
    if n == 0 {
        return invalid("N must be positive");
    }
    let c = sum_x::<T>(n) - a;
    if c < T::zero() {
        return invalid("rho_tail requires a <= sum of x(j)");
    }
    let height = -T::lit(0.5);
    let f = |tau: Complex<T>| rho_log_integrand(n, c, tau).exp();
    let tol = QuadTol { abs: 1e-14, rel: 1e-11, max_intervals: 4000 };
    let integral = horizontal_line_integral(f, height, T::lit(8.0), Decay::Down, tol)?;
    let value = integral.re / T::two_pi();
    let g = |s: T| Complex::new(rho_log_integrand(n, T::zero(), Complex::new(s, height)).re.exp(), T::zero());
    let prefactor = T::lit(2.0) * integrate_to_infinity(g, T::zero(), tol)?.re / T::two_pi();
    let majorant = (-c / T::lit(2.0)).exp() * prefactor;
    if !value.is_finite() {
        return Err(Error::Quadrature("non-finite rho tail".into()));
    }
    Ok(RhoTail { value, majorant, prefactor })
}

/// Step distribution function of Monte Carlo samples.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalCdf {
    pub grid: Vec<f64>,
    pub cdf: Vec<f64>,
    /// Sorted samples of `ln|det(D + G)|²`.
    pub samples: Vec<f64>,
    /// Draws with an exactly zero pivot that were replaced.
    pub resampled: usize,
}

impl EmpiricalCdf {
    pub fn at(&self, a: f64) -> f64 {
        self.samples.partition_point(|&s| s <= a) as f64 / self.samples.len() as f64
    }
}

/// Samples `ln|det(D + G)|²` for `trials` independent Gaussian `G`.
pub fn empirical_logdet_cdf<T: Real>(
    n: usize,
    trials: usize,
    d: Option<&CMatrix<T>>,
    seed: u64,
    grid: &[f64],
) -> Result<EmpiricalCdf> {
    if trials < 1000 {
        return invalid("need at least 10^3 trials");
    }
    if let Some(d) = d {
        if d.nrows() != n || d.ncols() != n {
            return invalid("offset D must be N x N");
        }
    }
    let draws: Vec<(f64, usize)> = (0..trials as u64)
        .into_par_iter()
        .map(|t| {
            for attempt in 0u64.. {
                let stream = if attempt == 0 { t } else { derive_stream(&[t, attempt]) };
                let mut g = gaussian_matrix::<T>(seed, stream, n, n);
                if let Some(d) = d {
                    g += d;
                }
                match log_det_of(&g) {
                    Ok(ld) => return Ok(((T::lit(2.0) * ld.re).as_f64(), attempt as usize)),
                    Err(Error::Singular(_)) => continue,
                    Err(e) => return Err(e),
                }
            }
            unreachable!()
        })
        .collect::<Result<_>>()?;
    let resampled = draws.iter().map(|d| d.1).sum();
    let mut samples: Vec<f64> = draws.into_iter().map(|d| d.0).collect();
    samples.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
    let mut out = EmpiricalCdf { grid: grid.to_vec(), cdf: Vec::new(), samples, resampled };
    out.cdf = grid.iter().map(|&a| out.at(a)).collect();
    Ok(out)
}

/// `Σⱼ ln‖ũⱼ‖²` with `ũⱼ` the component of column `j` orthogonal to the
/// previous columns, which equals `ln|det G|²`.
pub fn gram_log_det_sq<T: Real>(g: &CMatrix<T>) -> T {
    let n = g.ncols();
    let mut q: Vec<nalgebra::DVector<Complex<T>>> = Vec::with_capacity(n);
    let mut acc = T::zero();
    for j in 0..n {
        let mut v = g.column(j).into_owned();
        for b in &q {
            let c = b.dotc(&v);
            v -= b * c;
        }
        let nrm = v.norm();
        acc += (nrm * nrm).ln();
        q.push(v / Complex::new(nrm, T::zero()));
    }
    acc
}

/// Monte Carlo `P(|c + u|² ≤ b²)` for a scalar standard complex Gaussian.
pub fn shifted_small_ball(c: Complex<f64>, b: f64, trials: usize, seed: u64) -> f64 {
    let mut rng = stream_rng(seed, derive_stream(&[0x5B, c.re.to_bits(), c.im.to_bits(), b.to_bits()]));
    let hits = (0..trials).filter(|_| (c + complex_gaussian(&mut rng)).norm_sqr() <= b * b).count();
    hits as f64 / trials as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::integrate_real;
    use crate::special::{binomial_sigma, ks_one_sample};

    #[test]
    fn vector_norm_density_moments() {
        assert!((vector_norm_density(1, 0.7f64) - (-0.7f64).exp()).abs() < 1e-15);
        assert_eq!(vector_norm_density(3, -1.0f64), 0.0);
        for n in [1usize, 2, 5, 12] {
            let f = |r: f64| Complex::new(vector_norm_density(n, r), 0.0);
            let mass = integrate_to_infinity(f, 0.0, QuadTol::default()).unwrap().re;
            let mean = integrate_to_infinity(|r: f64| f(r) * r, 0.0, QuadTol::default()).unwrap().re;
            assert!((mass - 1.0).abs() < 1e-8);
            assert!((mean - n as f64).abs() < 1e-6);
        }
    }

    #[test]
    fn single_factor_density() {
        let d = logdet_density(1, UniformGrid::<f64>::factor_default(1)).unwrap();
        for k in (0..d.values.len()).step_by(997) {
            let t = d.t.at(k);
            assert!((d.values[k] - (t - t.exp()).exp()).abs() < 1e-15);
        }
    }

    #[test]
    fn convolved_density_has_unit_mass() {
        for n in [2usize, 3, 6] {
            let d = logdet_density(n, UniformGrid::<f64>::factor_default(n)).unwrap();
            assert!((d.total_mass - 1.0).abs() < 1e-6, "{}", d.total_mass);
            assert!(d.values.iter().all(|&v| v >= 0.0));
        }
    }

    #[test]
    fn narrow_grids_are_rejected() {
        let g = UniformGrid { start: -2.0f64, step: 1.0 / 512.0, len: 2048 };
        assert!(logdet_density(3, g).is_err());
    }

    #[test]
    fn convolution_matches_monte_carlo() {
        let d = logdet_density(3, UniformGrid::<f64>::factor_default(3)).unwrap();
        let emp = empirical_logdet_cdf::<f64>(3, 20_000, None, 41, &[]).unwrap();
        let cdf = d.cdf_fn();
        let ks = ks_one_sample(&emp.samples, |x| cdf(x));
        assert!(ks.statistic < 0.015, "{ks:?}");
    }

    #[test]
    fn x_values() {
        assert_eq!(x_of_n::<f64>(1), 0.0);
        assert!((x_of_n::<f64>(2) - 2f64.ln() / 2.0).abs() < 1e-15);
        let ns: Vec<usize> = (0..13).map(|k| (10.0 * 1000f64.powf(k as f64 / 12.0)).round() as usize).collect();
        let (slope, _) = x_residual_slope::<f64>(&ns);
        assert!((slope + 2.0).abs() < 0.1, "{slope}");
    }

    #[test]
    fn rho_is_normalized_with_known_transform() {
        for n in [1usize, 3, 7] {
            let x = x_of_n::<f64>(n);
            let mass = integrate_real(|s: f64| rho_density(n, x - s), 0.0, 60.0, QuadTol::default()).unwrap();
            assert!((mass - 1.0).abs() < 1e-10);
            for tau in [-3.0, -0.5, 0.0, 1.0, 4.0] {
                let q = rho_fourier_quadrature(n, tau).unwrap();
                assert!((q - rho_fourier(n, tau)).modulus() < 1e-8);
            }
        }
    }

    /// Residue sum at the poles `τ = −ij`: the distribution function of the
    /// sum of `ρ₁..ρ_N` at `a`.
    fn residue_oracle(n: usize, a: f64) -> f64 {
        let c = sum_x::<f64>(n) - a;
        let mut total = 0.0;
        for j in 1..=n {
            // Π_k 1/(1 − iτ/k) near τ = −ij: 1/(1 − iτ/j) = ij/(τ + ij) · (−1)·(−1)…
            // written as j/(j − iτ); at τ = −ij the other factors are k/(k − j).
            let mut prod = 1.0;
            for k in 1..=n {
                if k != j {
                    prod *= k as f64 / (k as f64 - j as f64);
                }
            }
            total += prod * (-(j as f64) * c).exp();
        }
        total
    }

    #[test]
    fn rho_tail_matches_residues() {
        for a in [-5.0, -1.0, 0.0] {
            let r = rho_tail::<f64>(1, a).unwrap();
            assert!((r.value - a.exp().min(1.0)).abs() < 1e-8, "{a}");
        }
        for n in [2usize, 4, 6] {
            let s = sum_x::<f64>(n);
            let mut prev = 0.0;
            for k in 0..12 {
                let a = s - 6.0 + 0.5 * k as f64;
                let r = rho_tail::<f64>(n, a).unwrap();
                assert!((r.value - residue_oracle(n, a)).abs() < 1e-8, "{n} {a}");
                assert!(r.value >= prev - 1e-12);
                assert!(r.value <= r.majorant + 1e-12);
                prev = r.value;
            }
        }
        assert!(rho_tail::<f64>(3, 100.0).is_err());
    }

    #[test]
    fn gram_reduction_matches_lu() {
        for seed in 0..50 {
            let n = 1 + (seed as usize % 20);
            let g = gaussian_matrix::<f64>(seed, 3, n, n);
            let a = gram_log_det_sq(&g);
            let b = 2.0 * log_det_of(&g).unwrap().re;
            assert!((a - b).abs() < 1e-10 * b.abs().max(1.0));
        }
    }

    #[test]
    fn shifted_ball_is_less_likely() {
        let trials = 40_000;
        for c in [0.5, 1.0, 2.0] {
            for b in [0.2, 0.5, 1.0, 1.5] {
                let p0 = 1.0 - (-b * b as f64).exp();
                let pc = shifted_small_ball(Complex::new(c, 0.0), b, trials, 9);
                assert!(pc <= p0 + 3.0 * binomial_sigma(p0, trials));
            }
        }
    }

    #[test]
    fn offsets_shift_mass_right() {
        let n = 4;
        let grid: Vec<f64> = (0..20).map(|k| -10.0 + 0.6 * k as f64).collect();
        let trials = 5000;
        let base = empirical_logdet_cdf::<f64>(n, trials, None, 3, &grid).unwrap();
        let id = CMatrix::<f64>::identity(n, n);
        let one = empirical_logdet_cdf::<f64>(n, trials, Some(&id), 3, &grid).unwrap();
        for (a, b) in base.cdf.iter().zip(&one.cdf) {
            assert!(*b <= a + 3.0 * binomial_sigma(*a, trials) + 1e-12);
        }
        assert_eq!(base.resampled, 0);
    }
}
