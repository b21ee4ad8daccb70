//! Special functions and goodness-of-fit statistics.

use crate::real::Real;

/// `ln Γ(x)` for `x > 0`.
///
/// Shifts the argument above 15 by the recurrence and then sums the Stirling
/// series, which is accurate to a few ulps there.
pub fn ln_gamma<T: Real>(x: T) -> T {
    assert!(x > T::zero(), "ln_gamma requires x > 0");
    let shift_to = T::lit(15.0);
    let mut y = x;
    let mut acc = T::zero();
    while y < shift_to {
        acc -= y.ln();
        y += T::one();
    }
    let half = T::lit(0.5);
    let inv = T::one() / y;
    let inv2 = inv * inv;
    // Bernoulli terms B_{2k}/(2k(2k-1)) for k = 1..7.
    let coeffs = [
        1.0 / 12.0,
        -1.0 / 360.0,
        1.0 / 1260.0,
        -1.0 / 1680.0,
        1.0 / 1188.0,
        -691.0 / 360360.0,
        1.0 / 156.0,
    ];
    let mut series = T::zero();
    let mut pow = inv;
    for c in coeffs {
        series += T::lit(c) * pow;
        pow *= inv2;
    }
    let half_ln_two_pi = T::lit(0.918_938_533_204_672_7);
    acc + (y - half) * y.ln() - y + half_ln_two_pi + series
}

/// `ln(n!)`.
pub fn ln_factorial<T: Real>(n: usize) -> T {
    if n < 20 {
        return (2..=n).fold(T::zero(), |a, k| a + T::from_usize_lossy(k).ln());
    }
    ln_gamma(T::from_usize_lossy(n) + T::one())
}

/// Survival function of the Kolmogorov distribution,
/// `Q(λ) = 2 Σ_{k≥1} (-1)^{k-1} e^{-2k²λ²}`.
pub fn kolmogorov_survival(lambda: f64) -> f64 {
    if lambda <= 0.0 {
        return 1.0;
    }
    if lambda < 0.2 {
        return 1.0;
    }
    let mut sum = 0.0;
    for k in 1..=200 {
        let kf = k as f64;
        let term = (-2.0 * kf * kf * lambda * lambda).exp();
        sum += if k % 2 == 1 { term } else { -term };
        if term < 1e-18 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

/// Result of a Kolmogorov–Smirnov comparison.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KsResult {
    pub statistic: f64,
    pub p_value: f64,
}

/// Two-sample KS test. Inputs need not be sorted.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> KsResult {
    assert!(!a.is_empty() && !b.is_empty(), "KS test needs non-empty samples");
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (n, m) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0usize, 0usize);
    let mut d: f64 = 0.0;
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / n - j as f64 / m).abs());
    }
    let en = (n * m / (n + m)).sqrt();
    let lambda = (en + 0.12 + 0.11 / en) * d;
    KsResult {
        statistic: d,
        p_value: kolmogorov_survival(lambda),
    }
}

/// One-sample KS distance against a continuous CDF.
pub fn ks_one_sample(sample: &[f64], cdf: impl Fn(f64) -> f64) -> KsResult {
    assert!(!sample.is_empty(), "KS test needs a non-empty sample");
    let mut s = sample.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in s.iter().enumerate() {
        let f = cdf(x);
        d = d.max((f - i as f64 / n).abs()).max(((i + 1) as f64 / n - f).abs());
    }
    let en = n.sqrt();
    let lambda = (en + 0.12 + 0.11 / en) * d;
    KsResult {
        statistic: d,
        p_value: kolmogorov_survival(lambda),
    }
}

/// Binomial standard error of a frequency estimate.
pub fn binomial_sigma(p: f64, trials: usize) -> f64 {
    (p.clamp(0.0, 1.0) * (1.0 - p.clamp(0.0, 1.0)) / trials as f64).sqrt()
}

/// Ordinary least squares fit `y ≈ a + b x`; returns `(slope, intercept, rms residual)`.
pub fn linear_fit<T: Real>(x: &[T], y: &[T]) -> (T, T, T) {
    assert_eq!(x.len(), y.len());
    let n = T::from_usize_lossy(x.len());
    let mx = x.iter().copied().fold(T::zero(), |a, b| a + b) / n;
    let my = y.iter().copied().fold(T::zero(), |a, b| a + b) / n;
    let mut sxx = T::zero();
    let mut sxy = T::zero();
    for (&xi, &yi) in x.iter().zip(y) {
        sxx += (xi - mx) * (xi - mx);
        sxy += (xi - mx) * (yi - my);
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let mut ss = T::zero();
    for (&xi, &yi) in x.iter().zip(y) {
        let r = yi - intercept - slope * xi;
        ss += r * r;
    }
    (slope, intercept, (ss / n).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ln_gamma_small_integers() {
        let mut fact = 1.0f64;
        for n in 1..20usize {
            let got: f64 = ln_gamma(n as f64);
            assert!((got - fact.ln()).abs() < 1e-13 * fact.ln().abs().max(1.0), "n={n}");
            fact *= n as f64;
        }
    }

    #[test]
    fn ln_gamma_half() {
        let got: f64 = ln_gamma(0.5);
        assert!((got - std::f64::consts::PI.sqrt().ln()).abs() < 1e-14);
    }

    #[test]
    fn ln_factorial_against_direct_sum() {
        let direct: f64 = (1..=5000).map(|k| (k as f64).ln()).sum();
        let got: f64 = ln_factorial(5000);
        assert!((got - direct).abs() / direct < 1e-13);
    }

    #[test]
    fn kolmogorov_tail_known_value() {
        // Q(1.36) ≈ 0.0494 is the textbook 5% point.
        assert!((kolmogorov_survival(1.36) - 0.0494).abs() < 1e-3);
    }

    #[test]
    fn ks_identical_samples() {
        let a: Vec<f64> = (0..100).map(|i| i as f64).collect();
        let r = ks_two_sample(&a, &a);
        assert_eq!(r.statistic, 0.0);
        assert!(r.p_value > 0.99);
    }

    #[test]
    fn linear_fit_exact_line() {
        let x = [0.0, 1.0, 2.0, 3.0];
        let y = [1.0, 3.0, 5.0, 7.0];
        let (b, a, r) = linear_fit(&x, &y);
        assert!((b - 2.0f64).abs() < 1e-14 && (a - 1.0f64).abs() < 1e-14 && r < 1e-14);
    }
}
