//! Zero counting by the argument principle, Weyl-law comparisons and
//! boundary bounds on `ln|det|` for perturbed operators.

use num_complex::Complex;
use rayon::prelude::*;

use crate::error::{invalid, Error, Result};
use crate::phase_space::{integral_i, volume_preimage, DomainSpec, PhaseBox, QuadGrid, Symbol};
use crate::quantize::{build_weyl_matrix, log_det_of, trust_spectrum, BasisSpec, TrustedSpectrum, TRUST_TOL};
use crate::random_pert::{build_perturbation, trial_seed, PerturbationSpec};
use crate::real::Real;
use crate::special::binomial_sigma;
use crate::spectral_calc::basis_radius;
use crate::CMatrix;

/// Result of [`winding_count`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Winding<T: Real> {
    pub count: i64,
    /// `|total/2π − count|`.
    pub residual: T,
    pub evaluations: usize,
    /// Smallest `ln|F|` seen on the contour.
    pub min_log_modulus: T,
}

/// Boundary values below `ZERO_TOL·scale` count as a zero on the contour.
pub const ZERO_TOL: f64 = 1e-12;
const MAX_RESIDUAL: f64 = 0.1;

fn wrap<T: Real>(phase: T) -> T {
    let two_pi = T::two_pi();
    let mut p = phase - two_pi * (phase / two_pi).round();
    if p <= -T::pi() {
        p += two_pi;
    }
    p
}

/// Number of zeros of `F` inside `Γ`.
///
/// `log_f` returns `ln F(z)` on any branch (`ln|F| + i·arg F`). Boundary
/// intervals are bisected until adjacent phases differ by less than `π/2`,
/// at most `max_refine` times each.
pub fn winding_count<T: Real, F>(log_f: F, gamma: &DomainSpec<T>, initial_spacing: T, max_refine: usize) -> Result<Winding<T>>
where
    F: Fn(Complex<T>) -> Result<Complex<T>>,
{
    if !(initial_spacing > T::zero()) {
        return invalid("initial spacing must be positive");
    }
    let n = gamma.boundary_count(initial_spacing);
    let nn = T::from_usize_lossy(n);
    let mut evaluations = 0usize;
    let mut moduli = Vec::with_capacity(2 * n);
    let mut eval = |s: T, moduli: &mut Vec<T>| -> Result<Complex<T>> {
        evaluations += 1;
        let v = log_f(gamma.boundary_at(s))?;
        if !(v.re.is_finite() || v.re == -T::inf()) || !v.im.is_finite() && v.re != -T::inf() {
            return Err(Error::NonFinite(format!("log F at boundary parameter {s}")));
        }
        moduli.push(v.re);
        Ok(v)
    };
    let start = eval(T::zero(), &mut moduli)?;
    let quarter = T::frac_pi_2();
    let mut total = T::zero();
    let mut prev = (T::zero(), start);
    for k in 1..=n {
        let s = T::from_usize_lossy(k) / nn;
        let next = if k == n { (T::one(), start) } else { (s, eval(s, &mut moduli)?) };
        // Depth-first bisection of [prev, next].
        let mut stack = vec![(prev, next, 0usize)];
        while let Some(((sa, va), (sb, vb), depth)) = stack.pop() {
            if va.re == -T::inf() || vb.re == -T::inf() {
                return Err(Error::Singular(format!("F vanishes on the contour near parameter {sa}")));
            }
            let d = wrap(vb.im - va.im);
            if d.abs() < quarter {
                total += d;
                continue;
            }
            if depth >= max_refine {
                return Err(Error::NoConvergence(format!(
                    "phase jump {d} unresolved after {max_refine} bisections near parameter {sa}"
                )));
            }
            let sm = (sa + sb) / T::lit(2.0);
            let vm = eval(sm, &mut moduli)?;
            stack.push(((sm, vm), (sb, vb), depth + 1));
            stack.push(((sa, va), (sm, vm), depth + 1));
        }
        prev = next;
    }
    let mut sorted = moduli.clone();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite log modulus"));
    let median = sorted[sorted.len() / 2];
    let min_log_modulus = sorted[0];
    if min_log_modulus < median + T::lit(ZERO_TOL).ln() {
        return Err(Error::Singular(format!(
            "|F| drops to e^{min_log_modulus} on the contour against a typical e^{median}"
        )));
    }
    let turns = total / T::two_pi();
    let count = turns.round();
    let residual = (turns - count).abs();
    if residual > T::lit(MAX_RESIDUAL) {
        return Err(Error::Postcondition(format!("winding residual {residual} exceeds {MAX_RESIDUAL}")));
    }
    Ok(Winding { count: count.to_i64().expect("integer winding"), residual, evaluations, min_log_modulus })
}

/// `z ↦ ln det(M − z)`, for use with [`winding_count`].
pub fn det_log<T: Real>(m: &CMatrix<T>) -> impl Fn(Complex<T>) -> Result<Complex<T>> + '_ {
    move |z| {
        let mut a = m.clone();
        for j in 0..a.nrows() {
            a[(j, j)] -= z;
        }
        log_det_of(&a)
    }
}

/// `ln|det (P̃ − z)⁻¹(P_δ − z)|`.
pub fn normalized_log_det<T: Real>(p_delta: &CMatrix<T>, p_tilde: &CMatrix<T>, z: Complex<T>) -> Result<T> {
    let num = det_log(p_delta)(z)?;
    let den = det_log(p_tilde)(z).map_err(|e| match e {
        Error::Singular(_) => Error::Singular(format!("P_tilde - z singular at z = {z}; deformation insufficient")),
        other => other,
    })?;
    Ok(num.re - den.re)
}

pub fn census<T: Real>(eigs: &[Complex<T>], gamma: &DomainSpec<T>) -> usize {
    eigs.iter().filter(|z| gamma.contains(**z)).count()
}

/// `δ ≤ h^{3n+1/2}/10`.
pub fn delta_guard<T: Real>(delta: T, h: T, dim: usize) -> Result<()> {
    let limit = h.powf(T::lit(3.0 * dim as f64 + 0.5)) / T::lit(10.0);
    if delta > limit {
        return Err(Error::Guard(format!("delta = {delta} exceeds h^(3n+1/2)/10 = {limit}")));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeylOptions<T: Real> {
    pub phase_box: PhaseBox<T>,
    pub volume_samples: usize,
    pub volume_seed: u64,
    pub trust_tol: T,
    /// Leading trials whose census is confirmed by winding numbers.
    pub winding_trials: usize,
    pub winding_spacing: T,
    pub max_refine: usize,
}

impl<T: Real> WeylOptions<T> {
    pub fn new(phase_box: PhaseBox<T>) -> Self {
        WeylOptions {
            phase_box,
            volume_samples: 1 << 20,
            volume_seed: 0,
            trust_tol: T::lit(TRUST_TOL),
            winding_trials: 2,
            winding_spacing: T::lit(0.01),
            max_refine: 24,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WeylTrial<T: Real> {
    pub trial: u64,
    pub n_count: usize,
    /// `n_count − weyl_pred`.
    pub diff: T,
    pub winding: Option<i64>,
    pub spectrum: TrustedSpectrum<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WeylComparison<T: Real> {
    pub h: T,
    pub delta: T,
    /// `(2πh)⁻ⁿ vol p⁻¹(Γ)`.
    pub weyl_pred: T,
    pub weyl_std: T,
    pub trials: Vec<WeylTrial<T>>,
}

impl<T: Real> WeylComparison<T> {
    pub fn median_abs_diff(&self) -> T {
        let mut d: Vec<T> = self.trials.iter().map(|t| t.diff.abs()).collect();
        d.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
        match d.len() {
            0 => T::zero(),
            n if n % 2 == 1 => d[n / 2],
            n => (d[n / 2 - 1] + d[n / 2]) / T::lit(2.0),
        }
    }
}

fn pad<T: Real>(q: &CMatrix<T>, k: usize) -> CMatrix<T> {
    let mut out = CMatrix::zeros(k, k);
    out.view_mut((0, 0), (q.nrows(), q.ncols())).copy_from(q);
    out
}

/// Shared state for eigenvalue censuses of `P_δ = P + δQ` over several
/// domains at one `h`.
///
/// Trust compares with `P` requantized at `2K` plus the same `Q` padded by
/// zeros.
pub struct WeylSetup<'a, T: Real> {
    pub h: T,
    pub spec: &'a PerturbationSpec<T>,
    pub domains: &'a [DomainSpec<T>],
    /// `(weyl_pred, std_error)` per domain.
    pub predictions: Vec<(T, T)>,
    opts: WeylOptions<T>,
    p0: CMatrix<T>,
    p2: CMatrix<T>,
    shared: Option<TrustedSpectrum<T>>,
}

/// One trial of a [`WeylSetup`].
#[derive(Debug, Clone, PartialEq)]
pub struct TrialCensus<T: Real> {
    pub trial: u64,
    pub spectrum: TrustedSpectrum<T>,
    pub counts: Vec<usize>,
    pub windings: Vec<Option<i64>>,
}

impl<'a, T: Real> WeylSetup<'a, T> {
    pub fn new(
        p: &Symbol<T>,
        spec: &'a PerturbationSpec<T>,
        h: T,
        domains: &'a [DomainSpec<T>],
        opts: &WeylOptions<T>,
    ) -> Result<Self> {
        delta_guard(spec.delta, h, p.dim())?;
        let basis = BasisSpec::new(h, spec.k)?;
        let p0 = build_weyl_matrix(p, basis)?.entries;
        let p2 = build_weyl_matrix(p, basis.doubled())?.entries;
        let scale = (T::two_pi() * h).powi(p.dim() as i32);
        let predictions = domains
            .iter()
            .map(|g| {
                let v = volume_preimage(p, g, &opts.phase_box, opts.volume_samples, opts.volume_seed)?;
                Ok((v.volume / scale, v.std_error / scale))
            })
            .collect::<Result<_>>()?;
        let shared = if spec.delta == T::zero() {
            Some(trust_spectrum(&p0, &p2, h, opts.trust_tol)?)
        } else {
            None
        };
        Ok(WeylSetup { h, spec, domains, predictions, opts: *opts, p0, p2, shared })
    }

    /// Census of trial `t`; an untrusted eigenvalue inside any domain is an
    /// error, as is a winding number that disagrees with the census.
    pub fn trial(&self, t: u64) -> Result<TrialCensus<T>> {
        self.census(t, build_perturbation(self.spec, t))
    }

    /// Like [`WeylSetup::trial`] with the Gaussian block drawn from
    /// [`trial_seed`]`(master_seed, t)`.
    pub fn trial_seeded(&self, t: u64) -> Result<TrialCensus<T>> {
        let spec = PerturbationSpec { master_seed: trial_seed(self.spec.master_seed, t), ..self.spec.clone() };
        self.census(t, build_perturbation(&spec, 0))
    }

    fn census(&self, t: u64, g: CMatrix<T>) -> Result<TrialCensus<T>> {
        let (m, spectrum) = match &self.shared {
            Some(s) => (self.p0.clone(), s.clone()),
            None => {
                let q = g * Complex::new(self.spec.delta, T::zero());
                let m = &self.p0 + &q;
                let m2 = &self.p2 + pad(&q, self.p2.nrows());
                let s = trust_spectrum(&m, &m2, self.h, self.opts.trust_tol)?;
                (m, s)
            }
        };
        let mut counts = Vec::with_capacity(self.domains.len());
        let mut windings = Vec::with_capacity(self.domains.len());
        for (d, gamma) in self.domains.iter().enumerate() {
            for (z, ok) in spectrum.eigenvalues.iter().zip(&spectrum.trusted) {
                if !ok && gamma.contains(*z) {
                    return Err(Error::Guard(format!("untrusted eigenvalue {z} inside domain {d}; raise K")));
                }
            }
            let n = census(&spectrum.eigenvalues, gamma);
            let w = if (t as usize) < self.opts.winding_trials {
                let w = winding_count(det_log(&m), gamma, self.opts.winding_spacing, self.opts.max_refine)?;
                if w.count != n as i64 {
                    return Err(Error::Postcondition(format!(
                        "trial {t}, domain {d}: winding count {} disagrees with census {n}",
                        w.count
                    )));
                }
                Some(w.count)
            } else {
                None
            };
            counts.push(n);
            windings.push(w);
        }
        Ok(TrialCensus { trial: t, spectrum, counts, windings })
    }
}

/// Eigenvalue census of `P_δ = P + δQ` in `Γ` against the Weyl term, over
/// `trials` independent draws of `Q`.
pub fn weyl_count_compare<T: Real>(
    p: &Symbol<T>,
    spec: &PerturbationSpec<T>,
    h: T,
    gamma: &DomainSpec<T>,
    trials: usize,
    opts: &WeylOptions<T>,
) -> Result<WeylComparison<T>> {
    let domains = std::slice::from_ref(gamma);
    let setup = WeylSetup::new(p, spec, h, domains, opts)?;
    let (weyl_pred, weyl_std) = setup.predictions[0];
    let out: Vec<WeylTrial<T>> = (0..trials as u64)
        .into_par_iter()
        .map(|t| {
            let c = setup.trial(t)?;
            Ok(WeylTrial {
                trial: t,
                n_count: c.counts[0],
                diff: T::from_usize_lossy(c.counts[0]) - weyl_pred,
                winding: c.windings[0],
                spectrum: c.spectrum,
            })
        })
        .collect::<Result<_>>()?;
    Ok(WeylComparison { h, delta: spec.delta, weyl_pred, weyl_std, trials: out })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryOptions<T: Real> {
    pub phase_box: PhaseBox<T>,
    pub quad: QuadGrid,
    pub kappa: T,
    /// Fixed slack constant; `None` calibrates it from this run.
    pub c_up: Option<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryBounds<T: Real> {
    pub points: Vec<Complex<T>>,
    /// `I(z_k)`.
    pub potential: Vec<T>,
    /// `2πh·ln|det P_δ(z_k)|` per trial and point.
    pub scaled_log_det: Vec<Vec<T>>,
    pub c_up: T,
    /// Largest `(2πh·ln|det| − I)/(h^κ ln(1/h))`.
    pub max_upper_excess: T,
    pub upper_violations: usize,
    pub lower_violations: usize,
    pub pairs: usize,
    pub lower_violation_freq: f64,
    /// `e^{−ε/(2πh)}`.
    pub lower_bound_prob: f64,
    pub resolvable: bool,
    pub consistent: bool,
}

/// Boundary samples of `ln|det (P̃ − z)⁻¹(P_δ − z)|` against `(2πh)⁻¹I(z)`.
#[allow(clippy::too_many_arguments)]
pub fn boundary_logdet_bounds<T: Real>(
    p: &Symbol<T>,
    p_tilde: &Symbol<T>,
    spec: &PerturbationSpec<T>,
    h: T,
    gamma: &DomainSpec<T>,
    epsilon: T,
    trials: usize,
    opts: &BoundaryOptions<T>,
) -> Result<BoundaryBounds<T>> {
    if p.dim() != 1 {
        return Err(Error::Unsupported("boundary bounds are implemented for n = 1".into()));
    }
    if !(epsilon > T::zero()) || trials == 0 {
        return invalid("epsilon must be positive and trials nonzero");
    }
    let basis = BasisSpec::new(h, spec.k)?;
    if let Some(def) = p_tilde.deformation() {
        let support = T::lit(2.0) * def.radius;
        if support > basis_radius(basis) || support > opts.phase_box.half_width {
            return invalid("deformation support must fit inside the basis disc and the phase box");
        }
    }
    let p0 = build_weyl_matrix(p, basis)?.entries;
    let pt = build_weyl_matrix(p_tilde, basis)?.entries;
    let spacing = epsilon.sqrt().min(gamma.perimeter() / T::lit(16.0));
    let points = gamma.boundary_points(spacing);
    let potential: Vec<T> = points
        .iter()
        .map(|&z| integral_i(p_tilde, p, z, &opts.phase_box, opts.quad))
        .collect::<Result<_>>()?;
    let two_pi_h = T::two_pi() * h;
    let scaled_log_det: Vec<Vec<T>> = (0..trials as u64)
        .into_par_iter()
        .map(|t| {
            let q = build_perturbation(spec, t) * Complex::new(spec.delta, T::zero());
            let m = &p0 + &q;
            points.iter().map(|&z| Ok(normalized_log_det(&m, &pt, z)? * two_pi_h)).collect::<Result<Vec<T>>>()
        })
        .collect::<Result<_>>()?;
    let slack = h.powf(opts.kappa) * (T::one() / h).ln();
    let mut max_upper_excess = -T::inf();
    let mut lower_violations = 0;
    for row in &scaled_log_det {
        for (l, i) in row.iter().zip(&potential) {
            max_upper_excess = max_upper_excess.max((*l - *i) / slack);
            if *l < *i - epsilon {
                lower_violations += 1;
            }
        }
    }
    let c_up = opts.c_up.unwrap_or_else(|| max_upper_excess.max(T::zero()));
    let upper_violations = scaled_log_det
        .iter()
        .flat_map(|row| row.iter().zip(&potential))
        .filter(|(l, i)| (**l - **i) / slack > c_up)
        .count();
    let pairs = trials * points.len();
    let lower_violation_freq = lower_violations as f64 / pairs as f64;
    let lower_bound_prob = (-(epsilon / two_pi_h).as_f64()).exp();
    let resolvable = lower_bound_prob >= 10.0 / trials as f64;
    let consistent = !resolvable || lower_violation_freq <= lower_bound_prob + 3.0 * binomial_sigma(lower_bound_prob, pairs);
    Ok(BoundaryBounds {
        points,
        potential,
        scaled_log_det,
        c_up,
        max_upper_excess,
        upper_violations,
        lower_violations,
        pairs,
        lower_violation_freq,
        lower_bound_prob,
        resolvable,
        consistent,
    })
}
