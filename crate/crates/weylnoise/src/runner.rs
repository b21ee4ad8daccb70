//! Dispatch of a validated configuration to the numerical core.
//!
//! Per-trial failures are recorded as violations and the run continues;
//! failures of shared setup abort the run. Parallel work is collected in
//! index order, so records do not depend on the thread schedule.

use std::time::Instant;

use rayon::prelude::*;
use weylnoise_core::det_stats::{empirical_logdet_cdf, logdet_density, rho_tail, sum_x, vector_norm_density, x_residual_slope, UniformGrid};
use weylnoise_core::grushin::{factorization_residual, trace_formula_check, Factorization};
use weylnoise_core::phase_space::{deform_symbol, estimate_kappa, volume_profile, QuadGrid, ScanSpec, Symbol};
use weylnoise_core::quadrature::{integrate_to_infinity, QuadTol};
use weylnoise_core::quantize::{rotated_oscillator_levels, singular_triples_of, BasisSpec, TrustedSpectrum};
use weylnoise_core::random_pert::{build_perturbation, hs_norm_sq, hs_tail_bounds, trial_seed, PerturbationSpec};
use weylnoise_core::rng::{derive_stream, gaussian_matrix};
use weylnoise_core::special::{binomial_sigma, ks_one_sample};
use weylnoise_core::spectral_calc::{integral_order_check, regularized_logdet_compare, smooth_cutoff, trace_chi_compare, CalcGuards};
use weylnoise_core::zero_count::{boundary_logdet_bounds, BoundaryOptions, WeylOptions, WeylSetup};
use weylnoise_core::{CMatrix, Complex, Error as CoreError};

use crate::config::{ConfigError, Experiment, ExperimentConfig, SymbolSpec};
use crate::record::{EigenRow, MetricRow, ResultRow, RunRecord, SpectrumRecord, SummaryRow, Timing, Violation};

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("numerical guard failed in {stage}: {message}")]
    Guard { stage: String, message: String },
    #[error("numerical failure in {stage}: {source}")]
    Numerical { stage: String, source: CoreError },
    #[error("cannot build thread pool: {0}")]
    Pool(#[from] rayon::ThreadPoolBuildError),
}

fn fail(stage: impl Into<String>) -> impl FnOnce(CoreError) -> RunError {
    let stage = stage.into();
    move |e| match e {
        CoreError::Guard(message) => RunError::Guard { stage, message },
        source => RunError::Numerical { stage, source },
    }
}

fn kind(e: &CoreError) -> &'static str {
    match e {
        CoreError::InvalidArgument(_) => "invalid_argument",
        CoreError::Unsupported(_) => "unsupported",
        CoreError::NonFinite(_) => "non_finite",
        CoreError::Singular(_) => "singular",
        CoreError::NoConvergence(_) => "no_convergence",
        CoreError::Quadrature(_) => "quadrature",
        CoreError::Guard(_) => "guard",
        CoreError::Postcondition(_) => "postcondition",
    }
}

fn violation(stage: &str, h: Option<f64>, trial: Option<u64>, domain_id: Option<usize>, e: &CoreError) -> Violation {
    Violation { stage: stage.into(), h, trial, domain_id, kind: kind(e).into(), message: e.to_string() }
}

fn zkey(z: Complex<f64>) -> String {
    format!("z={}{:+}i", z.re, z.im)
}

fn geometric(a: f64, b: f64, n: usize) -> Vec<f64> {
    (0..n).map(|k| a * (b / a).powf(k as f64 / (n.max(2) - 1) as f64)).collect()
}

fn median(v: &mut [f64]) -> f64 {
    v.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
    match v.len() {
        0 => f64::NAN,
        n if n % 2 == 1 => v[n / 2],
        n => (v[n / 2 - 1] + v[n / 2]) / 2.0,
    }
}

/// Validates `config`, runs it on a pool of `threads` workers and returns the
/// record.
pub fn run_experiment(config: &ExperimentConfig, threads: usize) -> Result<RunRecord, RunError> {
    let guards = config.validate()?;
    let threads = threads.max(1);
    let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build()?;
    let mut rec = RunRecord::new(config.clone(), threads, guards);
    let start = Instant::now();
    pool.install(|| match config.experiment {
        Experiment::Spectrum | Experiment::Perturb | Experiment::WeylSweep => counting(&mut rec),
        Experiment::DetTails => det_tails(&mut rec),
        Experiment::HsTails => hs_tails(&mut rec),
        Experiment::GrushinCheck => grushin_check(&mut rec),
        Experiment::CalcCheck => calc_check(&mut rec),
        Experiment::Kappa => kappa(&mut rec),
    })?;
    rec.timings.push(Timing { stage: "total".into(), seconds: start.elapsed().as_secs_f64() });
    Ok(rec)
}

fn symbol(cfg: &ExperimentConfig) -> Symbol<f64> {
    cfg.symbol.build().expect("validated symbol")
}

fn eigen_rows(s: &TrustedSpectrum<f64>) -> Vec<EigenRow> {
    s.eigenvalues.iter().zip(&s.trusted).map(|(z, &t)| EigenRow { re: z.re, im: z.im, trusted: t }).collect()
}

/// Largest relative error of the lowest trusted eigenvalues against the
/// exact levels of the rotated oscillator.
fn level_error(s: &TrustedSpectrum<f64>, h: f64, count: usize) -> Option<f64> {
    let mut ev: Vec<Complex<f64>> = s.trusted_values().collect();
    if ev.len() < count {
        return None;
    }
    ev.sort_by(|a, b| a.norm().partial_cmp(&b.norm()).expect("finite"));
    let exact = rotated_oscillator_levels::<f64>(h, count);
    Some(ev.iter().zip(&exact).map(|(z, e)| (z - e).norm() / e.norm()).fold(0.0, f64::max))
}

/// Eigenvalue censuses for `spectrum`, `perturb` and `weyl-sweep`.
fn counting(rec: &mut RunRecord) -> Result<(), RunError> {
    let cfg = rec.config.clone();
    let prm = &cfg.params;
    let p = symbol(&cfg);
    let domains = cfg.domain_specs().expect("validated domains");
    let mut opts = WeylOptions::new(cfg.phase_box());
    opts.volume_samples = prm.volume_samples;
    opts.volume_seed = cfg.master_seed;
    opts.trust_tol = prm.trust_tol;
    opts.winding_trials = prm.winding_trials;
    opts.winding_spacing = prm.winding_spacing;
    let perturbed = cfg.experiment != Experiment::Spectrum;
    for (hi, &h) in cfg.h_list.iter().enumerate() {
        let clock = Instant::now();
        let k = cfg.k_at(h);
        let s = prm.profile_exponent;
        let base_spec = PerturbationSpec::with_default_profile(k, h, s, 0.0, cfg.master_seed).map_err(fail("profile"))?;
        let base = WeylSetup::new(&p, &base_spec, h, &domains, &opts).map_err(fail(format!("unperturbed setup at h = {h}")))?;
        let mut unperturbed = vec![0; domains.len()];
        match base.trial(0) {
            Ok(c) => {
                let trusted = c.spectrum.trusted.iter().filter(|&&t| t).count();
                rec.metrics.push(MetricRow::new("trusted_count", Some(h), "unperturbed", trusted as f64, None));
                if cfg.symbol == SymbolSpec::RotatedOscillator {
                    if let Some(e) = level_error(&c.spectrum, h, prm.reference_levels) {
                        rec.metrics.push(MetricRow::new("level_max_rel_error", Some(h), format!("levels={}", prm.reference_levels), e, None));
                    }
                }
                for (d, &n) in c.counts.iter().enumerate() {
                    unperturbed[d] = n;
                    let (pred, _) = base.predictions[d];
                    rec.metrics.push(MetricRow::new("unperturbed_count", Some(h), format!("domain={d}"), n as f64, Some(pred)));
                    if !perturbed {
                        rec.results.push(ResultRow {
                            h,
                            delta: 0.0,
                            domain_id: d,
                            n_count: n,
                            weyl_pred: pred,
                            diff: n as f64 - pred,
                            seed: cfg.master_seed,
                        });
                    }
                }
                if !perturbed {
                    rec.spectra.push(SpectrumRecord { name: format!("h{hi}"), h, trial: 0, rows: eigen_rows(&c.spectrum) });
                }
            }
            // The unperturbed census is shared by every trial at this h.
            Err(CoreError::Guard(message)) => return Err(RunError::Guard { stage: format!("unperturbed census at h = {h}"), message }),
            Err(e) => rec.violations.push(violation("unperturbed census", Some(h), Some(0), None, &e)),
        }
        if !perturbed {
            rec.timings.push(Timing { stage: format!("h={h}"), seconds: clock.elapsed().as_secs_f64() });
            continue;
        }
        let delta = cfg.delta_rule.at(h);
        let spec = PerturbationSpec::with_default_profile(k, h, s, delta, cfg.master_seed).map_err(fail("profile"))?;
        let setup = WeylSetup::new(&p, &spec, h, &domains, &opts).map_err(fail(format!("perturbed setup at h = {h}")))?;
        let outcomes: Vec<_> = (0..cfg.trials as u64).into_par_iter().map(|t| setup.trial_seeded(t)).collect();
        let mut counts: Vec<Vec<f64>> = vec![Vec::new(); domains.len()];
        for (t, out) in outcomes.into_iter().enumerate() {
            let t = t as u64;
            match out {
                Ok(c) => {
                    for (d, &n) in c.counts.iter().enumerate() {
                        let (pred, _) = setup.predictions[d];
                        rec.results.push(ResultRow {
                            h,
                            delta,
                            domain_id: d,
                            n_count: n,
                            weyl_pred: pred,
                            diff: n as f64 - pred,
                            seed: trial_seed(cfg.master_seed, t),
                        });
                        counts[d].push(n as f64);
                    }
                    if (t as usize) < prm.eigen_trials {
                        rec.spectra.push(SpectrumRecord { name: format!("h{hi}_t{t}"), h, trial: t, rows: eigen_rows(&c.spectrum) });
                    }
                }
                Err(e) => rec.violations.push(violation("trial", Some(h), Some(t), None, &e)),
            }
        }
        for (d, c) in counts.iter_mut().enumerate() {
            let (pred, std) = setup.predictions[d];
            let mut abs: Vec<f64> = c.iter().map(|n| (n - pred).abs()).collect();
            let median_abs_diff = median(&mut abs);
            rec.summary.push(SummaryRow {
                h,
                delta,
                domain_id: d,
                trials: c.len(),
                weyl_pred: pred,
                weyl_std: std,
                unperturbed_count: unperturbed[d],
                median_count: median(c),
                median_abs_diff,
                median_rel_diff: (pred > 0.0).then(|| median_abs_diff / pred),
            });
        }
        if let Some(def) = prm.deformation {
            boundary(rec, &p, &spec, h, delta, Complex::new(def.shift[0], def.shift[1]), def.radius);
        }
        rec.timings.push(Timing { stage: format!("h={h}"), seconds: clock.elapsed().as_secs_f64() });
    }
    Ok(())
}

/// Boundary samples of the normalized log-determinant against the potential.
fn boundary(rec: &mut RunRecord, p: &Symbol<f64>, spec: &PerturbationSpec<f64>, h: f64, delta: f64, shift: Complex<f64>, radius: f64) {
    let cfg = rec.config.clone();
    let prm = &cfg.params;
    let eps = prm.epsilon_rule.at(h, delta);
    let opts = BoundaryOptions {
        phase_box: cfg.phase_box(),
        quad: QuadGrid { n: prm.quad_points },
        kappa: prm.epsilon_rule.kappa,
        c_up: None,
    };
    let scan = ScanSpec { half_width: cfg.phase_box, ..ScanSpec::default() };
    for (d, g) in cfg.domain_specs().expect("validated domains").iter().enumerate() {
        let res = deform_symbol(p, g, shift, radius, scan)
            .and_then(|pt| boundary_logdet_bounds(p, &pt, spec, h, g, eps, cfg.trials, &opts));
        let key = format!("domain={d}");
        match res {
            Ok(b) => {
                let m = &mut rec.metrics;
                m.push(MetricRow::new("boundary.epsilon", Some(h), key.clone(), eps, None));
                m.push(MetricRow::new("boundary.points", Some(h), key.clone(), b.points.len() as f64, None));
                m.push(MetricRow::new("boundary.c_up", Some(h), key.clone(), b.c_up, None));
                m.push(MetricRow::new("boundary.upper_violations", Some(h), key.clone(), b.upper_violations as f64, None));
                m.push(MetricRow::new("boundary.lower_violation_freq", Some(h), key.clone(), b.lower_violation_freq, Some(b.lower_bound_prob)));
                m.push(MetricRow::new("boundary.consistent", Some(h), key, f64::from(u8::from(b.consistent)), None));
            }
            Err(e) => rec.violations.push(violation("boundary", Some(h), None, Some(d), &e)),
        }
    }
}

/// Law of `ln|det G|²`: exact density against Monte Carlo, tail majorant,
/// shift dominance and the `x(N)` expansion.
fn det_tails(rec: &mut RunRecord) -> Result<(), RunError> {
    let cfg = rec.config.clone();
    let prm = &cfg.params;
    let trials = cfg.trials;
    for &n in &prm.n_list {
        let clock = Instant::now();
        let key = format!("N={n}");
        let stage = format!("det-tails N = {n}");
        let density = logdet_density::<f64>(n, UniformGrid::factor_default(n)).map_err(fail(stage.clone()))?;
        let tol = QuadTol::default();
        let mean = integrate_to_infinity(|r: f64| Complex::new(r * vector_norm_density(n, r), 0.0), 0.0, tol)
            .map_err(fail(stage.clone()))?
            .re;
        rec.metrics.push(MetricRow::new("vector_norm_mean", None, key.clone(), mean, Some(n as f64)));
        rec.metrics.push(MetricRow::new("density_mass", None, key.clone(), density.total_mass, Some(1.0)));
        let sx = sum_x::<f64>(n);
        let m = prm.a_points.max(2);
        let a_grid: Vec<f64> = (0..m).map(|k| sx - 8.0 + 8.0 * k as f64 / (m - 1) as f64).collect();
        let plain = empirical_logdet_cdf::<f64>(n, trials, None, derive_stream(&[cfg.master_seed, n as u64, 0]), &a_grid)
            .map_err(fail(stage.clone()))?;
        let ks = ks_one_sample(&plain.samples, density.cdf_fn());
        rec.metrics.push(MetricRow::new("ks_distance", None, key.clone(), ks.statistic, None));
        rec.metrics.push(MetricRow::new("ks_p_value", None, key.clone(), ks.p_value, None));
        let mut excess = f64::NEG_INFINITY;
        for (&a, &e) in a_grid.iter().zip(&plain.cdf) {
            match rho_tail::<f64>(n, a) {
                Ok(t) => {
                    let sigma = binomial_sigma(t.value.clamp(0.0, 1.0), trials);
                    excess = excess.max(e - t.value - 3.0 * sigma);
                    rec.metrics.push(MetricRow::new("rho_tail", None, format!("{key},a={a}"), e, Some(t.value)));
                }
                Err(err) => rec.violations.push(violation("rho_tail", None, None, None, &err)),
            }
        }
        rec.metrics.push(MetricRow::new("rho_tail.max_excess", None, key.clone(), excess, Some(0.0)));
        // D = I against D = 0 on a grid spanning the bulk of the D = 0 law.
        let lo = plain.samples[trials / 1000];
        let hi = plain.samples[trials - 1 - trials / 1000];
        let full: Vec<f64> = (0..64).map(|k| lo + (hi - lo) * k as f64 / 63.0).collect();
        let id = CMatrix::<f64>::identity(n, n);
        let shifted = empirical_logdet_cdf::<f64>(n, trials, Some(&id), derive_stream(&[cfg.master_seed, n as u64, 1]), &full)
            .map_err(fail(stage.clone()))?;
        let base: Vec<f64> = full.iter().map(|&a| plain.at(a)).collect();
        let shift_excess = shifted
            .cdf
            .iter()
            .zip(&base)
            .map(|(&s, &b)| s - b - 3.0 * 2f64.sqrt() * binomial_sigma(b.clamp(1.0 / trials as f64, 0.5), trials))
            .fold(f64::NEG_INFINITY, f64::max);
        rec.metrics.push(MetricRow::new("shift_dominance.max_excess", None, key, shift_excess, Some(0.0)));
        rec.timings.push(Timing { stage, seconds: clock.elapsed().as_secs_f64() });
    }
    let ns: Vec<usize> = geometric(10.0, 1e4, 13).into_iter().map(|v| v.round() as usize).collect();
    let (slope, rms) = x_residual_slope::<f64>(&ns);
    rec.metrics.push(MetricRow::new("x_residual_slope", None, "N=10..10000", slope, Some(-2.0)));
    rec.metrics.push(MetricRow::new("x_residual_rms", None, "N=10..10000", rms, None));
    Ok(())
}

/// `P(Σσⱼ²|αⱼ|² ≥ a) = e^{−x} Σ_{k<m} x^k/k!` with `x = a/σ²` for `m` equal
/// variances.
fn gamma_tail(m: usize, x: f64) -> f64 {
    let mut term = 1.0;
    let mut acc = 1.0;
    for k in 1..m {
        term *= x / k as f64;
        acc += term;
    }
    (-x).exp() * acc
}

/// HS-norm tails of `Q` against the Markov bound and the exact law.
fn hs_tails(rec: &mut RunRecord) -> Result<(), RunError> {
    let cfg = rec.config.clone();
    let prm = &cfg.params;
    let h = cfg.h_list[0];
    let k = cfg.k_at(h);
    let spec = PerturbationSpec::with_default_profile(k, h, prm.profile_exponent, 1.0, cfg.master_seed).map_err(fail("profile"))?;
    let mut samples: Vec<f64> = (0..cfg.trials as u64).into_par_iter().map(|t| hs_norm_sq(&build_perturbation(&spec, t))).collect();
    samples.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
    let n = samples.len();
    let mean = spec.expected_hs_sq();
    let var = spec.variances();
    let sd = var.iter().map(|s| s * s).sum::<f64>().sqrt();
    rec.metrics.push(MetricRow::new("hs_mean", Some(h), format!("K={k}"), samples.iter().sum::<f64>() / n as f64, Some(mean)));
    let m = prm.a_points.max(2);
    let mut cheb_excess = f64::NEG_INFINITY;
    let mut max_z: f64 = 0.0;
    for j in 0..m {
        let a = (mean - 2.0 * sd).max(mean / 2.0) + 8.0 * sd * j as f64 / (m - 1) as f64;
        let emp = (n - samples.partition_point(|&s| s < a)) as f64 / n as f64;
        match hs_tail_bounds(&var, a) {
            Ok(b) => {
                cheb_excess = cheb_excess.max(emp - b.chebyshev);
                let sigma = binomial_sigma(b.exponential.clamp(1.0 / n as f64, 0.5), n);
                max_z = max_z.max((emp - b.exponential).abs() / sigma);
                rec.metrics.push(MetricRow::new("hs_tail", Some(h), format!("a={a}"), emp, Some(b.exponential)));
                rec.metrics.push(MetricRow::new("hs_chebyshev", Some(h), format!("a={a}"), b.chebyshev, None));
            }
            Err(e) => rec.violations.push(violation("hs_tail", Some(h), None, None, &e)),
        }
    }
    rec.metrics.push(MetricRow::new("hs_chebyshev.max_excess", Some(h), format!("K={k}"), cheb_excess, Some(0.0)));
    rec.metrics.push(MetricRow::new("hs_tail.max_z", Some(h), format!("K={k}"), max_z, None));
    // Single-variance case with a closed form.
    let (s, mult) = (0.5, 12usize);
    let equal = vec![s; mult];
    let mut worst: f64 = 0.0;
    for j in 1..=20 {
        let a = s * mult as f64 * (0.25 + 0.15 * j as f64);
        let exact = gamma_tail(mult, a / s);
        let b = hs_tail_bounds(&equal, a).map_err(fail("single-variance tail"))?;
        worst = worst.max((b.exponential - exact).abs());
    }
    rec.metrics.push(MetricRow::new("single_variance.max_abs_error", None, format!("m={mult}"), worst, Some(0.0)));
    Ok(())
}

fn random_block(seed: u64, labels: &[u64], n: usize, shift: f64) -> CMatrix<f64> {
    let mut a = gaussian_matrix::<f64>(seed, derive_stream(labels), n, n);
    for j in 0..n {
        a[(j, j)] += Complex::new(shift, 0.0);
    }
    a
}

/// Determinant factorization through the Grushin problem and the block
/// trace formula.
fn grushin_check(rec: &mut RunRecord) -> Result<(), RunError> {
    let cfg = rec.config.clone();
    let prm = &cfg.params;
    for &k in &prm.k_list {
        let clock = Instant::now();
        let out: Vec<Result<Factorization<f64>, CoreError>> = (0..prm.instances as u64)
            .into_par_iter()
            .map(|i| {
                let p = random_block(cfg.master_seed, &[0x6A, k as u64, i], k, 0.0);
                let lambda = singular_triples_of(&p)?.lambda;
                let m = (k / 5).max(1);
                factorization_residual(&p, (lambda[m - 1] * lambda[m]).sqrt())
            })
            .collect();
        let (mut res, mut closed) = (0f64, 0f64);
        for (i, f) in out.into_iter().enumerate() {
            match f {
                Ok(f) => {
                    res = res.max(f.residual);
                    closed = closed.max(f.block_closed_form_error);
                }
                Err(e) => rec.violations.push(violation("factorization", None, Some(i as u64), None, &e)),
            }
        }
        rec.metrics.push(MetricRow::new("factorization.max_residual", None, format!("K={k}"), res, Some(0.0)));
        rec.metrics.push(MetricRow::new("factorization.max_closed_form_error", None, format!("K={k}"), closed, Some(0.0)));
        rec.timings.push(Timing { stage: format!("K={k}"), seconds: clock.elapsed().as_secs_f64() });
    }
    let (n, n1, t0, step) = (8usize, 3usize, 0.3, 1e-2);
    for i in 0..prm.paths as u64 {
        let a0 = random_block(cfg.master_seed, &[0x7B, i, 0], n, 4.0);
        let a1 = random_block(cfg.master_seed, &[0x7B, i, 1], n, 0.0);
        let path = |t: f64| &a0 + &a1 * Complex::new(t, 0.0);
        let r = trace_formula_check(path, n1, t0, step).and_then(|r1| Ok((r1, trace_formula_check(path, n1, t0, step / 2.0)?)));
        match r {
            Ok((r1, r2)) => rec.metrics.push(MetricRow::new("trace_fd_ratio", None, format!("path={i}"), r1 / r2, Some(4.0))),
            Err(e) => rec.violations.push(violation("trace_formula", None, Some(i), None, &e)),
        }
    }
    Ok(())
}

/// Functional-calculus traces and regularized determinants against their
/// phase-space integrals.
fn calc_check(rec: &mut RunRecord) -> Result<(), RunError> {
    let cfg = rec.config.clone();
    let prm = &cfg.params;
    let p = symbol(&cfg);
    let chi = smooth_cutoff();
    let guards = CalcGuards::default();
    for &h in &cfg.h_list {
        let clock = Instant::now();
        let alpha = cfg.alpha_rule.at(h);
        let basis = BasisSpec::new(h, cfg.k_at(h)).map_err(fail("basis"))?;
        for &[re, im] in &prm.z_points {
            let z = Complex::new(re, im);
            let key = zkey(z);
            match trace_chi_compare(&p, z, basis, alpha, &chi, &guards) {
                Ok(t) => {
                    let m = &mut rec.metrics;
                    m.push(MetricRow::new("trace_chi", Some(h), key.clone(), t.trace, Some(t.integral)));
                    m.push(MetricRow::new("trace_chi.rel_error", Some(h), key.clone(), t.relative_error(), None));
                    m.push(MetricRow::new("trace_chi.n_alpha", Some(h), key.clone(), t.n_alpha as f64, None));
                    m.push(MetricRow::new("trace_chi.n_two_alpha", Some(h), key.clone(), t.n_two_alpha as f64, None));
                }
                Err(CoreError::Guard(message)) => return Err(RunError::Guard { stage: "trace_chi".into(), message }),
                Err(e) => rec.violations.push(violation("trace_chi", Some(h), None, None, &e)),
            }
            match regularized_logdet_compare(&p.minus(z), basis, alpha, &chi, &guards) {
                Ok(r) => {
                    rec.metrics.push(MetricRow::new("regularized_logdet", Some(h), key.clone(), r.lhs, Some(r.rhs)));
                    rec.metrics.push(MetricRow::new("regularized_logdet.residual", Some(h), key, r.residual, None));
                }
                Err(e) => rec.violations.push(violation("regularized_logdet", Some(h), None, None, &e)),
            }
        }
        rec.timings.push(Timing { stage: format!("h={h}"), seconds: clock.elapsed().as_secs_f64() });
    }
    let alphas = geometric(1e-4, 0.1, 10);
    for kappa in [1.0, 0.75, 0.5] {
        let key = format!("kappa={kappa}");
        match integral_order_check(kappa, &alphas) {
            Ok(o) => {
                rec.metrics.push(MetricRow::new("order.log_exponent", None, key.clone(), o.log_exponent, None));
                rec.metrics.push(MetricRow::new("order.resolvent_exponent", None, key.clone(), o.resolvent_exponent, None));
                rec.metrics.push(MetricRow::new("order.resolvent_log_slope", None, key, o.resolvent_log_slope, None));
            }
            Err(e) => rec.violations.push(violation("order", None, None, None, &e)),
        }
    }
    Ok(())
}

/// Volume exponents `κ` from `V_z(t) = vol{|p − z|² ≤ t}`.
fn kappa(rec: &mut RunRecord) -> Result<(), RunError> {
    let cfg = rec.config.clone();
    let prm = &cfg.params;
    let p = symbol(&cfg);
    let t_grid = geometric(prm.t_range[0], prm.t_range[1], prm.t_points);
    for &[re, im] in &prm.z_points {
        let z = Complex::new(re, im);
        let key = zkey(z);
        let fit = volume_profile(&p, z, &t_grid, &cfg.phase_box(), prm.volume_samples, cfg.master_seed)
            .and_then(|prof| Ok((estimate_kappa(&prof, 0..t_grid.len())?, prof)));
        match fit {
            Ok(((k, rms), prof)) => {
                rec.metrics.push(MetricRow::new("kappa", None, key.clone(), k, None));
                rec.metrics.push(MetricRow::new("kappa.rms", None, key.clone(), rms, None));
                for (t, v) in prof.samples {
                    rec.metrics.push(MetricRow::new("volume", None, format!("{key},t={t}"), v, None));
                }
            }
            Err(e) => rec.violations.push(violation("kappa", None, None, None, &e)),
        }
    }
    Ok(())
}
