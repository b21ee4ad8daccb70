//! JSON experiment configuration, schedules and load-time guards.

use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use weylnoise_core::phase_space::{volume_preimage, DomainSpec, PhaseBox, Polynomial, Shape, Symbol};
use weylnoise_core::Complex;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    Spectrum,
    Perturb,
    WeylSweep,
    DetTails,
    HsTails,
    GrushinCheck,
    CalcCheck,
    Kappa,
}

impl Experiment {
    pub const ALL: [Experiment; 8] = [
        Experiment::Spectrum,
        Experiment::Perturb,
        Experiment::WeylSweep,
        Experiment::DetTails,
        Experiment::HsTails,
        Experiment::GrushinCheck,
        Experiment::CalcCheck,
        Experiment::Kappa,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Experiment::Spectrum => "spectrum",
            Experiment::Perturb => "perturb",
            Experiment::WeylSweep => "weyl-sweep",
            Experiment::DetTails => "det-tails",
            Experiment::HsTails => "hs-tails",
            Experiment::GrushinCheck => "grushin-check",
            Experiment::CalcCheck => "calc-check",
            Experiment::Kappa => "kappa",
        }
    }

    fn counts_eigenvalues(self) -> bool {
        matches!(self, Experiment::Spectrum | Experiment::Perturb | Experiment::WeylSweep)
    }

    fn perturbs(self) -> bool {
        matches!(self, Experiment::Perturb | Experiment::WeylSweep)
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Named model symbol or explicit polynomial `Σ c·x^a ξ^b`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case", deny_unknown_fields)]
pub enum SymbolSpec {
    /// `(ξ² + ix²)/2`.
    RotatedOscillator,
    /// `(x² + ξ²)/2`.
    HarmonicOscillator,
    /// Terms `[a, b, re c, im c]`.
    Polynomial { terms: Vec<[f64; 4]> },
}

impl Default for SymbolSpec {
    fn default() -> Self {
        SymbolSpec::RotatedOscillator
    }
}

impl SymbolSpec {
    pub fn build(&self) -> Result<Symbol<f64>, String> {
        Ok(match self {
            SymbolSpec::RotatedOscillator => Symbol::rotated_oscillator(),
            SymbolSpec::HarmonicOscillator => Symbol::harmonic_oscillator(),
            SymbolSpec::Polynomial { terms } => {
                let mut t = Vec::with_capacity(terms.len());
                for &[a, b, re, im] in terms {
                    if a < 0.0 || b < 0.0 || a.fract() != 0.0 || b.fract() != 0.0 || a + b > 4.0 {
                        return Err(format!("polynomial term exponents ({a}, {b}) must be integers with total degree <= 4"));
                    }
                    t.push((a as u32, b as u32, Complex::new(re, im)));
                }
                Symbol::from_polynomial(Polynomial::from_terms_1d(&t), "polynomial")
            }
        })
    }
}

/// Basis size: fixed, or `⌈r²/(2h)⌉` so the basis covers `|ρ|² ≤ r²`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum KSpec {
    Fixed(usize),
    Radius { radius_sq: f64 },
}

impl KSpec {
    pub fn at(&self, h: f64) -> usize {
        match *self {
            KSpec::Fixed(k) => k,
            KSpec::Radius { radius_sq } => ((radius_sq / (2.0 * h)).ceil() as usize).max(8),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DeltaRule {
    Zero,
    /// `δ = coefficient·h^exponent`.
    Power {
        exponent: f64,
        #[serde(default = "one")]
        coefficient: f64,
    },
    Fixed { value: f64 },
}

impl Default for DeltaRule {
    fn default() -> Self {
        DeltaRule::Power { exponent: 5.0, coefficient: 1.0 }
    }
}

impl DeltaRule {
    pub fn at(&self, h: f64) -> f64 {
        match *self {
            DeltaRule::Zero => 0.0,
            DeltaRule::Power { exponent, coefficient } => coefficient * h.powf(exponent),
            DeltaRule::Fixed { value } => value,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum AlphaRule {
    /// `α = factor·h`.
    Linear { factor: f64 },
    /// `α = factor·h^exponent`.
    Power { factor: f64, exponent: f64 },
    Fixed { value: f64 },
}

impl Default for AlphaRule {
    fn default() -> Self {
        AlphaRule::Linear { factor: 20.0 }
    }
}

impl AlphaRule {
    pub fn at(&self, h: f64) -> f64 {
        match *self {
            AlphaRule::Linear { factor } => factor * h,
            AlphaRule::Power { factor, exponent } => factor * h.powf(exponent),
            AlphaRule::Fixed { value } => value,
        }
    }
}

/// `ε = factor·h^κ·ln(1/δ)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EpsilonRule {
    #[serde(default = "twenty")]
    pub factor: f64,
    #[serde(default = "one")]
    pub kappa: f64,
}

impl Default for EpsilonRule {
    fn default() -> Self {
        EpsilonRule { factor: 20.0, kappa: 1.0 }
    }
}

impl EpsilonRule {
    pub fn at(&self, h: f64, delta: f64) -> f64 {
        self.factor * h.powf(self.kappa) * (1.0 / delta).ln()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case", deny_unknown_fields)]
pub enum DomainConfig {
    Rect { re: [f64; 2], im: [f64; 2] },
    Disc { center: [f64; 2], radius: f64 },
    Polygon { vertices: Vec<[f64; 2]> },
}

impl DomainConfig {
    pub fn build(&self) -> Result<DomainSpec<f64>, String> {
        let shape = match self {
            DomainConfig::Rect { re, im } => Shape::Rect { re: (re[0], re[1]), im: (im[0], im[1]) },
            DomainConfig::Disc { center, radius } => Shape::Disc { center: Complex::new(center[0], center[1]), radius: *radius },
            DomainConfig::Polygon { vertices } => {
                Shape::Polygon { vertices: vertices.iter().map(|v| Complex::new(v[0], v[1])).collect() }
            }
        };
        DomainSpec::try_from_shape(shape).map_err(|e| e.to_string())
    }
}

/// Deformation `p̃ = p + shift·β(|ρ|/radius)` for boundary bounds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeformationConfig {
    pub shift: [f64; 2],
    pub radius: f64,
}

/// Experiment-specific knobs; every field has a default.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Params {
    /// Exponent `s` of the singular profiles `(1 + hj)^{−s}`.
    pub profile_exponent: f64,
    pub volume_samples: usize,
    pub trust_tol: f64,
    pub winding_trials: usize,
    pub winding_spacing: f64,
    /// Exact levels compared in `spectrum` for the rotated oscillator.
    pub reference_levels: usize,
    /// Eigenvalue files and plots are written for trials below this index.
    pub eigen_trials: usize,
    pub deformation: Option<DeformationConfig>,
    pub quad_points: usize,
    pub epsilon_rule: EpsilonRule,
    pub n_list: Vec<usize>,
    pub a_points: usize,
    pub k_list: Vec<usize>,
    pub instances: usize,
    pub paths: usize,
    pub z_points: Vec<[f64; 2]>,
    pub t_range: [f64; 2],
    pub t_points: usize,
}

impl Default for Params {
    fn default() -> Self {
        Params {
            profile_exponent: 1.0,
            volume_samples: 1 << 20,
            trust_tol: weylnoise_core::quantize::TRUST_TOL,
            winding_trials: 2,
            winding_spacing: 0.01,
            reference_levels: 20,
            eigen_trials: 1,
            deformation: None,
            quad_points: 800,
            epsilon_rule: EpsilonRule::default(),
            n_list: vec![3, 6],
            a_points: 20,
            k_list: vec![10, 30, 60],
            instances: 100,
            paths: 20,
            z_points: vec![[1.0, 1.0], [1.0, 0.0], [0.0, 0.0]],
            t_range: [1e-4, 1e-2],
            t_points: 8,
        }
    }
}

fn one() -> f64 {
    1.0
}

fn twenty() -> f64 {
    20.0
}

fn default_box() -> f64 {
    2.0
}

fn default_trials() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    pub experiment: Experiment,
    #[serde(default)]
    pub symbol: SymbolSpec,
    #[serde(default)]
    pub h_list: Vec<f64>,
    #[serde(rename = "K", default)]
    pub k: Option<KSpec>,
    #[serde(default)]
    pub delta_rule: DeltaRule,
    #[serde(default)]
    pub alpha_rule: AlphaRule,
    #[serde(default)]
    pub domains: Vec<DomainConfig>,
    #[serde(default = "default_trials")]
    pub trials: usize,
    pub master_seed: u64,
    /// Half-width `L` of the phase-space box `[−L, L]²`.
    #[serde(rename = "box", default = "default_box")]
    pub phase_box: f64,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub params: Params,
}

/// Named regime assumption with its measured margin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GuardReport {
    pub name: String,
    pub relation: String,
    pub h: Option<f64>,
    pub value: f64,
    pub limit: f64,
    /// Ratio by which the relation is satisfied (> 1) or violated (< 1);
    /// absent when unbounded.
    pub margin: Option<f64>,
    pub satisfied: bool,
    /// Violations of enforced guards reject the configuration.
    pub enforced: bool,
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("invalid JSON in {path}: {source}")]
    Parse { path: PathBuf, source: serde_json::Error },
    #[error("invalid configuration: {}", .0.join("; "))]
    Invalid(Vec<String>),
}

fn ratio(num: f64, den: f64) -> Option<f64> {
    let r = num / den;
    r.is_finite().then_some(r)
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.to_path_buf(), source })?;
        let cfg = Self::from_json(&text).map_err(|source| ConfigError::Parse { path: path.to_path_buf(), source })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn k_at(&self, h: f64) -> usize {
        self.k.unwrap_or(KSpec::Radius { radius_sq: 8.0 }).at(h)
    }

    pub fn domain_specs(&self) -> Result<Vec<DomainSpec<f64>>, String> {
        self.domains.iter().map(DomainConfig::build).collect()
    }

    pub fn phase_box(&self) -> PhaseBox<f64> {
        PhaseBox::new(1, self.phase_box)
    }

    /// Structural checks plus every enforced guard.
    pub fn validate(&self) -> Result<Vec<GuardReport>, ConfigError> {
        let mut problems = Vec::new();
        if self.schema_version != SCHEMA_VERSION {
            problems.push(format!("schema_version {} is not supported (expected {SCHEMA_VERSION})", self.schema_version));
        }
        if self.h_list.iter().any(|&h| !(h > 0.0 && h < 1.0)) {
            problems.push("h_list: every h must lie in (0, 1)".into());
        }
        let needs_h = !matches!(self.experiment, Experiment::DetTails | Experiment::Kappa);
        if needs_h && self.h_list.is_empty() {
            problems.push(format!("h_list: {} needs at least one h", self.experiment));
        }
        if self.trials == 0 {
            problems.push("trials must be positive".into());
        }
        if !(self.phase_box > 0.0) {
            problems.push("box must be positive".into());
        }
        if let Some(KSpec::Fixed(k)) = self.k {
            if k < 8 {
                problems.push("K: must be at least 8".into());
            }
        }
        if let Err(e) = self.symbol.build() {
            problems.push(format!("symbol: {e}"));
        }
        if let Err(e) = self.domain_specs() {
            problems.push(format!("domains: {e}"));
        }
        if self.params.volume_samples < 1000 {
            problems.push("params.volume_samples must be at least 1000".into());
        }
        if !problems.is_empty() {
            return Err(ConfigError::Invalid(problems));
        }
        let guards = self.guards();
        for g in guards.iter().filter(|g| g.enforced && !g.satisfied) {
            let at = g.h.map(|h| format!(" at h = {h}")).unwrap_or_default();
            problems.push(format!("{}: {} fails{at} (value {}, limit {})", g.name, g.relation, g.value, g.limit));
        }
        if problems.is_empty() {
            Ok(guards)
        } else {
            Err(ConfigError::Invalid(problems))
        }
    }

    /// Regime assumptions relevant to this experiment, per `h`.
    pub fn guards(&self) -> Vec<GuardReport> {
        let mut out = Vec::new();
        for &h in &self.h_list {
            if self.experiment.perturbs() {
                let delta = self.delta_rule.at(h);
                let limit = h.powf(3.5) / 10.0;
                out.push(GuardReport {
                    name: "delta_rule".into(),
                    relation: "delta <= h^3.5/10".into(),
                    h: Some(h),
                    value: delta,
                    limit,
                    margin: ratio(limit, delta),
                    satisfied: delta <= limit,
                    enforced: true,
                });
                if delta > 0.0 {
                    let eps = self.params.epsilon_rule.at(h, delta);
                    let floor = h.powf(self.params.epsilon_rule.kappa) * (1.0 / delta).ln();
                    out.push(GuardReport {
                        name: "epsilon.lower".into(),
                        relation: "epsilon >= 10 h^kappa ln(1/delta)".into(),
                        h: Some(h),
                        value: eps,
                        limit: 10.0 * floor,
                        margin: ratio(eps, 10.0 * floor),
                        satisfied: eps >= 10.0 * floor,
                        enforced: false,
                    });
                    out.push(GuardReport {
                        name: "epsilon.upper".into(),
                        relation: "epsilon <= 1".into(),
                        h: Some(h),
                        value: eps,
                        limit: 1.0,
                        margin: ratio(1.0, eps),
                        satisfied: eps <= 1.0,
                        enforced: false,
                    });
                }
            }
            if self.experiment == Experiment::CalcCheck {
                let alpha = self.alpha_rule.at(h);
                out.push(GuardReport {
                    name: "alpha_rule.ratio".into(),
                    relation: "alpha/h >= 10".into(),
                    h: Some(h),
                    value: alpha / h,
                    limit: 10.0,
                    margin: ratio(alpha / h, 10.0),
                    satisfied: alpha / h >= 10.0,
                    enforced: true,
                });
                out.push(GuardReport {
                    name: "alpha_rule.max".into(),
                    relation: "alpha <= 0.3".into(),
                    h: Some(h),
                    value: alpha,
                    limit: 0.3,
                    margin: ratio(0.3, alpha),
                    satisfied: alpha <= 0.3,
                    enforced: true,
                });
            }
            if self.experiment.counts_eigenvalues() && !self.domains.is_empty() {
                let k = self.k_at(h);
                let expected = self.max_expected_count(h);
                out.push(GuardReport {
                    name: "K".into(),
                    relation: "K >= 8 max expected count".into(),
                    h: Some(h),
                    value: k as f64,
                    limit: 8.0 * expected,
                    margin: ratio(k as f64, 8.0 * expected),
                    satisfied: k as f64 >= 8.0 * expected,
                    enforced: true,
                });
            }
        }
        out
    }

    /// Largest `(2πh)⁻¹ vol p⁻¹(Γ)` over the domains, from a quick Monte Carlo
    /// estimate (plus three standard errors).
    fn max_expected_count(&self, h: f64) -> f64 {
        let (Ok(p), Ok(domains)) = (self.symbol.build(), self.domain_specs()) else {
            return 0.0;
        };
        domains
            .iter()
            .filter_map(|g| volume_preimage(&p, g, &self.phase_box(), 1 << 16, self.master_seed).ok())
            .map(|v| (v.volume + 3.0 * v.std_error) / (2.0 * std::f64::consts::PI * h))
            .fold(0.0, f64::max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base(experiment: &str) -> String {
        format!(
            r#"{{"schema_version": 1, "experiment": "{experiment}", "h_list": [0.05, 0.025], "master_seed": 7,
                "domains": [{{"shape": "rect", "re": [0.3, 0.8], "im": [0.05, 0.2]}}]"#
        )
    }

    #[test]
    fn minimal_config_uses_defaults() {
        let cfg = ExperimentConfig::from_json(&(base("weyl-sweep") + "}")).unwrap();
        assert_eq!(cfg.experiment, Experiment::WeylSweep);
        assert_eq!(cfg.symbol, SymbolSpec::RotatedOscillator);
        assert_eq!(cfg.delta_rule.at(0.05), 0.05f64.powf(5.0));
        assert_eq!(cfg.k_at(0.05), 80);
        let guards = cfg.validate().unwrap();
        assert!(guards.iter().any(|g| g.name == "delta_rule" && g.satisfied));
        assert!(guards.iter().any(|g| g.name == "epsilon.upper" && !g.enforced));
    }

    #[test]
    fn cubic_delta_is_rejected_by_name() {
        let text = base("perturb") + r#", "delta_rule": {"kind": "power", "exponent": 3.0}}"#;
        let err = ExperimentConfig::from_json(&text).unwrap().validate().unwrap_err();
        assert!(err.to_string().contains("delta_rule"), "{err}");
    }

    #[test]
    fn alpha_guard_applies_to_calculus_runs() {
        let text = r#"{"schema_version": 1, "experiment": "calc-check", "h_list": [0.02], "master_seed": 1,
                       "alpha_rule": {"kind": "fixed", "value": 0.16}}"#;
        let err = ExperimentConfig::from_json(text).unwrap().validate().unwrap_err();
        assert!(err.to_string().contains("alpha_rule.ratio"));
    }

    #[test]
    fn small_basis_is_rejected() {
        let text = base("perturb") + r#", "K": 8}"#;
        let err = ExperimentConfig::from_json(&text).unwrap().validate().unwrap_err();
        assert!(err.to_string().contains("K:"), "{err}");
    }

    #[test]
    fn unknown_fields_and_versions_are_rejected() {
        assert!(ExperimentConfig::from_json(&(base("perturb") + r#", "bogus": 1}"#)).is_err());
        let text = base("perturb").replace("\"schema_version\": 1", "\"schema_version\": 9") + "}";
        assert!(ExperimentConfig::from_json(&text).unwrap().validate().is_err());
    }

    #[test]
    fn config_round_trips_through_json() {
        let cfg = ExperimentConfig::from_json(&(base("perturb") + r#", "K": {"radius_sq": 6.0}}"#)).unwrap();
        let again = ExperimentConfig::from_json(&serde_json::to_string(&cfg).unwrap()).unwrap();
        assert_eq!(cfg, again);
    }
}
