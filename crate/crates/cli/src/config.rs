//! Experiment configuration: strict JSON, validated on load.

use std::path::{Path, PathBuf};

use eit_core::geometry::{Layout, PartitionSpec};
use eit_core::inference::{PriorSpec, Proposal, SamplerPlan, StepRule};
use eit_core::ProblemSpec;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::CliError;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub domain: DomainConfig,
    pub mesh: MeshConfig,
    pub electrodes: ElectrodeConfig,
    pub model: ModelConfig,
    #[serde(default)]
    pub prior: PriorConfig,
    #[serde(default)]
    pub mcmc: McmcConfig,
    #[serde(default)]
    pub experiment: ExperimentSection,
    pub seed: u64,
    #[serde(default = "default_out_dir")]
    pub out_dir: PathBuf,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainConfig {
    pub r0: f64,
    #[serde(rename = "D")]
    pub d: usize,
    pub layout: Layout,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeshConfig {
    pub target_h: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ElectrodeConfig {
    #[serde(rename = "M")]
    pub m: usize,
    pub coverage: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub gamma_min: f64,
    pub gamma_max: f64,
    pub theta0: Vec<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PriorKind {
    Uniform,
    TruncatedGaussian,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PriorParams {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mean: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sd: Option<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PriorConfig {
    pub kind: PriorKind,
    #[serde(default)]
    pub params: PriorParams,
}

impl Default for PriorConfig {
    fn default() -> Self {
        Self { kind: PriorKind::Uniform, params: PriorParams::default() }
    }
}

/// A scalar or per-coordinate random-walk scale, or `"laplace"` for a
/// proposal shaped by the inverse information at the maximum likelihood fit.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum StepConfig {
    Scalar(f64),
    Vector(Vec<f64>),
    Named(String),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct McmcConfig {
    pub iters: usize,
    pub burnin: usize,
    pub thin: usize,
    pub step: StepConfig,
    pub adapt: bool,
}

impl Default for McmcConfig {
    fn default() -> Self {
        Self { iters: 50_000, burnin: 10_000, thin: 5, step: StepConfig::Named("laplace".into()), adapt: true }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSection {
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(rename = "N_grid")]
    pub n_grid: Vec<usize>,
    pub replicates: usize,
    pub alpha: f64,
}

impl Default for ExperimentSection {
    fn default() -> Self {
        Self { n: 2000, n_grid: vec![250, 1000, 4000], replicates: 50, alpha: 0.1 }
    }
}

fn default_out_dir() -> PathBuf {
    PathBuf::from("out")
}

fn invalid(message: impl Into<String>) -> CliError {
    CliError::Config { message: message.into() }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| invalid(format!("cannot read config {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn from_json(text: &str) -> Result<Self, CliError> {
        let config: Self = serde_json::from_str(text).map_err(|e| invalid(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    /// SHA-256 of the normalised (defaults filled in) JSON form.
    pub fn hash(&self) -> String {
        let digest = Sha256::digest(serde_json::to_string(self).expect("config serialises").as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let DomainConfig { r0, d, layout } = &self.domain;
        if !(*r0 > 0.0 && *r0 < 1.0) {
            return Err(invalid(format!("domain.r0 must lie in (0, 1), got {r0}")));
        }
        if *d == 0 {
            return Err(invalid("domain.D must be >= 1"));
        }
        if let Layout::AnnularSectors { rings, sectors } = layout {
            if rings * sectors != *d {
                return Err(invalid(format!("domain.layout has {rings} x {sectors} regions but D = {d}")));
            }
        }
        if !(self.mesh.target_h > 0.0) || !self.mesh.target_h.is_finite() {
            return Err(invalid(format!("mesh.target_h must be > 0, got {}", self.mesh.target_h)));
        }
        if self.electrodes.m == 0 {
            return Err(invalid("electrodes.M must be >= 1"));
        }
        let c = self.electrodes.coverage;
        if !(c > 0.0 && c <= 1.0) {
            return Err(invalid(format!("electrodes.coverage must lie in (0, 1], got {c}")));
        }
        let ModelConfig { gamma_min, gamma_max, theta0 } = &self.model;
        if !(*gamma_min > 0.0) {
            return Err(invalid("gamma_min must be > 0"));
        }
        if !(gamma_max >= gamma_min) || !gamma_max.is_finite() {
            return Err(invalid(format!("gamma_max must be finite and >= gamma_min, got {gamma_max}")));
        }
        if theta0.len() != *d {
            return Err(invalid(format!("model.theta0 has {} components but D = {d}", theta0.len())));
        }
        for (k, t) in theta0.iter().enumerate() {
            if t < gamma_min {
                return Err(invalid(format!("model.theta0[{k}] = {t} is below gamma_min = {gamma_min}")));
            }
            if t > gamma_max {
                return Err(invalid(format!("model.theta0[{k}] = {t} exceeds gamma_max = {gamma_max}")));
            }
        }
        self.prior_spec()?
            .validate(&eit_core::ParameterBox::new(*d, *gamma_min, *gamma_max).map_err(|e| invalid(e.to_string()))?)
            .map_err(|e| invalid(format!("prior: {e}")))?;
        let m = &self.mcmc;
        if m.iters == 0 || m.thin == 0 {
            return Err(invalid("mcmc.iters and mcmc.thin must be >= 1"));
        }
        if m.burnin >= m.iters {
            return Err(invalid(format!("mcmc.burnin ({}) must be below mcmc.iters ({})", m.burnin, m.iters)));
        }
        self.proposal()?;
        let e = &self.experiment;
        if e.n == 0 || e.replicates == 0 {
            return Err(invalid("experiment.N and experiment.replicates must be >= 1"));
        }
        if e.n_grid.len() < 3 || e.n_grid[0] == 0 || e.n_grid.windows(2).any(|w| w[0] >= w[1]) {
            return Err(invalid("experiment.N_grid must be strictly increasing with at least 3 positive entries"));
        }
        if !(e.alpha > 0.0 && e.alpha < 1.0) {
            return Err(invalid(format!("experiment.alpha must lie in (0, 1), got {}", e.alpha)));
        }
        Ok(())
    }

    pub fn problem_spec(&self) -> ProblemSpec {
        ProblemSpec {
            partition: PartitionSpec { regions: self.domain.d, r0: self.domain.r0, layout: self.domain.layout },
            target_h: self.mesh.target_h,
            electrodes: self.electrodes.m,
            coverage: self.electrodes.coverage,
            gamma_min: self.model.gamma_min,
            gamma_max: self.model.gamma_max,
        }
    }

    pub fn prior_spec(&self) -> Result<PriorSpec, CliError> {
        match self.prior.kind {
            PriorKind::Uniform => {
                if self.prior.params != PriorParams::default() {
                    return Err(invalid("prior.params must be empty for a uniform prior"));
                }
                Ok(PriorSpec::Uniform)
            }
            PriorKind::TruncatedGaussian => {
                let (Some(mean), Some(sd)) = (&self.prior.params.mean, &self.prior.params.sd) else {
                    return Err(invalid("truncated-gaussian prior needs prior.params.mean and prior.params.sd"));
                };
                Ok(PriorSpec::TruncatedGaussian { mean: mean.clone(), sd: sd.clone() })
            }
        }
    }

    fn proposal(&self) -> Result<StepRule, CliError> {
        match &self.mcmc.step {
            StepConfig::Scalar(s) if *s > 0.0 && s.is_finite() => Ok(StepRule::Fixed(Proposal::Scalar(*s))),
            StepConfig::Vector(v) if v.len() == self.domain.d && v.iter().all(|s| *s > 0.0 && s.is_finite()) => {
                Ok(StepRule::Fixed(Proposal::Diagonal(v.clone())))
            }
            StepConfig::Named(name) if name == "laplace" => Ok(StepRule::Laplace { factor: 1.0 }),
            other => Err(invalid(format!(
                "mcmc.step must be a positive number, a positive vector of length D, or \"laplace\"; got {other:?}"
            ))),
        }
    }

    pub fn sampler_plan(&self) -> Result<SamplerPlan, CliError> {
        Ok(SamplerPlan {
            iters: self.mcmc.iters,
            burnin: self.mcmc.burnin,
            thin: self.mcmc.thin,
            step: self.proposal()?,
            adapt: self.mcmc.adapt,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) const MINIMAL: &str = r#"{
        "domain": {"r0": 0.75, "D": 2, "layout": {"kind": "equal-sectors"}},
        "mesh": {"target_h": 0.1},
        "electrodes": {"M": 16, "coverage": 1.0},
        "model": {"gamma_min": 0.5, "gamma_max": 4.0, "theta0": [2.0, 1.5]},
        "seed": 7
    }"#;

    fn with(field: &str, value: &str) -> String {
        let mut v: serde_json::Value = serde_json::from_str(MINIMAL).unwrap();
        let mut target = &mut v;
        let parts: Vec<&str> = field.split('.').collect();
        for p in &parts[..parts.len() - 1] {
            target = target.get_mut(*p).unwrap();
        }
        target[parts[parts.len() - 1]] = serde_json::from_str(value).unwrap();
        v.to_string()
    }

    fn message(text: &str) -> String {
        match ExperimentConfig::from_json(text) {
            Err(CliError::Config { message }) => message,
            other => panic!("expected a config error, got {other:?}"),
        }
    }

    #[test]
    fn minimal_config_round_trips() {
        let c = ExperimentConfig::from_json(MINIMAL).unwrap();
        let text = serde_json::to_string_pretty(&c).unwrap();
        let again = ExperimentConfig::from_json(&text).unwrap();
        assert_eq!(c, again);
        assert_eq!(c.hash(), again.hash());
        assert_eq!(text, serde_json::to_string_pretty(&again).unwrap());
    }

    #[test]
    fn gamma_min_must_be_positive() {
        assert_eq!(message(&with("model.gamma_min", "0")), "gamma_min must be > 0");
    }

    #[test]
    fn theta0_component_above_gamma_max_is_named() {
        let m = message(&with("model.theta0", "[2.0, 4.5]"));
        assert!(m.contains("theta0[1]") && m.contains("gamma_max"), "{m}");
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let m = message(&with("mesh.target_hh", "0.1"));
        assert!(m.contains("target_hh"), "{m}");
        assert!(message(&with("extra", "1")).contains("extra"));
    }

    #[test]
    fn other_constraints() {
        assert!(message(&with("experiment", r#"{"N": 10, "N_grid": [1, 2, 3], "replicates": 1, "alpha": 1.0}"#))
            .contains("alpha"));
        assert!(message(&with("domain.layout", r#"{"kind": "annular-sectors", "rings": 2, "sectors": 2}"#)).contains("D = 2"));
        assert!(message(&with("mcmc", r#"{"iters": 10, "burnin": 10, "thin": 1, "step": 0.1, "adapt": false}"#))
            .contains("burnin"));
        assert!(message(&with("mcmc", r#"{"iters": 10, "burnin": 1, "thin": 1, "step": "big", "adapt": false}"#))
            .contains("step"));
        assert!(message(&with("prior", r#"{"kind": "truncated-gaussian", "params": {"mean": [1, 1]}}"#)).contains("sd"));
    }

    #[test]
    fn truncated_gaussian_prior() {
        let c = ExperimentConfig::from_json(&with(
            "prior",
            r#"{"kind": "truncated-gaussian", "params": {"mean": [2, 2], "sd": [1, 1]}}"#,
        ))
        .unwrap();
        assert_eq!(c.prior_spec().unwrap(), PriorSpec::TruncatedGaussian { mean: vec![2.0, 2.0], sd: vec![1.0, 1.0] });
    }
}
