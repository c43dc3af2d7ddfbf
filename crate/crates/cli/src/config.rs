//! Experiment configuration read from a TOML file. Every section has complete
//! defaults, unknown keys are rejected, and every numeric parameter is checked
//! before any computation or file write.

use std::path::Path;

use fracrep_core::process_models::{CovarianceModel, Variant};
use fracrep_core::replication::ReplicationConfig;
use fracrep_core::utility_max::{Example42, UtilityFunction};
use fracrep_core::{martingale_tools::claim_library, ThetaProcess};
use serde::{Deserialize, Serialize};

use crate::error::{as_config, CliError, CliResult};

/// Gaussian process model by name and parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelSpec {
    Fbm { h: f64 },
    SubFbm { h: f64 },
    BiFbm { a: f64, k: f64 },
    Fou { h: f64, a: f64, y0: f64, sigma: f64 },
    Mixed { h: f64 },
    LinearCombo { terms: Vec<(f64, f64)> },
}

impl ModelSpec {
    pub fn model(&self, horizon: f64) -> CliResult<CovarianceModel> {
        let v = match self {
            ModelSpec::Fbm { h } => Variant::FBm { h: *h },
            ModelSpec::SubFbm { h } => Variant::SubFBm { h: *h },
            ModelSpec::BiFbm { a, k } => Variant::BiFBm { a: *a, k: *k },
            ModelSpec::Fou { h, a, y0, sigma } => Variant::FOu {
                h: *h,
                a: *a,
                y0: *y0,
                sigma: *sigma,
            },
            ModelSpec::Mixed { h } => Variant::Mixed { h: *h },
            ModelSpec::LinearCombo { terms } => Variant::LinearCombo(terms.clone()),
        };
        CovarianceModel::new(v, horizon).map_err(as_config)
    }
}

/// Sampler choice; `auto` uses circulant embedding for fBm on uniform grids.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MethodSpec {
    Auto,
    Cholesky,
    Circulant,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulateConfig {
    pub model: ModelSpec,
    pub horizon: f64,
    pub steps: usize,
    pub paths: usize,
    pub method: MethodSpec,
}

impl Default for SimulateConfig {
    fn default() -> Self {
        Self {
            model: ModelSpec::Fbm { h: 0.7 },
            horizon: 1.0,
            steps: 64,
            paths: 100,
            method: MethodSpec::Auto,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IntegrateConfig {
    /// Hurst index of the fBm integrator paths.
    pub h: f64,
    pub steps: usize,
    pub paths: usize,
    pub alpha: f64,
    /// Polynomial integrand `Σ c_k x^k`.
    pub integrand: Vec<f64>,
}

impl Default for IntegrateConfig {
    fn default() -> Self {
        Self {
            h: 0.7,
            steps: 64,
            paths: 20,
            alpha: 0.4,
            integrand: vec![0.3, 1.0, -0.8],
        }
    }
}

/// `target = "self"` replicates `Z = G`; any other value names a library claim.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReplicateConfig {
    pub target: String,
    pub horizon: f64,
    pub paths: usize,
    pub replication: ReplicationConfig,
}

impl Default for ReplicateConfig {
    fn default() -> Self {
        Self {
            target: "self".into(),
            horizon: 1.0,
            paths: 20,
            replication: ReplicationConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum UtilitySpec {
    Exponential { beta: f64 },
    Power { gamma: f64 },
    Log,
}

impl UtilitySpec {
    pub fn utility(&self) -> CliResult<UtilityFunction> {
        match self {
            UtilitySpec::Exponential { beta } => UtilityFunction::exponential(*beta),
            UtilitySpec::Power { gamma } => UtilityFunction::power(*gamma),
            UtilitySpec::Log => Ok(UtilityFunction::Log),
        }
        .map_err(as_config)
    }
}

/// Integrand of the density: a constant or the fractional Black–Scholes market.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DensitySpec {
    Constant {
        theta: f64,
    },
    FractionalMarket {
        h: f64,
        mu: f64,
        r_rate: f64,
        sigma: f64,
    },
}

impl DensitySpec {
    pub fn theta(&self) -> CliResult<ThetaProcess> {
        match self {
            DensitySpec::Constant { theta } if theta.is_finite() => {
                Ok(ThetaProcess::constant(*theta))
            }
            DensitySpec::Constant { theta } => Err(CliError::Config(format!(
                "theta must be finite, got {theta}"
            ))),
            DensitySpec::FractionalMarket {
                h,
                mu,
                r_rate,
                sigma,
            } => Example42::new(*h, *mu, *r_rate, *sigma)
                .and_then(|m| m.theta())
                .map_err(as_config),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct UtilityConfig {
    pub utility: UtilitySpec,
    pub density: DensitySpec,
    pub budget: f64,
    pub restricted: bool,
    pub horizon: f64,
    pub steps: usize,
    pub paths: usize,
}

impl Default for UtilityConfig {
    fn default() -> Self {
        Self {
            utility: UtilitySpec::Exponential { beta: 1.0 },
            density: DensitySpec::Constant { theta: 1.0 },
            budget: 0.0,
            restricted: false,
            horizon: 1.0,
            steps: 64,
            paths: 10_000,
        }
    }
}

/// Whole experiment file; each subcommand reads its own section.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub simulate: SimulateConfig,
    pub integrate: IntegrateConfig,
    pub replicate: ReplicateConfig,
    pub utility: UtilityConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            seed: 42,
            simulate: SimulateConfig::default(),
            integrate: IntegrateConfig::default(),
            replicate: ReplicateConfig::default(),
            utility: UtilityConfig::default(),
        }
    }
}

fn positive(name: &str, v: f64) -> CliResult<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(CliError::Config(format!(
            "{name} must be positive and finite, got {v}"
        )))
    }
}

fn at_least(name: &str, v: usize, min: usize) -> CliResult<()> {
    if v >= min {
        Ok(())
    } else {
        Err(CliError::Config(format!(
            "{name} must be at least {min}, got {v}"
        )))
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> CliResult<Self> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::io(path.display().to_string(), e))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> CliResult<String> {
        toml::to_string(self).map_err(|e| CliError::Serialize(e.to_string()))
    }

    pub fn validate_simulate(&self) -> CliResult<()> {
        let c = &self.simulate;
        positive("simulate.horizon", c.horizon)?;
        at_least("simulate.steps", c.steps, 1)?;
        at_least("simulate.paths", c.paths, 1)?;
        let m = c.model.model(c.horizon)?;
        if c.method == MethodSpec::Circulant && m.is_fbm().is_none() {
            return Err(CliError::Config(
                "circulant embedding is only available for fbm".into(),
            ));
        }
        Ok(())
    }

    pub fn validate_integrate(&self) -> CliResult<()> {
        let c = &self.integrate;
        if !(c.h > 0.0 && c.h < 1.0) {
            return Err(CliError::Config(format!(
                "integrate.h must lie in (0, 1), got {}",
                c.h
            )));
        }
        at_least("integrate.steps", c.steps, 1)?;
        at_least("integrate.paths", c.paths, 1)?;
        fracrep_core::FracOrder::new(c.alpha)
            .and_then(|o| o.check_pairing(c.h))
            .map_err(as_config)?;
        if c.integrand.is_empty() || c.integrand.iter().any(|x| !x.is_finite()) {
            return Err(CliError::Config(
                "integrate.integrand needs finite coefficients".into(),
            ));
        }
        Ok(())
    }

    pub fn validate_replicate(&self) -> CliResult<()> {
        let c = &self.replicate;
        positive("replicate.horizon", c.horizon)?;
        at_least("replicate.paths", c.paths, 1)?;
        c.replication.validate().map_err(as_config)?;
        if c.target != "self" {
            let claim = claim_library(&c.target, c.horizon).map_err(as_config)?;
            if let Some(h) = claim.joint_h {
                if (h - c.replication.h).abs() > 1e-12 {
                    return Err(CliError::Config(format!(
                        "claim {} needs H = {h}, the replication uses H = {}",
                        c.target, c.replication.h
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn validate_utility(&self) -> CliResult<()> {
        let c = &self.utility;
        c.utility.utility()?;
        c.density.theta()?;
        positive("utility.horizon", c.horizon)?;
        at_least("utility.steps", c.steps, 1)?;
        at_least("utility.paths", c.paths, 2)?;
        if !c.budget.is_finite() {
            return Err(CliError::Config(format!(
                "utility.budget must be finite, got {}",
                c.budget
            )));
        }
        if c.restricted && c.budget <= 0.0 {
            return Err(CliError::Config(
                "restricted problems need a positive budget".into(),
            ));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip() {
        let c = ExperimentConfig::default();
        let text = c.to_toml().unwrap();
        assert_eq!(ExperimentConfig::from_toml(&text).unwrap(), c);
    }

    #[test]
    fn partial_files_fill_defaults() {
        let c = ExperimentConfig::from_toml("seed = 7\n[simulate]\nsteps = 32\n").unwrap();
        assert_eq!(c.seed, 7);
        assert_eq!(c.simulate.steps, 32);
        assert_eq!(c.simulate.paths, SimulateConfig::default().paths);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(matches!(
            ExperimentConfig::from_toml("sed = 7\n"),
            Err(CliError::Config(_))
        ));
        assert!(ExperimentConfig::from_toml("[replicate.replication]\nthetta = 0.5\n").is_err());
    }

    #[test]
    fn tagged_sections_parse() {
        let text = "[simulate.model]\nkind = \"fou\"\nh = 0.7\na = -1.0\ny0 = 0.5\nsigma = 0.8\n\
                    [utility.utility]\nkind = \"power\"\ngamma = 0.5\n\
                    [utility.density]\nkind = \"fractional_market\"\nh = 0.75\nmu = 0.08\nr_rate = 0.03\nsigma = 0.2\n";
        let c = ExperimentConfig::from_toml(text).unwrap();
        c.validate_simulate().unwrap();
        c.validate_utility().unwrap();
        let back = ExperimentConfig::from_toml(&c.to_toml().unwrap()).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn replication_window_is_named() {
        let c = ExperimentConfig::from_toml("[replicate.replication]\nalpha = 0.2\n").unwrap();
        match c.validate_replicate() {
            Err(CliError::Config(m)) => {
                assert!(m.contains("1 - H < alpha < min(r + 1 - H, 1/2)"), "{m}")
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn mismatched_claim_index_is_rejected() {
        let c =
            ExperimentConfig::from_toml("[replicate]\ntarget = \"fbm_terminal(0.8)\"\n").unwrap();
        assert!(matches!(c.validate_replicate(), Err(CliError::Config(_))));
        let ok = ExperimentConfig::from_toml("[replicate]\ntarget = \"terminal_wiener_squared\"\n")
            .unwrap();
        ok.validate_replicate().unwrap();
    }

    #[test]
    fn bad_numbers_are_config_errors() {
        let c = ExperimentConfig::from_toml("[simulate]\nsteps = 0\n").unwrap();
        assert_eq!(c.validate_simulate().unwrap_err().exit_code(), 2);
        let c = ExperimentConfig::from_toml("[utility.utility]\nkind = \"power\"\ngamma = 1.5\n")
            .unwrap();
        assert!(c.validate_utility().is_err());
        let c = ExperimentConfig::from_toml("[integrate]\nalpha = 0.2\n").unwrap();
        assert!(c.validate_integrate().is_err());
    }
}
