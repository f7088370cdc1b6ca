//! Experiment configuration, read from TOML. Unknown keys are errors.
//!
//! ```toml
//! seed = 7
//!
//! [model]
//! widths = [4, 4, 3, 1]
//! activation = "relu"
//! regularizer = "sum_l1"
//! kappa_star = 2.0
//!
//! [inputs]
//! distribution = "gaussian_sphere"
//!
//! [noise]
//! kind = "gaussian"
//! sigma = 0.5
//!
//! [study]
//! sample_sizes = [128, 256, 512]
//! replicates = 20
//! t = 0.05
//!
//! [lambda]
//! rule = "monte_carlo_quantile"
//! reps = 200
//! safety = 1.2
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::bounds::{gaussian_subgauss_params, NoiseSampler, SubGaussianSpec};
use crate::effective_noise::NoiseOptions;
use crate::error::{Error, Result};
use crate::estimator::FitOptions;
use crate::network::{Activation, Architecture};
use crate::regularizers::RegularizerKind;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    /// Output file; the CLI falls back to its default directory when unset.
    #[serde(default)]
    pub output: Option<PathBuf>,
    /// Worker threads; results do not depend on this.
    #[serde(default)]
    pub threads: Option<usize>,
    /// Also write SVG plots next to the CSV.
    #[serde(default)]
    pub plots: bool,
    pub model: ModelConfig,
    #[serde(default)]
    pub inputs: InputConfig,
    pub noise: NoiseConfig,
    #[serde(default)]
    pub study: StudyConfig,
    #[serde(default)]
    pub lambda: LambdaRule,
    #[serde(default)]
    pub fit: FitConfig,
    #[serde(default)]
    pub noise_search: NoiseSearchConfig,
    #[serde(default)]
    pub packing: Option<PackingConfig>,
    #[serde(default)]
    pub bounds: BoundsConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub widths: Vec<usize>,
    pub activation: String,
    #[serde(default)]
    pub activation_param: Option<f64>,
    #[serde(default = "default_regularizer")]
    pub regularizer: String,
    pub kappa_star: f64,
}

fn default_regularizer() -> String {
    RegularizerKind::SumL1.name().to_string()
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InputDistribution {
    /// Uniform on the sphere of radius `√d`.
    #[default]
    GaussianSphere,
    /// Uniform on `[−1, 1]^d`.
    UniformCube,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InputConfig {
    #[serde(default)]
    pub distribution: InputDistribution,
    /// Must equal the first width when given.
    #[serde(default)]
    pub dim: Option<usize>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum NoiseConfig {
    Gaussian { sigma: f64 },
    Rademacher { scale: f64 },
    Uniform { a: f64 },
}

impl NoiseConfig {
    /// Gaussian: `K = 2σ`. Rademacher and uniform: `K` twice the bound on
    /// `|u|` (1 when that is 0), with the smallest admissible `γ`.
    pub fn spec(&self) -> Result<SubGaussianSpec> {
        match *self {
            NoiseConfig::Gaussian { sigma } if sigma > 0.0 => gaussian_subgauss_params(sigma),
            NoiseConfig::Gaussian { sigma: 0.0 } => {
                SubGaussianSpec::tight(1.0, NoiseSampler::Gaussian { sigma: 0.0 })
            }
            NoiseConfig::Gaussian { sigma } => {
                Err(Error::Config(format!("noise sigma must be nonnegative, got {sigma}")))
            }
            NoiseConfig::Rademacher { scale } => bounded_spec(scale, NoiseSampler::Rademacher { scale }),
            NoiseConfig::Uniform { a } => bounded_spec(a, NoiseSampler::Uniform { a }),
        }
    }
}

fn bounded_spec(bound: f64, sampler: NoiseSampler) -> Result<SubGaussianSpec> {
    if !(bound >= 0.0 && bound.is_finite()) {
        return Err(Error::Config(format!("noise bound must be nonnegative, got {bound}")));
    }
    let k = if bound == 0.0 { 1.0 } else { 2.0 * bound };
    SubGaussianSpec::tight(k, sampler)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudyConfig {
    #[serde(default = "default_sample_sizes")]
    pub sample_sizes: Vec<usize>,
    #[serde(default = "default_replicates")]
    pub replicates: usize,
    #[serde(default = "default_t")]
    pub t: f64,
}

fn default_sample_sizes() -> Vec<usize> {
    vec![128, 256, 512, 1024, 2048, 4096]
}

fn default_replicates() -> usize {
    20
}

fn default_t() -> f64 {
    0.05
}

impl Default for StudyConfig {
    fn default() -> Self {
        Self {
            sample_sizes: default_sample_sizes(),
            replicates: default_replicates(),
            t: default_t(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case", deny_unknown_fields)]
pub enum LambdaRule {
    /// `a (2a_Lip/L)^L ‖x‖_n √(L log 2P) log(2n)/√n`.
    Theoretical {
        #[serde(default = "default_a")]
        a: f64,
    },
    /// `safety · λ̂_{h,t}` from `reps` Monte Carlo replicates.
    MonteCarloQuantile {
        #[serde(default = "default_mc_reps")]
        reps: usize,
        #[serde(default = "default_safety")]
        safety: f64,
    },
    Fixed {
        value: f64,
    },
}

fn default_a() -> f64 {
    1.0
}

fn default_mc_reps() -> usize {
    200
}

fn default_safety() -> f64 {
    1.2
}

impl Default for LambdaRule {
    fn default() -> Self {
        LambdaRule::MonteCarloQuantile {
            reps: default_mc_reps(),
            safety: default_safety(),
        }
    }
}

/// Overrides for [`FitOptions`].
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitConfig {
    pub max_outer_iters: Option<usize>,
    pub max_inner_iters: Option<usize>,
    pub restarts: Option<usize>,
    pub init_scale: Option<f64>,
    pub abs_tol: Option<f64>,
    pub rel_tol: Option<f64>,
}

impl FitConfig {
    pub fn options(&self, seed: u64) -> FitOptions {
        let d = FitOptions::default();
        FitOptions {
            max_outer_iters: self.max_outer_iters.unwrap_or(d.max_outer_iters),
            max_inner_iters: self.max_inner_iters.unwrap_or(d.max_inner_iters),
            restarts: self.restarts.unwrap_or(d.restarts),
            init_scale: self.init_scale.unwrap_or(d.init_scale),
            abs_tol: self.abs_tol.unwrap_or(d.abs_tol),
            rel_tol: self.rel_tol.unwrap_or(d.rel_tol),
            seed,
            ..d
        }
    }
}

/// Overrides for [`NoiseOptions`].
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSearchConfig {
    pub restarts: Option<usize>,
    pub max_iters: Option<usize>,
    pub warm_start: Option<bool>,
}

impl NoiseSearchConfig {
    pub fn options(&self, seed: u64) -> NoiseOptions {
        let d = NoiseOptions::default();
        NoiseOptions {
            restarts: self.restarts.unwrap_or(d.restarts),
            max_iters: self.max_iters.unwrap_or(d.max_iters),
            warm_start: self.warm_start.unwrap_or(d.warm_start),
            seed,
            ..d
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PackingConfig {
    /// Design points; each row has the input dimension.
    pub inputs: Vec<Vec<f64>>,
    pub radii: Vec<f64>,
    #[serde(default = "default_grid_resolution")]
    pub grid_resolution: usize,
}

fn default_grid_resolution() -> usize {
    200
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundsConfig {
    /// Replaces `‖x‖_n` of the generated design.
    pub x_norm_n: Option<f64>,
    /// Sub-Gaussian scale in the Dudley bound; defaults to 1.
    pub sigma: Option<f64>,
    pub delta: Option<f64>,
    #[serde(default)]
    pub radii: Vec<f64>,
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn arch(&self) -> Result<Architecture> {
        Architecture::new(self.model.widths.clone())
    }

    pub fn activation(&self) -> Result<Activation> {
        Activation::from_name(&self.model.activation, self.model.activation_param)
    }

    pub fn regularizer(&self) -> Result<RegularizerKind> {
        self.model.regularizer.parse()
    }

    pub fn validate(&self) -> Result<()> {
        let cfg_err = |e: Error| Error::Config(e.to_string());
        let arch = self.arch().map_err(cfg_err)?;
        self.activation().map_err(cfg_err)?;
        self.regularizer().map_err(cfg_err)?;
        if !(self.model.kappa_star >= 0.0 && self.model.kappa_star.is_finite()) {
            return Err(Error::Config(format!(
                "kappa_star must be nonnegative, got {}",
                self.model.kappa_star
            )));
        }
        if let Some(d) = self.inputs.dim {
            if d != arch.input_dim() {
                return Err(Error::Config(format!(
                    "inputs.dim = {d} but the first width is {}",
                    arch.input_dim()
                )));
            }
        }
        self.noise.spec().map_err(cfg_err)?;
        let s = &self.study;
        if s.sample_sizes.is_empty() || s.sample_sizes[0] == 0 {
            return Err(Error::Config("sample_sizes must be nonempty and positive".into()));
        }
        if s.sample_sizes.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Config("sample_sizes must be strictly increasing".into()));
        }
        if s.replicates == 0 {
            return Err(Error::Config("replicates must be at least 1".into()));
        }
        if !(s.t > 0.0 && s.t < 1.0) {
            return Err(Error::Config(format!("t must lie in (0, 1), got {}", s.t)));
        }
        match self.lambda {
            LambdaRule::Theoretical { a } if !(a > 0.0 && a.is_finite()) => {
                return Err(Error::Config(format!("lambda.a must be positive, got {a}")));
            }
            LambdaRule::MonteCarloQuantile { reps, safety } => {
                if !(safety > 0.0 && safety.is_finite()) {
                    return Err(Error::Config(format!("lambda.safety must be positive, got {safety}")));
                }
                if (reps as f64) * s.t < 1.0 - 1e-9 {
                    return Err(Error::Config(format!("lambda.reps = {reps} is below 1/t")));
                }
            }
            LambdaRule::Fixed { value } if !(value >= 0.0 && value.is_finite()) => {
                return Err(Error::Config(format!("lambda.value must be nonnegative, got {value}")));
            }
            _ => {}
        }
        self.fit.options(0).validate().map_err(cfg_err)?;
        self.noise_search.options(0).validate().map_err(cfg_err)?;
        if self.threads == Some(0) {
            return Err(Error::Config("threads must be positive".into()));
        }
        if let Some(p) = &self.packing {
            if p.grid_resolution == 0 {
                return Err(Error::Config("packing.grid_resolution must be positive".into()));
            }
            if p.inputs.is_empty() || p.inputs.iter().any(|x| x.len() != arch.input_dim()) {
                return Err(Error::Config(format!(
                    "packing.inputs must be nonempty rows of length {}",
                    arch.input_dim()
                )));
            }
            if p.radii.iter().any(|r| !(*r > 0.0 && r.is_finite())) {
                return Err(Error::Config("packing radii must be positive".into()));
            }
        }
        let b = &self.bounds;
        for (name, v) in [("x_norm_n", b.x_norm_n), ("sigma", b.sigma), ("delta", b.delta)] {
            if let Some(v) = v {
                if !(v > 0.0 && v.is_finite()) {
                    return Err(Error::Config(format!("bounds.{name} must be positive, got {v}")));
                }
            }
        }
        if b.radii.iter().any(|r| !(*r > 0.0 && r.is_finite())) {
            return Err(Error::Config("bounds radii must be positive".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
seed = 3
[model]
widths = [2, 3, 1]
activation = "relu"
kappa_star = 1.5
[noise]
kind = "gaussian"
sigma = 0.5
"#;

    #[test]
    fn minimal_config_gets_defaults() {
        let cfg = ExperimentConfig::from_toml_str(MINIMAL).unwrap();
        assert_eq!(cfg.study.sample_sizes, default_sample_sizes());
        assert_eq!(cfg.lambda, LambdaRule::MonteCarloQuantile { reps: 200, safety: 1.2 });
        assert_eq!(cfg.inputs.distribution, InputDistribution::GaussianSphere);
        assert_eq!(cfg.regularizer().unwrap(), RegularizerKind::SumL1);
        assert_eq!(cfg.noise.spec().unwrap().k(), 1.0);
    }

    #[test]
    fn round_trips_through_toml() {
        let cfg = ExperimentConfig::from_toml_str(MINIMAL).unwrap();
        let text = cfg.to_toml_string().unwrap();
        assert_eq!(ExperimentConfig::from_toml_str(&text).unwrap(), cfg);
    }

    #[test]
    fn rejects_unknown_keys() {
        let text = format!("{MINIMAL}\n[study]\nsample_size = [1]\n");
        assert!(ExperimentConfig::from_toml_str(&text).is_err());
        let text = MINIMAL.replace("sigma = 0.5", "sigma = 0.5\nscale = 1.0");
        assert!(ExperimentConfig::from_toml_str(&text).is_err());
        let text = format!("{MINIMAL}\n[lambda]\nrule = \"theoretical\"\nreps = 3\n");
        assert!(ExperimentConfig::from_toml_str(&text).is_err());
    }

    #[test]
    fn rejects_invalid_values() {
        for (from, to) in [
            ("kappa_star = 1.5", "kappa_star = -1.0"),
            ("widths = [2, 3, 1]", "widths = [2, 3, 2]"),
            ("activation = \"relu\"", "activation = \"sigmoid\""),
            ("sigma = 0.5", "sigma = -0.5"),
        ] {
            assert!(ExperimentConfig::from_toml_str(&MINIMAL.replace(from, to)).is_err(), "{to}");
        }
        for extra in [
            "[study]\nsample_sizes = [10, 10]\n",
            "[study]\nreplicates = 0\n",
            "[study]\nt = 1.0\n",
            "[lambda]\nrule = \"monte_carlo_quantile\"\nreps = 5\n",
            "[inputs]\ndim = 3\n",
            "[packing]\ninputs = [[1.0]]\nradii = [0.1]\n",
        ] {
            assert!(ExperimentConfig::from_toml_str(&format!("{MINIMAL}\n{extra}")).is_err(), "{extra}");
        }
    }

    #[test]
    fn noise_specs() {
        let s = NoiseConfig::Rademacher { scale: 0.5 }.spec().unwrap();
        assert_eq!(s.k(), 1.0);
        assert!(NoiseConfig::Uniform { a: 0.0 }.spec().unwrap().gamma() == 0.0);
        assert_eq!(NoiseConfig::Gaussian { sigma: 0.0 }.spec().unwrap().gamma(), 0.0);
    }
}
