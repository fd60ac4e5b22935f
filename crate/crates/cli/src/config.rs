//! Run configuration: one JSON file fully determines a run.
//!
//! Relative paths inside the file (landscape grids) resolve against the
//! directory holding the config; `output_dir` resolves against the working
//! directory.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use abcrf::forest::Hyperparams;
use abcrf::inference::{
    PriorSpec, SirTarget, SpatialObservation, SpatialTarget, StageConfig, Target, INTENSITY_SUMMARY,
    RADIAL_SUMMARY, SIR_SUMMARY,
};
use abcrf::landscape::{load_landscape_with_cell_size, uniform_landscape, CellId, Landscape};
use abcrf::sir::{SirInit, SirParams};
use abcrf::spatial::SpatialParams;
use abcrf::stats::SummarySpec;
use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelConfig,
    pub priors: Vec<PriorSpec>,
    pub summaries: Vec<SummaryRule>,
    pub stages: StagesConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub baseline: Option<BaselineConfig>,
    pub seed: u64,
    #[serde(default)]
    pub workers: usize,
    pub output_dir: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelConfig {
    Sir {
        n: f64,
        i0: f64,
        obs_times: Vec<f64>,
        horizon: f64,
        observed: SirObserved,
    },
    Spatial {
        landscape: LandscapeConfig,
        /// `[row, col]`; the centre cell when absent.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        origin: Option<[usize; 2]>,
        horizon: f64,
        growth_rate: f64,
        initial_prevalence: f64,
        observed: SpatialObserved,
    },
}

/// Observed infected counts, given directly or generated from known parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum SirObserved {
    Counts(Vec<f64>),
    Truth { beta: f64, gamma: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum SpatialObserved {
    Data(SpatialObservation),
    /// One simulated outbreak summarized over `years` years.
    Truth {
        epsilon: f64,
        beta: f64,
        alpha: f64,
        seed: u64,
        years: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum LandscapeConfig {
    Uniform {
        rows: usize,
        cols: usize,
        density: f64,
        #[serde(default = "one_km")]
        cell_size: f64,
    },
    File {
        path: PathBuf,
        #[serde(default = "one_km")]
        cell_size: f64,
    },
}

fn one_km() -> f64 {
    1.0
}

/// Acceptance rule as written in the config. `around_observed` is resolved
/// against the observed intensity once the observation is known.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SummaryRule {
    Below { name: String, threshold: f64 },
    Interval { name: String, lower: f64, upper: f64 },
    AroundObserved { name: String, tolerance: f64 },
}

impl SummaryRule {
    fn resolve(&self, observed: Option<f64>) -> Result<SummarySpec> {
        Ok(match self {
            SummaryRule::Below { name, threshold } => SummarySpec::below(name.clone(), *threshold)?,
            SummaryRule::Interval { name, lower, upper } => {
                SummarySpec::interval(name.clone(), *lower, *upper)?
            }
            SummaryRule::AroundObserved { name, tolerance } => {
                let Some(obs) = observed else {
                    bail!("summary {name:?}: around_observed is only available for {INTENSITY_SUMMARY:?}");
                };
                if !(*tolerance > 0.0) {
                    bail!("summary {name:?}: tolerance must be positive, got {tolerance}");
                }
                SummarySpec::around(name.clone(), obs, *tolerance)?
            }
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StagesConfig {
    pub n_stage1: usize,
    pub n_stage2: usize,
    pub probability_threshold: f64,
    #[serde(default = "one")]
    pub replicates: usize,
    #[serde(default)]
    pub forest: Hyperparams,
}

fn one() -> usize {
    1
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BaselineConfig {
    pub target_accepted: usize,
    pub budget: usize,
}

/// A model target ready to simulate.
pub enum Model {
    Sir(SirTarget),
    Spatial(SpatialTarget),
}

impl Model {
    pub fn target(&self) -> &dyn Target {
        match self {
            Model::Sir(t) => t,
            Model::Spatial(t) => t,
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("cannot read config {}", path.display()))?;
        let mut config: RunConfig = serde_json::from_str(&text)
            .with_context(|| format!("invalid config {}", path.display()))?;
        let base = path.parent().unwrap_or(Path::new("."));
        if let ModelConfig::Spatial {
            landscape: LandscapeConfig::File { path, .. },
            ..
        } = &mut config.model
        {
            if path.is_relative() {
                *path = base.join(&*path);
            }
        }
        config
            .validate()
            .with_context(|| format!("invalid config {}", path.display()))?;
        Ok(config)
    }

    /// Field-level checks that do not need the model built.
    pub fn validate(&self) -> Result<()> {
        let s = &self.stages;
        if s.n_stage1 == 0 {
            bail!("stages.n_stage1: must be at least 1");
        }
        if s.n_stage2 == 0 {
            bail!("stages.n_stage2: must be at least 1");
        }
        if !(s.probability_threshold > 0.0 && s.probability_threshold < 1.0) {
            bail!(
                "stages.probability_threshold: must lie in (0, 1), got {}",
                s.probability_threshold
            );
        }
        if s.replicates == 0 {
            bail!("stages.replicates: must be at least 1");
        }
        s.forest
            .validate(self.priors.len())
            .context("stages.forest")?;
        abcrf::inference::validate_priors(&self.priors).context("priors")?;
        if let Some(b) = &self.baseline {
            if b.target_accepted == 0 || b.budget == 0 {
                bail!("baseline: target_accepted and budget must be at least 1");
            }
        }
        match &self.model {
            ModelConfig::Sir { n, i0, horizon, observed, obs_times } => {
                SirInit { n: *n, i0: *i0 }.validate().context("model")?;
                if !(horizon.is_finite() && *horizon > 0.0) {
                    bail!("model.horizon: must be positive, got {horizon}");
                }
                if let SirObserved::Counts(c) = observed {
                    if c.len() != obs_times.len() {
                        bail!(
                            "model.observed.counts: {} values for {} observation times",
                            c.len(),
                            obs_times.len()
                        );
                    }
                }
            }
            ModelConfig::Spatial { landscape, horizon, .. } => {
                if !(horizon.is_finite() && *horizon > 0.0) {
                    bail!("model.horizon: must be positive, got {horizon}");
                }
                if let LandscapeConfig::File { path, .. } = landscape {
                    if !path.is_file() {
                        bail!("model.landscape.file.path: {} does not exist", path.display());
                    }
                }
            }
        }
        Ok(())
    }

    pub fn stage_config(&self) -> StageConfig {
        StageConfig {
            n_stage1: self.stages.n_stage1,
            n_stage2: self.stages.n_stage2,
            probability_threshold: self.stages.probability_threshold,
            priors: self.priors.clone(),
            seed: self.seed,
            workers: self.workers,
            replicates: self.stages.replicates,
            forest: self.stages.forest,
        }
    }

    fn landscape(config: &LandscapeConfig) -> Result<Landscape> {
        Ok(match config {
            LandscapeConfig::Uniform { rows, cols, density, cell_size } => {
                uniform_landscape(*rows, *cols, *density, *cell_size).context("model.landscape.uniform")?
            }
            LandscapeConfig::File { path, cell_size } => load_landscape_with_cell_size(path, *cell_size)
                .with_context(|| format!("model.landscape.file: cannot load {}", path.display()))?,
        })
    }

    /// Builds the simulator target, generating synthetic observations when
    /// the config gives true parameters instead of data.
    pub fn build_model(&self) -> Result<Model> {
        match &self.model {
            ModelConfig::Sir { n, i0, obs_times, horizon, observed } => {
                let [rule] = self.summaries.as_slice() else {
                    bail!("summaries: the SIR model takes exactly one summary ({SIR_SUMMARY:?})");
                };
                let spec = rule.resolve(None).context("summaries[0]")?;
                let init = SirInit { n: *n, i0: *i0 };
                let target = match observed {
                    SirObserved::Counts(c) => {
                        SirTarget::new(init, obs_times.clone(), *horizon, c.clone(), spec)
                    }
                    SirObserved::Truth { beta, gamma } => SirTarget::from_truth(
                        SirParams { beta: *beta, gamma: *gamma },
                        init,
                        obs_times.clone(),
                        *horizon,
                        spec,
                    ),
                }
                .context("model")?;
                Ok(Model::Sir(target))
            }
            ModelConfig::Spatial {
                landscape,
                origin,
                horizon,
                growth_rate,
                initial_prevalence,
                observed,
            } => {
                let landscape = Arc::new(Self::landscape(landscape)?);
                let origin = origin.map_or(landscape.centre(), |[r, c]| CellId::new(r, c));
                let observation = match observed {
                    SpatialObserved::Data(d) => d.clone(),
                    SpatialObserved::Truth { epsilon, beta, alpha, seed, years } => {
                        let truth = SpatialParams {
                            epsilon: *epsilon,
                            beta: *beta,
                            alpha: *alpha,
                            r: *growth_rate,
                            p0: *initial_prevalence,
                        };
                        SpatialTarget::observe(&truth, &landscape, origin, *horizon, *years, *seed)
                            .context("model.observed.truth")?
                    }
                };
                let [radial, intensity] = self.summaries.as_slice() else {
                    bail!(
                        "summaries: the spatial model takes two summaries ({RADIAL_SUMMARY:?}, {INTENSITY_SUMMARY:?})"
                    );
                };
                let specs = [
                    radial.resolve(None).context("summaries[0]")?,
                    intensity
                        .resolve(Some(observation.intensity))
                        .context("summaries[1]")?,
                ];
                let target = SpatialTarget::new(
                    landscape,
                    origin,
                    *horizon,
                    *growth_rate,
                    *initial_prevalence,
                    observation,
                    specs,
                )
                .context("model")?;
                Ok(Model::Spatial(target))
            }
        }
    }
}
