//! Two-stage ABC-RF-rejection.
//!
//! Stage 1 is plain ABC rejection: prior draws are simulated and labelled
//! accepted when every summary statistic meets its rule. A random forest is
//! trained on those labels. Stage 2 draws a much larger candidate set, keeps
//! only candidates whose predicted acceptance probability reaches a gate, and
//! simulates just those. Accepted survivors form the posterior sample.

pub mod cases;
mod io;
mod pipeline;
mod prior;
mod target;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats::{SummarySpec, SummaryValue};

pub use io::{load_particles, read_particles, Layout, ParticleTable, ParticleWriter};
pub use pipeline::{
    run_rejection_baseline, run_stage1, run_stage1_with_sink, run_stage2, train_classifier,
    BaselineOutput, Stage1Output, Stage2Output, StageConfig,
};
pub use prior::{sample_prior, validate_priors, PriorSpec, Scale};
pub use target::{
    ModelKind, SirTarget, SpatialObservation, SpatialTarget, Target, INTENSITY_SUMMARY,
    RADIAL_SUMMARY, SIR_PARAMETERS, SIR_SUMMARY, SPATIAL_PARAMETERS,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Label {
    Accepted,
    Rejected,
    Unevaluated,
}

/// One candidate parameter vector and what is known about it.
#[derive(Debug, Clone, PartialEq)]
pub struct Particle {
    pub index: u64,
    /// Seed of the particle's simulation stream.
    pub seed: u64,
    /// Parameter values on the natural scale.
    pub params: Vec<f64>,
    /// Parameter values on each prior's sampling scale.
    pub sampling: Vec<f64>,
    pub summaries: Vec<SummaryValue>,
    pub label: Label,
    /// Forest acceptance probability, for screened candidates.
    pub probability: Option<f64>,
}

impl Particle {
    pub fn new(index: u64, seed: u64, params: Vec<f64>, priors: &[PriorSpec]) -> Self {
        let sampling = params
            .iter()
            .zip(priors)
            .map(|(&v, p)| p.to_sampling(v))
            .collect();
        Self {
            index,
            seed,
            params,
            sampling,
            summaries: Vec::new(),
            label: Label::Unevaluated,
            probability: None,
        }
    }

    pub fn is_accepted(&self) -> bool {
        self.label == Label::Accepted
    }

    /// Attaches summary values and the conjunction label.
    pub fn set_summaries(&mut self, specs: &[SummarySpec], values: &[f64]) {
        self.summaries = specs.iter().zip(values).map(|(s, &v)| s.evaluate(v)).collect();
        self.label = if self.summaries.iter().all(|s| s.accepted) {
            Label::Accepted
        } else {
            Label::Rejected
        };
    }

    pub fn summary(&self, name: &str) -> Option<f64> {
        self.summaries.iter().find(|s| s.name == name).map(|s| s.value)
    }
}

/// Posterior summary of one parameter, on the natural scale.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Marginal {
    pub parameter: String,
    pub count: usize,
    pub mean: f64,
    pub median: f64,
    pub q025: f64,
    pub q975: f64,
    pub min: f64,
    pub max: f64,
}

/// Linear-interpolation quantile of sorted data.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn marginals(names: &[String], particles: &[Particle]) -> Result<Vec<Marginal>> {
    if particles.is_empty() {
        return Err(Error::InvalidInput("no particles to summarize".into()));
    }
    Ok(names
        .iter()
        .enumerate()
        .map(|(k, name)| {
            let mut v: Vec<f64> = particles.iter().map(|p| p.params[k]).collect();
            v.sort_by(f64::total_cmp);
            Marginal {
                parameter: name.clone(),
                count: v.len(),
                mean: v.iter().sum::<f64>() / v.len() as f64,
                median: quantile(&v, 0.5),
                q025: quantile(&v, 0.025),
                q975: quantile(&v, 0.975),
                min: v[0],
                max: v[v.len() - 1],
            }
        })
        .collect())
}

/// Histogram bin on a prior's sampling scale.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bin {
    pub lower: f64,
    pub upper: f64,
    pub count: usize,
}

/// Counts `values` (sampling scale) into `bins` equal bins over the prior
/// range; the upper edge belongs to the last bin.
pub fn histogram(prior: &PriorSpec, values: &[f64], bins: usize) -> Vec<Bin> {
    let width = (prior.upper - prior.lower) / bins as f64;
    let mut out: Vec<Bin> = (0..bins)
        .map(|b| Bin {
            lower: prior.lower + b as f64 * width,
            upper: if b + 1 == bins {
                prior.upper
            } else {
                prior.lower + (b + 1) as f64 * width
            },
            count: 0,
        })
        .collect();
    for &v in values {
        if v < prior.lower || v > prior.upper {
            continue;
        }
        let b = (((v - prior.lower) / width).floor() as usize).min(bins - 1);
        out[b].count += 1;
    }
    out
}

/// Posterior particles per simulation run across both stages.
pub fn efficiency(posterior_count: usize, total_simulations: usize) -> Result<f64> {
    if total_simulations == 0 {
        return Err(Error::InvalidInput("efficiency of zero simulations".into()));
    }
    if posterior_count > total_simulations {
        return Err(Error::InvalidInput(format!(
            "posterior count {posterior_count} exceeds {total_simulations} simulations"
        )));
    }
    Ok(posterior_count as f64 / total_simulations as f64)
}

/// Counts behind an efficiency figure. Candidates screened out by the forest
/// are never simulated and do not count.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EfficiencyReport {
    pub posterior_count: usize,
    pub stage1_simulations: usize,
    pub stage2_simulations: usize,
    pub total_simulations: usize,
    pub efficiency: f64,
}

impl EfficiencyReport {
    pub fn new(posterior_count: usize, stage1: usize, stage2: usize) -> Result<Self> {
        let total = stage1 + stage2;
        Ok(Self {
            posterior_count,
            stage1_simulations: stage1,
            stage2_simulations: stage2,
            total_simulations: total,
            efficiency: efficiency(posterior_count, total)?,
        })
    }
}

/// Accepted stage-2 particles with their marginals and efficiency.
#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorSample {
    pub parameter_names: Vec<String>,
    pub particles: Vec<Particle>,
    /// Empty when no survivor was accepted.
    pub marginals: Vec<Marginal>,
    pub efficiency: EfficiencyReport,
}
