use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::prior::{draw_particle, validate_priors};
use super::{
    marginals, EfficiencyReport, Particle, PosteriorSample, PriorSpec, Target,
};
use crate::error::{Error, Result};
use crate::forest::{self, FeatureInfo, Forest, Hyperparams, TrainingSet};
use crate::seed::{self, stream};

/// Particles simulated per batch; batches are written out as they finish.
const SIMULATION_CHUNK: usize = 2048;
/// Candidates screened per batch in stage 2.
const SCREENING_CHUNK: usize = 16_384;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageConfig {
    pub n_stage1: usize,
    pub n_stage2: usize,
    /// Stage-2 candidates are simulated when their predicted probability is at least this.
    pub probability_threshold: f64,
    pub priors: Vec<PriorSpec>,
    pub seed: u64,
    /// Worker threads; 0 uses every available core.
    #[serde(default)]
    pub workers: usize,
    /// Simulations per particle; summary values are averaged over them.
    #[serde(default = "one")]
    pub replicates: usize,
    #[serde(default)]
    pub forest: Hyperparams,
}

fn one() -> usize {
    1
}

impl StageConfig {
    pub fn validate(&self) -> Result<()> {
        validate_priors(&self.priors)?;
        if self.n_stage1 == 0 || self.n_stage2 == 0 {
            return Err(Error::InvalidParameter(
                "n_stage1 and n_stage2 must be at least 1".into(),
            ));
        }
        if !(self.probability_threshold > 0.0 && self.probability_threshold <= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "probability threshold must lie in (0, 1], got {}",
                self.probability_threshold
            )));
        }
        if self.replicates == 0 {
            return Err(Error::InvalidParameter("replicates must be at least 1".into()));
        }
        self.forest.validate(self.priors.len())
    }

    fn pool(&self) -> Result<rayon::ThreadPool> {
        rayon::ThreadPoolBuilder::new()
            .num_threads(self.workers)
            .build()
            .map_err(|e| Error::InvalidParameter(format!("cannot start worker pool: {e}")))
    }

    fn parameter_names(&self) -> Vec<String> {
        self.priors.iter().map(|p| p.name.clone()).collect()
    }
}

/// Simulates and labels one particle in place.
fn evaluate(particle: &mut Particle, target: &dyn Target, replicates: usize) -> Result<()> {
    let values = if replicates == 1 {
        target.simulate(&particle.params, particle.seed, true)?
    } else {
        let mut sum = vec![0.0; target.summaries().len()];
        for r in 0..replicates as u64 {
            let s = seed::derive(particle.seed, &[stream::REPLICATE, r]);
            for (acc, v) in sum.iter_mut().zip(target.simulate(&particle.params, s, false)?) {
                *acc += v;
            }
        }
        sum.iter().map(|v| v / replicates as f64).collect()
    };
    particle.set_summaries(target.summaries(), &values);
    Ok(())
}

fn simulate_batch(batch: &mut [Particle], target: &dyn Target, replicates: usize) -> Result<()> {
    batch
        .par_iter_mut()
        .try_for_each(|p| evaluate(p, target, replicates))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Stage1Output {
    pub particles: Vec<Particle>,
    pub accepted: usize,
}

impl Stage1Output {
    pub fn acceptance_rate(&self) -> f64 {
        self.accepted as f64 / self.particles.len() as f64
    }
}

pub fn run_stage1(config: &StageConfig, target: &dyn Target) -> Result<Stage1Output> {
    run_stage1_with_sink(config, target, |_| Ok(()))
}

/// Stage 1: simulates `n_stage1` prior draws and labels them. `sink` sees
/// each finished batch in index order. Fails after the last batch when no
/// particle was accepted.
pub fn run_stage1_with_sink<F>(
    config: &StageConfig,
    target: &dyn Target,
    mut sink: F,
) -> Result<Stage1Output>
where
    F: FnMut(&[Particle]) -> Result<()>,
{
    config.validate()?;
    target.check_priors(&config.priors)?;
    let pool = config.pool()?;
    let mut particles = Vec::with_capacity(config.n_stage1);
    let mut start = 0;
    while start < config.n_stage1 {
        let end = (start + SIMULATION_CHUNK).min(config.n_stage1);
        let mut batch: Vec<Particle> = (start..end)
            .map(|i| draw_particle(&config.priors, config.seed, stream::STAGE1, i as u64))
            .collect();
        pool.install(|| simulate_batch(&mut batch, target, config.replicates))?;
        sink(&batch)?;
        particles.extend(batch);
        start = end;
    }
    let accepted = particles.iter().filter(|p| p.is_accepted()).count();
    if accepted == 0 {
        return Err(Error::NoAcceptedParticles {
            simulated: particles.len(),
        });
    }
    Ok(Stage1Output {
        particles,
        accepted,
    })
}

/// Trains the screening forest on labelled particles, using each prior's
/// sampling scale as the feature space.
pub fn train_classifier(
    particles: &[Particle],
    priors: &[PriorSpec],
    hyperparams: &Hyperparams,
    seed: u64,
    workers: usize,
) -> Result<Forest> {
    let rows: Vec<Vec<f64>> = particles.iter().map(|p| p.sampling.clone()).collect();
    let labels: Vec<bool> = particles.iter().map(|p| p.is_accepted()).collect();
    let features = priors
        .iter()
        .map(|p| FeatureInfo {
            name: p.name.clone(),
            scale: p.scale,
        })
        .collect();
    let data = TrainingSet::new(&rows, labels)?.with_features(features)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::InvalidParameter(format!("cannot start worker pool: {e}")))?;
    pool.install(|| forest::train(&data, hyperparams, seed::derive(seed, &[stream::FOREST])))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Stage2Output {
    /// Candidates drawn and scored by the forest.
    pub screened: usize,
    /// Candidates that passed the gate, all simulated and labelled.
    pub survivors: Vec<Particle>,
    pub posterior: PosteriorSample,
}

impl Stage2Output {
    /// Fraction of simulated survivors that were accepted.
    pub fn survivor_acceptance_rate(&self) -> f64 {
        self.posterior.particles.len() as f64 / self.survivors.len() as f64
    }
}

fn check_forest(forest: &Forest, priors: &[PriorSpec]) -> Result<()> {
    if forest.n_features() != priors.len() {
        return Err(Error::DimensionMismatch {
            expected: priors.len(),
            actual: forest.n_features(),
        });
    }
    for (f, p) in forest.features().iter().zip(priors) {
        if f.name != p.name || f.scale != p.scale {
            return Err(Error::InvalidInput(format!(
                "forest feature {:?} ({:?} scale) does not match prior {:?} ({:?} scale)",
                f.name, f.scale, p.name, p.scale
            )));
        }
    }
    Ok(())
}

/// Stage 2: screens `n_stage2` fresh prior draws with `forest` and simulates
/// the candidates whose probability reaches the gate.
pub fn run_stage2(config: &StageConfig, target: &dyn Target, forest: &Forest) -> Result<Stage2Output> {
    config.validate()?;
    target.check_priors(&config.priors)?;
    check_forest(forest, &config.priors)?;
    let pool = config.pool()?;

    let mut survivors = Vec::new();
    let mut best = 0.0f64;
    let mut start = 0;
    while start < config.n_stage2 {
        let end = (start + SCREENING_CHUNK).min(config.n_stage2);
        let scored: Vec<Particle> = pool.install(|| {
            (start..end)
                .into_par_iter()
                .map(|i| {
                    let mut p = draw_particle(&config.priors, config.seed, stream::STAGE2, i as u64);
                    p.probability = Some(forest.predict_proba(&p.sampling)?);
                    Ok(p)
                })
                .collect::<Result<Vec<_>>>()
        })?;
        for p in scored {
            let prob = p.probability.unwrap_or(0.0);
            best = best.max(prob);
            if prob >= config.probability_threshold {
                survivors.push(p);
            }
        }
        start = end;
    }
    if survivors.is_empty() {
        return Err(Error::EmptyGate {
            threshold: config.probability_threshold,
            screened: config.n_stage2,
            best,
        });
    }

    for batch in survivors.chunks_mut(SIMULATION_CHUNK) {
        pool.install(|| simulate_batch(batch, target, config.replicates))?;
    }

    let accepted: Vec<Particle> = survivors.iter().filter(|p| p.is_accepted()).cloned().collect();
    let names = config.parameter_names();
    let marginals = if accepted.is_empty() {
        Vec::new()
    } else {
        marginals(&names, &accepted)?
    };
    let efficiency = EfficiencyReport::new(
        accepted.len(),
        forest.training().rows * config.replicates,
        survivors.len() * config.replicates,
    )?;
    Ok(Stage2Output {
        screened: config.n_stage2,
        survivors,
        posterior: PosteriorSample {
            parameter_names: names,
            particles: accepted,
            marginals,
            efficiency,
        },
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct BaselineOutput {
    pub accepted: Vec<Particle>,
    /// Simulations run until the target count was reached.
    pub simulations: usize,
}

impl BaselineOutput {
    pub fn acceptance_rate(&self) -> f64 {
        self.accepted.len() as f64 / self.simulations as f64
    }
}

/// Plain ABC rejection: simulates prior draws in index order until
/// `target_accepted` are accepted or `budget` simulations have run.
pub fn run_rejection_baseline(
    config: &StageConfig,
    target: &dyn Target,
    target_accepted: usize,
    budget: usize,
) -> Result<BaselineOutput> {
    config.validate()?;
    target.check_priors(&config.priors)?;
    if target_accepted == 0 || budget == 0 {
        return Err(Error::InvalidParameter(
            "baseline target and budget must be at least 1".into(),
        ));
    }
    let pool = config.pool()?;
    let mut accepted = Vec::with_capacity(target_accepted);
    let mut start = 0;
    while start < budget {
        let end = (start + SIMULATION_CHUNK).min(budget);
        let mut batch: Vec<Particle> = (start..end)
            .map(|i| draw_particle(&config.priors, config.seed, stream::BASELINE, i as u64))
            .collect();
        pool.install(|| simulate_batch(&mut batch, target, config.replicates))?;
        for p in batch {
            if p.is_accepted() {
                let index = p.index as usize;
                accepted.push(p);
                if accepted.len() == target_accepted {
                    return Ok(BaselineOutput {
                        accepted,
                        simulations: index + 1,
                    });
                }
            }
        }
        start = end;
    }
    Err(Error::BudgetExhausted {
        budget,
        accepted: accepted.len(),
        target: target_accepted,
    })
}
