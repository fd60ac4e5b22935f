//! Ready-made configurations for the two synthetic benchmarks.
//!
//! Case 1 fits the deterministic SIR model to five noise-free infected
//! counts. Case 2 fits the spatial model to an outbreak simulated from known
//! parameters on a uniform 50×50 grid over three years.

use std::sync::Arc;

use super::{PriorSpec, SirTarget, SpatialObservation, SpatialTarget, StageConfig, INTENSITY_SUMMARY, RADIAL_SUMMARY, SIR_SUMMARY};
use crate::error::Result;
use crate::forest::Hyperparams;
use crate::landscape::{uniform_landscape, CellId, Landscape};
use crate::sir::{SirInit, SirParams};
use crate::spatial::SpatialParams;
use crate::stats::SummarySpec;

pub const CASE1_OBS_TIMES: [f64; 5] = [1.0, 5.0, 9.0, 13.0, 17.0];
pub const CASE1_HORIZON: f64 = 20.0;
/// Five observations each allowed to miss by 20 individuals.
pub const CASE1_THRESHOLD: f64 = 5.0 * 20.0 * 20.0;
pub const CASE1_GATE: f64 = 0.75;

pub fn case1_truth() -> SirParams {
    SirParams { beta: 1.5, gamma: 0.5 }
}

pub fn case1_init() -> SirInit {
    SirInit { n: 1000.0, i0: 1.0 }
}

pub fn case1_priors() -> Vec<PriorSpec> {
    vec![PriorSpec::uniform("beta", 0.0, 6.0), PriorSpec::uniform("gamma", 0.0, 1.0)]
}

/// Case-1 target with observations generated at the true parameters.
pub fn case1_target(threshold: f64) -> Result<SirTarget> {
    SirTarget::from_truth(
        case1_truth(),
        case1_init(),
        CASE1_OBS_TIMES.to_vec(),
        CASE1_HORIZON,
        SummarySpec::below(SIR_SUMMARY, threshold)?,
    )
}

pub fn case1_config(n_stage1: usize, n_stage2: usize, seed: u64) -> StageConfig {
    StageConfig {
        n_stage1,
        n_stage2,
        probability_threshold: CASE1_GATE,
        priors: case1_priors(),
        seed,
        workers: 0,
        replicates: 1,
        forest: Hyperparams::default(),
    }
}

pub const CASE2_SIZE: usize = 50;
pub const CASE2_DENSITY: f64 = 0.75;
pub const CASE2_YEARS: usize = 3;
/// Within-cell growth rate and initial prevalence.
pub const CASE2_GROWTH_RATE: f64 = 13.2;
pub const CASE2_INITIAL_PREVALENCE: f64 = 0.004;
/// Each year allowed to miss by 5 km.
pub const CASE2_RADIAL_THRESHOLD: f64 = CASE2_YEARS as f64 * 5.0 * 5.0;
pub const CASE2_INTENSITY_TOLERANCE: f64 = 0.05;
pub const CASE2_GATE: f64 = 0.5;
pub const CASE2_STAGE2: usize = 2_000_000;
/// Seed of the synthetic observed outbreak: the realization whose final
/// intensity is closest to the median over seeds 0..30.
pub const CASE2_OBSERVATION_SEED: u64 = 26;

pub fn case2_truth() -> SpatialParams {
    SpatialParams {
        epsilon: 1e-4,
        beta: 8.0,
        alpha: 0.5,
        r: CASE2_GROWTH_RATE,
        p0: CASE2_INITIAL_PREVALENCE,
    }
}

pub fn case2_landscape() -> Landscape {
    uniform_landscape(CASE2_SIZE, CASE2_SIZE, CASE2_DENSITY, 1.0).expect("valid uniform grid")
}

pub fn case2_priors() -> Vec<PriorSpec> {
    vec![
        PriorSpec::log_uniform("epsilon", -6.0, 0.0),
        PriorSpec::log_uniform("beta", -4.0, 2.0),
        PriorSpec::uniform("alpha", 0.01, 50.0),
    ]
}

pub fn case2_observation(landscape: &Landscape, seed: u64) -> Result<SpatialObservation> {
    SpatialTarget::observe(
        &case2_truth(),
        landscape,
        landscape.centre(),
        CASE2_YEARS as f64,
        CASE2_YEARS,
        seed,
    )
}

/// Spatial target for a given observation, with the Case-2 acceptance rules.
pub fn case2_target_for(landscape: Arc<Landscape>, observed: SpatialObservation) -> Result<SpatialTarget> {
    let origin: CellId = landscape.centre();
    let specs = [
        SummarySpec::below(RADIAL_SUMMARY, CASE2_RADIAL_THRESHOLD)?,
        SummarySpec::around(INTENSITY_SUMMARY, observed.intensity, CASE2_INTENSITY_TOLERANCE)?,
    ];
    SpatialTarget::new(
        landscape,
        origin,
        CASE2_YEARS as f64,
        CASE2_GROWTH_RATE,
        CASE2_INITIAL_PREVALENCE,
        observed,
        specs,
    )
}

/// Case-2 target against the outbreak simulated from the truth with `seed`.
pub fn case2_target(seed: u64) -> Result<SpatialTarget> {
    let landscape = Arc::new(case2_landscape());
    let observed = case2_observation(&landscape, seed)?;
    case2_target_for(landscape, observed)
}

pub fn case2_config(n_stage1: usize, n_stage2: usize, seed: u64) -> StageConfig {
    StageConfig {
        n_stage1,
        n_stage2,
        probability_threshold: CASE2_GATE,
        priors: case2_priors(),
        seed,
        workers: 0,
        replicates: 1,
        forest: Hyperparams::default(),
    }
}
