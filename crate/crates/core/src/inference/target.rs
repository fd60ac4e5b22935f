//! Forward models bound to observed data and acceptance rules.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::PriorSpec;
use crate::error::{Error, Result};
use crate::landscape::{grid_offset_sq, CellId, Landscape};
use crate::sir::{SirInit, SirParams, SirSolver};
use crate::spatial::{simulate_outbreak, simulate_outbreak_with, Flow, SpatialParams};
use crate::stats::{self, RadialBound, SummaryKind, SummarySpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Sir,
    Spatial,
}

/// A simulator together with the data it is compared against.
pub trait Target: Sync {
    fn model(&self) -> ModelKind;

    /// Parameter order expected by [`Target::simulate`].
    fn parameter_names(&self) -> &[&'static str];

    /// Summary specs, in the order [`Target::simulate`] returns values.
    fn summaries(&self) -> &[SummarySpec];

    /// Runs one simulation and returns its summary values. With `truncate`
    /// set, a run may stop as soon as rejection is certain; the values of a
    /// stopped run are lower bounds on the full ones.
    fn simulate(&self, params: &[f64], seed: u64, truncate: bool) -> Result<Vec<f64>>;

    /// Checks that `priors` name this target's parameters in order and that
    /// their support is valid for the model.
    fn check_priors(&self, priors: &[PriorSpec]) -> Result<()> {
        default_check(self, priors)
    }
}

pub const SIR_PARAMETERS: [&str; 2] = ["beta", "gamma"];
pub const SIR_SUMMARY: &str = "ss";

/// SIR model scored by squared deviation of infected counts.
#[derive(Debug, Clone)]
pub struct SirTarget {
    init: SirInit,
    obs_times: Vec<f64>,
    horizon: f64,
    observed: Vec<f64>,
    solver: SirSolver,
    specs: [SummarySpec; 1],
}

impl SirTarget {
    pub fn new(
        init: SirInit,
        obs_times: Vec<f64>,
        horizon: f64,
        observed: Vec<f64>,
        spec: SummarySpec,
    ) -> Result<Self> {
        init.validate()?;
        spec.validate()?;
        if spec.name != SIR_SUMMARY {
            return Err(Error::InvalidParameter(format!(
                "the SIR model provides the summary {SIR_SUMMARY:?}, not {:?}",
                spec.name
            )));
        }
        if observed.len() != obs_times.len() {
            return Err(Error::DimensionMismatch {
                expected: obs_times.len(),
                actual: observed.len(),
            });
        }
        let target = Self {
            init,
            obs_times,
            horizon,
            observed,
            solver: SirSolver::default(),
            specs: [spec],
        };
        // Validates the observation grid once up front.
        target
            .solver
            .solve(SirParams { beta: 0.0, gamma: 0.0 }, init, &target.obs_times, horizon)?;
        Ok(target)
    }

    /// Observed counts generated by the model itself at `truth`.
    pub fn from_truth(
        truth: SirParams,
        init: SirInit,
        obs_times: Vec<f64>,
        horizon: f64,
        spec: SummarySpec,
    ) -> Result<Self> {
        let traj = SirSolver::default().solve(truth, init, &obs_times, horizon)?;
        Self::new(init, obs_times, horizon, traj.i, spec)
    }

    pub fn observed(&self) -> &[f64] {
        &self.observed
    }

    pub fn obs_times(&self) -> &[f64] {
        &self.obs_times
    }

    pub fn init(&self) -> SirInit {
        self.init
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }
}

impl Target for SirTarget {
    fn model(&self) -> ModelKind {
        ModelKind::Sir
    }

    fn parameter_names(&self) -> &[&'static str] {
        &SIR_PARAMETERS
    }

    fn summaries(&self) -> &[SummarySpec] {
        &self.specs
    }

    fn simulate(&self, params: &[f64], _seed: u64, _truncate: bool) -> Result<Vec<f64>> {
        let [beta, gamma] = params else {
            return Err(Error::DimensionMismatch {
                expected: 2,
                actual: params.len(),
            });
        };
        let traj = self.solver.solve(
            SirParams {
                beta: *beta,
                gamma: *gamma,
            },
            self.init,
            &self.obs_times,
            self.horizon,
        )?;
        Ok(vec![stats::ss_sir(&self.observed, &traj.i)?])
    }

    fn check_priors(&self, priors: &[PriorSpec]) -> Result<()> {
        default_check(self, priors)?;
        for p in priors {
            if p.natural_bounds().0 < 0.0 {
                return Err(Error::InvalidParameter(format!(
                    "prior {:?} allows negative rates",
                    p.name
                )));
            }
        }
        Ok(())
    }
}

fn default_check<T: Target + ?Sized>(target: &T, priors: &[PriorSpec]) -> Result<()> {
    super::prior::validate_priors(priors)?;
    let names = target.parameter_names();
    let given: Vec<&str> = priors.iter().map(|p| p.name.as_str()).collect();
    if given != names {
        return Err(Error::InvalidParameter(format!(
            "priors must be declared for {names:?} in that order, got {given:?}"
        )));
    }
    Ok(())
}

pub const SPATIAL_PARAMETERS: [&str; 3] = ["epsilon", "beta", "alpha"];
pub const RADIAL_SUMMARY: &str = "ss1";
pub const INTENSITY_SUMMARY: &str = "ss2";

/// Observations of one outbreak: yearly maximum spread and end-of-horizon intensity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpatialObservation {
    /// Maximum spread (km) at t = 1, 2, ..., in years.
    pub distances: Vec<f64>,
    /// Infected fraction of the spread disc at the horizon.
    pub intensity: f64,
}

/// Spatial model scored by radial spread (`ss1`) and intensity (`ss2`).
#[derive(Debug, Clone)]
pub struct SpatialTarget {
    landscape: Arc<Landscape>,
    origin: CellId,
    horizon: f64,
    growth_rate: f64,
    initial_prevalence: f64,
    observed: SpatialObservation,
    specs: [SummarySpec; 2],
}

impl SpatialTarget {
    /// `specs` must be the radial spec `ss1` followed by the intensity spec `ss2`.
    pub fn new(
        landscape: Arc<Landscape>,
        origin: CellId,
        horizon: f64,
        growth_rate: f64,
        initial_prevalence: f64,
        observed: SpatialObservation,
        specs: [SummarySpec; 2],
    ) -> Result<Self> {
        if landscape.density(origin)? <= 0.0 {
            return Err(Error::UninfectableOrigin {
                row: origin.row,
                col: origin.col,
            });
        }
        SpatialParams {
            epsilon: 1.0,
            beta: 1.0,
            alpha: 1.0,
            r: growth_rate,
            p0: initial_prevalence,
        }
        .validate()?;
        if !(horizon.is_finite() && horizon > 0.0) {
            return Err(Error::InvalidInput(format!("invalid horizon {horizon}")));
        }
        if observed.distances.is_empty() || observed.distances.len() as f64 > horizon {
            return Err(Error::InvalidInput(format!(
                "need between 1 and {horizon} yearly distances, got {}",
                observed.distances.len()
            )));
        }
        if specs[0].name != RADIAL_SUMMARY || specs[1].name != INTENSITY_SUMMARY {
            return Err(Error::InvalidParameter(format!(
                "spatial summaries must be {RADIAL_SUMMARY:?} then {INTENSITY_SUMMARY:?}, got {:?} and {:?}",
                specs[0].name, specs[1].name
            )));
        }
        for s in &specs {
            s.validate()?;
        }
        Ok(Self {
            landscape,
            origin,
            horizon,
            growth_rate,
            initial_prevalence,
            observed,
            specs,
        })
    }

    /// Simulates `truth` once and summarizes it as the observation for the
    /// first `years` years.
    pub fn observe(
        truth: &SpatialParams,
        landscape: &Landscape,
        origin: CellId,
        horizon: f64,
        years: usize,
        seed: u64,
    ) -> Result<SpatialObservation> {
        let state = simulate_outbreak(truth, landscape, origin, horizon, seed)?;
        Ok(SpatialObservation {
            distances: stats::yearly_spread(&state, years, landscape),
            intensity: stats::intensity(&state, horizon, landscape),
        })
    }

    pub fn observed(&self) -> &SpatialObservation {
        &self.observed
    }

    pub fn landscape(&self) -> &Landscape {
        &self.landscape
    }

    pub fn origin(&self) -> CellId {
        self.origin
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn params(&self, values: &[f64]) -> Result<SpatialParams> {
        let [epsilon, beta, alpha] = values else {
            return Err(Error::DimensionMismatch {
                expected: 3,
                actual: values.len(),
            });
        };
        Ok(SpatialParams {
            epsilon: *epsilon,
            beta: *beta,
            alpha: *alpha,
            r: self.growth_rate,
            p0: self.initial_prevalence,
        })
    }
}

impl Target for SpatialTarget {
    fn model(&self) -> ModelKind {
        ModelKind::Spatial
    }

    fn parameter_names(&self) -> &[&'static str] {
        &SPATIAL_PARAMETERS
    }

    fn summaries(&self) -> &[SummarySpec] {
        &self.specs
    }

    fn simulate(&self, values: &[f64], seed: u64, truncate: bool) -> Result<Vec<f64>> {
        let params = self.params(values)?;
        let landscape = &*self.landscape;
        let observed = &self.observed.distances;
        let radial_cutoff = match self.specs[0].kind {
            SummaryKind::Below { threshold } if truncate && threshold.is_finite() => Some(threshold),
            _ => None,
        };
        // The intensity disc never holds more than every cell, so
        // infected / n_cells bounds the final intensity from below.
        let infected_cutoff = match self.specs[1].kind {
            SummaryKind::Interval { upper, .. } if truncate && upper < 1.0 => {
                Some(upper * landscape.n_cells() as f64)
            }
            _ => None,
        };

        let mut bound = RadialBound::new(observed, landscape.cell_size());
        let mut radial_lower = 0.0;
        let mut infected = 1usize;
        let origin = self.origin;
        let state = simulate_outbreak_with(&params, landscape, origin, self.horizon, seed, |e| {
            infected += 1;
            if infected_cutoff.is_some_and(|c| infected as f64 > c) {
                return Flow::Stop;
            }
            if radial_cutoff.is_none() || e.time > observed.len() as f64 {
                return Flow::Continue;
            }
            radial_lower = bound.record(e.time, grid_offset_sq(origin, e.cell));
            if radial_cutoff.is_some_and(|c| radial_lower >= c) {
                Flow::Stop
            } else {
                Flow::Continue
            }
        })?;
        if state.truncated_at().is_some() {
            return Ok(vec![radial_lower, infected as f64 / landscape.n_cells() as f64]);
        }
        Ok(vec![
            stats::ss_radial(observed, &state, landscape)?,
            stats::intensity(&state, self.horizon, landscape),
        ])
    }

    fn check_priors(&self, priors: &[PriorSpec]) -> Result<()> {
        default_check(self, priors)?;
        for p in priors {
            if p.natural_bounds().0 <= 0.0 {
                return Err(Error::InvalidParameter(format!(
                    "prior {:?} must have strictly positive support",
                    p.name
                )));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::landscape::uniform_landscape;

    fn sir() -> SirTarget {
        SirTarget::from_truth(
            SirParams { beta: 1.5, gamma: 0.5 },
            SirInit { n: 1000.0, i0: 1.0 },
            vec![1.0, 5.0, 9.0, 13.0, 17.0],
            20.0,
            SummarySpec::below(SIR_SUMMARY, 2000.0).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn sir_truth_scores_zero() {
        let t = sir();
        assert_eq!(t.simulate(&[1.5, 0.5], 0, true).unwrap(), vec![0.0]);
        assert!(t.simulate(&[1.5], 0, true).is_err());
    }

    #[test]
    fn sir_prior_checks() {
        let t = sir();
        let ok = [PriorSpec::uniform("beta", 0.0, 6.0), PriorSpec::uniform("gamma", 0.0, 1.0)];
        assert!(t.check_priors(&ok).is_ok());
        let swapped = [ok[1].clone(), ok[0].clone()];
        assert!(t.check_priors(&swapped).is_err());
        let negative = [PriorSpec::uniform("beta", -1.0, 6.0), ok[1].clone()];
        assert!(t.check_priors(&negative).is_err());
    }

    fn spatial(threshold: f64) -> SpatialTarget {
        let l = Arc::new(uniform_landscape(21, 21, 0.75, 1.0).unwrap());
        let origin = l.centre();
        SpatialTarget::new(
            l,
            origin,
            2.0,
            13.2,
            0.004,
            SpatialObservation {
                distances: vec![1.0, 2.0],
                intensity: 0.5,
            },
            [
                SummarySpec::below(RADIAL_SUMMARY, threshold).unwrap(),
                SummarySpec::around(INTENSITY_SUMMARY, 0.5, 0.1).unwrap(),
            ],
        )
        .unwrap()
    }

    #[test]
    fn truncation_only_skips_rejected_runs() {
        let t = spatial(8.0);
        // Heavy primary transmission seeds far cells immediately.
        let fast = [0.5, 20.0, 2.0];
        let full = t.simulate(&fast, 4, false).unwrap();
        let cut = t.simulate(&fast, 4, true).unwrap();
        assert!(full[0] >= 8.0);
        assert!(cut[0] <= full[0] && cut[1] <= full[1]);
        assert!(!t.summaries()[0].accepts(cut[0]) || !t.summaries()[1].accepts(cut[1]));
        // A run that cannot reach the cutoff is never truncated.
        let slow = [1e-6, 1e-3, 0.5];
        assert_eq!(t.simulate(&slow, 4, true).unwrap(), t.simulate(&slow, 4, false).unwrap());
    }

    #[test]
    fn spatial_validation() {
        let l = Arc::new(Landscape::new(3, 3, 1.0, vec![0.0; 9]).unwrap());
        let obs = SpatialObservation { distances: vec![1.0], intensity: 0.5 };
        let specs = [
            SummarySpec::below(RADIAL_SUMMARY, 10.0).unwrap(),
            SummarySpec::around(INTENSITY_SUMMARY, 0.5, 0.1).unwrap(),
        ];
        assert!(matches!(
            SpatialTarget::new(l, CellId::new(1, 1), 1.0, 13.2, 0.004, obs.clone(), specs.clone()),
            Err(Error::UninfectableOrigin { .. })
        ));
        let l = Arc::new(uniform_landscape(3, 3, 0.5, 1.0).unwrap());
        let long = SpatialObservation { distances: vec![1.0; 3], intensity: 0.5 };
        assert!(SpatialTarget::new(l.clone(), CellId::new(1, 1), 2.0, 13.2, 0.004, long, specs.clone()).is_err());
        let swapped = [specs[1].clone(), specs[0].clone()];
        assert!(SpatialTarget::new(l, CellId::new(1, 1), 2.0, 13.2, 0.004, obs, swapped).is_err());

        let t = spatial(10.0);
        let zero = [
            PriorSpec::uniform("epsilon", 0.0, 1.0),
            PriorSpec::log_uniform("beta", -4.0, 2.0),
            PriorSpec::uniform("alpha", 0.01, 50.0),
        ];
        assert!(t.check_priors(&zero).is_err());
    }
}
