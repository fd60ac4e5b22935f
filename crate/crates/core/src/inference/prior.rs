use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::Particle;
use crate::error::{Error, Result};
use crate::seed::{self, stream};

/// Scale on which a prior is uniform.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Scale {
    #[default]
    Natural,
    /// Uniform in `log10(value)`; bounds are exponents.
    Log10,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriorSpec {
    pub name: String,
    #[serde(default)]
    pub scale: Scale,
    pub lower: f64,
    pub upper: f64,
}

impl PriorSpec {
    pub fn uniform(name: impl Into<String>, lower: f64, upper: f64) -> Self {
        Self {
            name: name.into(),
            scale: Scale::Natural,
            lower,
            upper,
        }
    }

    pub fn log_uniform(name: impl Into<String>, lower_exp: f64, upper_exp: f64) -> Self {
        Self {
            name: name.into(),
            scale: Scale::Log10,
            lower: lower_exp,
            upper: upper_exp,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lower.is_finite() && self.upper.is_finite() && self.lower < self.upper) {
            return Err(Error::InvalidParameter(format!(
                "prior {:?}: bounds [{}, {}] must be finite with lower < upper",
                self.name, self.lower, self.upper
            )));
        }
        Ok(())
    }

    /// Support on the natural scale.
    pub fn natural_bounds(&self) -> (f64, f64) {
        match self.scale {
            Scale::Natural => (self.lower, self.upper),
            Scale::Log10 => (10f64.powf(self.lower), 10f64.powf(self.upper)),
        }
    }

    pub fn to_sampling(&self, natural: f64) -> f64 {
        match self.scale {
            Scale::Natural => natural,
            Scale::Log10 => natural.log10().clamp(self.lower, self.upper),
        }
    }

    pub fn contains(&self, natural: f64) -> bool {
        let (lo, hi) = self.natural_bounds();
        lo <= natural && natural <= hi
    }

    /// One draw, returned on the natural scale.
    pub fn sample(&self, rng: &mut seed::Rng) -> f64 {
        let u = self.lower + rng.gen::<f64>() * (self.upper - self.lower);
        let (lo, hi) = self.natural_bounds();
        match self.scale {
            Scale::Natural => u.clamp(lo, hi),
            Scale::Log10 => 10f64.powf(u).clamp(lo, hi),
        }
    }
}

pub fn validate_priors(priors: &[PriorSpec]) -> Result<()> {
    if priors.is_empty() {
        return Err(Error::InvalidParameter("at least one prior is required".into()));
    }
    for (k, p) in priors.iter().enumerate() {
        p.validate()?;
        if priors[..k].iter().any(|q| q.name == p.name) {
            return Err(Error::InvalidParameter(format!(
                "prior {:?} is declared twice",
                p.name
            )));
        }
    }
    Ok(())
}

/// Particle `index` of the stream `stage` under `master`, unevaluated.
pub(crate) fn draw_particle(priors: &[PriorSpec], master: u64, stage: u64, index: u64) -> Particle {
    let mut rng = seed::rng(seed::derive(master, &[stage, index, stream::PRIOR]));
    let params: Vec<f64> = priors.iter().map(|p| p.sample(&mut rng)).collect();
    Particle::new(
        index,
        seed::derive(master, &[stage, index, stream::SIMULATION]),
        params,
        priors,
    )
}

/// `n` independent prior draws; deterministic per seed.
pub fn sample_prior(priors: &[PriorSpec], n: usize, seed: u64) -> Result<Vec<Particle>> {
    validate_priors(priors)?;
    Ok((0..n as u64)
        .map(|i| draw_particle(priors, seed, stream::PRIOR, i))
        .collect())
}
