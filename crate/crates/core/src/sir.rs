//! Deterministic SIR compartment model.
//!
//! `dS/dt = -beta*S*I/N`, `dI/dt = beta*S*I/N - gamma*I`, `dR/dt = gamma*I`,
//! integrated with classical fourth-order Runge-Kutta on a fixed grid.
//! Observations are read at grid points, never interpolated.

use crate::error::{Error, Result};

/// Default integration step in days.
pub const DEFAULT_STEP: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SirParams {
    /// Transmission rate per day.
    pub beta: f64,
    /// Recovery rate per day.
    pub gamma: f64,
}

impl SirParams {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("beta", self.beta), ("gamma", self.gamma)] {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::InvalidParameter(format!(
                    "{name} must be finite and non-negative, got {v}"
                )));
            }
        }
        Ok(())
    }
}

/// Initial condition: `S0 = n - i0`, `I0 = i0`, `R0 = 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SirInit {
    pub n: f64,
    pub i0: f64,
}

impl SirInit {
    pub fn validate(&self) -> Result<()> {
        if !(self.n.is_finite() && self.i0.is_finite() && self.i0 > 0.0 && self.i0 <= self.n) {
            return Err(Error::InvalidParameter(format!(
                "initial infected must satisfy 0 < i0 <= n, got i0 = {}, n = {}",
                self.i0, self.n
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SirTrajectory {
    pub times: Vec<f64>,
    pub s: Vec<f64>,
    pub i: Vec<f64>,
    pub r: Vec<f64>,
}

impl SirTrajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }
}

/// Fixed-step RK4 integrator.
#[derive(Debug, Clone, Copy)]
pub struct SirSolver {
    step: f64,
}

impl Default for SirSolver {
    fn default() -> Self {
        Self { step: DEFAULT_STEP }
    }
}

impl SirSolver {
    pub fn new(step: f64) -> Result<Self> {
        if !(step.is_finite() && step > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "integration step must be positive, got {step}"
            )));
        }
        Ok(Self { step })
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    /// Integrates from t = 0 and records the state at each observation time.
    pub fn solve(
        &self,
        params: SirParams,
        init: SirInit,
        obs_times: &[f64],
        horizon: f64,
    ) -> Result<SirTrajectory> {
        params.validate()?;
        init.validate()?;
        let grid_steps = self.grid_indices(obs_times, horizon)?;

        let n = init.n;
        let (beta, gamma, h) = (params.beta, params.gamma, self.step);
        let deriv = |s: f64, i: f64| -> (f64, f64, f64) {
            let infection = beta * s * i / n;
            let recovery = gamma * i;
            (-infection, infection - recovery, recovery)
        };

        let mut out = SirTrajectory {
            times: Vec::with_capacity(obs_times.len()),
            s: Vec::with_capacity(obs_times.len()),
            i: Vec::with_capacity(obs_times.len()),
            r: Vec::with_capacity(obs_times.len()),
        };
        let (mut s, mut i, mut r) = (n - init.i0, init.i0, 0.0);
        let mut k = 0usize;
        for (&t, &target) in obs_times.iter().zip(&grid_steps) {
            while k < target {
                let (s1, i1, r1) = deriv(s, i);
                let (s2, i2, r2) = deriv(s + 0.5 * h * s1, i + 0.5 * h * i1);
                let (s3, i3, r3) = deriv(s + 0.5 * h * s2, i + 0.5 * h * i2);
                let (s4, i4, r4) = deriv(s + h * s3, i + h * i3);
                s += h / 6.0 * (s1 + 2.0 * s2 + 2.0 * s3 + s4);
                i += h / 6.0 * (i1 + 2.0 * i2 + 2.0 * i3 + i4);
                r += h / 6.0 * (r1 + 2.0 * r2 + 2.0 * r3 + r4);
                k += 1;
            }
            out.times.push(t);
            out.s.push(s);
            out.i.push(i);
            out.r.push(r);
        }
        Ok(out)
    }

    fn grid_indices(&self, obs_times: &[f64], horizon: f64) -> Result<Vec<usize>> {
        if obs_times.is_empty() {
            return Err(Error::InvalidInput("observation times are empty".into()));
        }
        if !(horizon.is_finite() && horizon >= 0.0) {
            return Err(Error::InvalidInput(format!("invalid horizon {horizon}")));
        }
        let mut prev = 0usize;
        obs_times
            .iter()
            .map(|&t| {
                if !t.is_finite() || t < 0.0 || t > horizon {
                    return Err(Error::InvalidInput(format!(
                        "observation time {t} is outside [0, {horizon}]"
                    )));
                }
                let exact = t / self.step;
                let k = exact.round();
                if (k - exact).abs() > 1e-6 {
                    return Err(Error::InvalidInput(format!(
                        "observation time {t} is not a multiple of the step {}",
                        self.step
                    )));
                }
                let k = k as usize;
                if k < prev {
                    return Err(Error::InvalidInput(
                        "observation times must be sorted".into(),
                    ));
                }
                prev = k;
                Ok(k)
            })
            .collect()
    }
}

/// Integrates with the default 0.01-day RK4 step.
pub fn simulate_sir(
    params: SirParams,
    init: SirInit,
    obs_times: &[f64],
    horizon: f64,
) -> Result<SirTrajectory> {
    SirSolver::default().solve(params, init, obs_times, horizon)
}
