//! Summary statistics, acceptance rules and logistic calibration.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::landscape::{grid_offset_sq, Landscape};
use crate::spatial::OutbreakState;

/// Acceptance rule for one summary statistic.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SummaryKind {
    /// Accept when `value < threshold`.
    Below { threshold: f64 },
    /// Accept when `lower <= value <= upper`.
    Interval { lower: f64, upper: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummarySpec {
    pub name: String,
    #[serde(flatten)]
    pub kind: SummaryKind,
}

impl SummarySpec {
    pub fn below(name: impl Into<String>, threshold: f64) -> Result<Self> {
        let spec = Self {
            name: name.into(),
            kind: SummaryKind::Below { threshold },
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn interval(name: impl Into<String>, lower: f64, upper: f64) -> Result<Self> {
        let spec = Self {
            name: name.into(),
            kind: SummaryKind::Interval { lower, upper },
        };
        spec.validate()?;
        Ok(spec)
    }

    /// `target ± tolerance`.
    pub fn around(name: impl Into<String>, target: f64, tolerance: f64) -> Result<Self> {
        Self::interval(name, target - tolerance, target + tolerance)
    }

    pub fn validate(&self) -> Result<()> {
        match self.kind {
            SummaryKind::Below { threshold } => {
                if threshold.is_nan() || threshold < 0.0 {
                    return Err(Error::InvalidParameter(format!(
                        "summary {:?}: threshold must be non-negative, got {threshold}",
                        self.name
                    )));
                }
            }
            SummaryKind::Interval { lower, upper } => {
                if lower.is_nan() || upper.is_nan() || lower >= upper {
                    return Err(Error::InvalidParameter(format!(
                        "summary {:?}: interval [{lower}, {upper}] is empty",
                        self.name
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn accepts(&self, value: f64) -> bool {
        match self.kind {
            SummaryKind::Below { threshold } => value < threshold,
            SummaryKind::Interval { lower, upper } => lower <= value && value <= upper,
        }
    }

    pub fn evaluate(&self, value: f64) -> SummaryValue {
        SummaryValue {
            name: self.name.clone(),
            value,
            accepted: self.accepts(value),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryValue {
    pub name: String,
    pub value: f64,
    pub accepted: bool,
}

fn squared_deviation(observed: &[f64], simulated: &[f64]) -> Result<f64> {
    if observed.is_empty() || observed.len() != simulated.len() {
        return Err(Error::DimensionMismatch {
            expected: observed.len().max(1),
            actual: simulated.len(),
        });
    }
    Ok(observed
        .iter()
        .zip(simulated)
        .map(|(o, s)| (o - s) * (o - s))
        .sum())
}

/// Sum of squared differences between observed and simulated infected counts.
pub fn ss_sir(observed: &[f64], simulated: &[f64]) -> Result<f64> {
    squared_deviation(observed, simulated)
}

fn max_spread_sq(state: &OutbreakState, t: f64) -> f64 {
    let origin = state.origin();
    state
        .infections()
        .iter()
        .take_while(|e| e.time <= t)
        .map(|e| grid_offset_sq(origin, e.cell))
        .fold(0.0, f64::max)
}

/// Largest origin-to-cell distance over cells infected by `t`, in km.
pub fn max_spread(state: &OutbreakState, t: f64, landscape: &Landscape) -> f64 {
    landscape.cell_size() * max_spread_sq(state, t).sqrt()
}

/// Maximum spread at `t = 1, 2, ..., years`.
pub fn yearly_spread(state: &OutbreakState, years: usize, landscape: &Landscape) -> Vec<f64> {
    (1..=years)
        .map(|y| max_spread(state, y as f64, landscape))
        .collect()
}

/// Sum of squared deviations of yearly maximum spread, years `1..=observed.len()`.
pub fn ss_radial(observed: &[f64], state: &OutbreakState, landscape: &Landscape) -> Result<f64> {
    if observed.is_empty() {
        return Err(Error::InvalidInput(
            "radial statistic needs at least one observed yearly distance".into(),
        ));
    }
    if (observed.len() as f64) > state.horizon() {
        return Err(Error::InvalidInput(format!(
            "{} yearly distances observed but the outbreak only covers {} years",
            observed.len(),
            state.horizon()
        )));
    }
    squared_deviation(observed, &yearly_spread(state, observed.len(), landscape))
}

/// Infected cells by `t` divided by the number of cells whose centres lie
/// within the current maximum spread of the origin (boundary included).
pub fn intensity(state: &OutbreakState, t: f64, landscape: &Landscape) -> f64 {
    let radius_sq = max_spread_sq(state, t);
    let (n_rows, n_cols) = (landscape.n_rows(), landscape.n_cols());
    let origin = state.origin();
    let reach = radius_sq.sqrt().floor() as usize;
    let mut disc = 0usize;
    for row in origin.row.saturating_sub(reach)..(origin.row + reach + 1).min(n_rows) {
        let dr = row.abs_diff(origin.row) as f64;
        for col in origin.col.saturating_sub(reach)..(origin.col + reach + 1).min(n_cols) {
            let dc = col.abs_diff(origin.col) as f64;
            if dr * dr + dc * dc <= radius_sq {
                disc += 1;
            }
        }
    }
    state.infected_by(t) as f64 / disc as f64
}

/// Lower bound on the radial statistic of a run still in progress.
///
/// Spread is non-decreasing in time, so once it exceeds an observed yearly
/// distance the deviation for that year can only grow.
#[derive(Debug, Clone)]
pub struct RadialBound {
    observed: Vec<f64>,
    cell_size: f64,
    finalized: usize,
    settled: f64,
    spread_sq: f64,
}

impl RadialBound {
    pub fn new(observed: &[f64], cell_size: f64) -> Self {
        Self {
            observed: observed.to_vec(),
            cell_size,
            finalized: 0,
            settled: 0.0,
            spread_sq: 0.0,
        }
    }

    /// Records an infection at `time` whose squared grid offset from the
    /// origin is `offset_sq`, returning the updated lower bound.
    pub fn record(&mut self, time: f64, offset_sq: f64) -> f64 {
        while self.finalized < self.observed.len() && ((self.finalized + 1) as f64) < time {
            let d = self.spread();
            let o = self.observed[self.finalized];
            self.settled += (o - d) * (o - d);
            self.finalized += 1;
        }
        self.spread_sq = self.spread_sq.max(offset_sq);
        let d = self.spread();
        let pending: f64 = self.observed[self.finalized..]
            .iter()
            .map(|o| (d - o).max(0.0).powi(2))
            .sum();
        self.settled + pending
    }

    fn spread(&self) -> f64 {
        self.cell_size * self.spread_sq.sqrt()
    }
}

/// Least-squares fit of the logistic prevalence curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogisticFit {
    pub r: f64,
    pub p0: f64,
    /// Sum of squared residuals at the optimum.
    pub residual: f64,
}

fn logistic(r: f64, p0: f64, t: f64) -> f64 {
    1.0 / (1.0 + (1.0 / p0 - 1.0) * (-r * t).exp())
}

/// Fits `(r, p0)` to `(time, prevalence)` samples: a 20x20 grid over
/// `log r` and `log p0`, then Nelder-Mead from the best grid point.
pub fn fit_logistic(samples: &[(f64, f64)]) -> Result<LogisticFit> {
    if samples.len() < 3 {
        return Err(Error::InvalidInput(format!(
            "logistic fit needs at least 3 samples, got {}",
            samples.len()
        )));
    }
    for &(t, y) in samples {
        if !t.is_finite() || !(y > 0.0 && y < 1.0) {
            return Err(Error::InvalidInput(format!(
                "invalid sample (t = {t}, prevalence = {y}); prevalences must lie in (0, 1)"
            )));
        }
    }
    let first = samples[0].1;
    if samples.iter().all(|&(_, y)| y == first) {
        return Err(Error::InvalidInput(
            "all prevalences are equal; the growth rate is unidentifiable".into(),
        ));
    }

    let objective = |r: f64, p0: f64| -> f64 {
        samples
            .iter()
            .map(|&(t, y)| {
                let e = logistic(r, p0, t) - y;
                e * e
            })
            .sum()
    };

    const GRID: usize = 20;
    let (log_r_lo, log_r_hi) = (0.01f64.ln(), 100.0f64.ln());
    let (log_p_lo, log_p_hi) = (1e-5f64.ln(), 0.95f64.ln());
    let mut best = (f64::INFINITY, 0.0, 0.0);
    for a in 0..GRID {
        let log_r = log_r_lo + (log_r_hi - log_r_lo) * a as f64 / (GRID - 1) as f64;
        for b in 0..GRID {
            let log_p = log_p_lo + (log_p_hi - log_p_lo) * b as f64 / (GRID - 1) as f64;
            let f = objective(log_r.exp(), log_p.exp());
            if f < best.0 {
                best = (f, log_r, log_p);
            }
        }
    }

    // Refine in (log r, logit p0) so that p0 stays inside (0, 1).
    let logit = |p: f64| (p / (1.0 - p)).ln();
    let inv_logit = |x: f64| 1.0 / (1.0 + (-x).exp());
    let start = [best.1, logit(best.2.exp())];
    let (x, f) = nelder_mead(
        |x| objective(x[0].exp(), inv_logit(x[1])),
        start,
        0.25,
        1e-8,
        20_000,
    );
    Ok(LogisticFit {
        r: x[0].exp(),
        p0: inv_logit(x[1]),
        residual: f,
    })
}

/// Two-dimensional Nelder-Mead minimizer. Stops when the spread of objective
/// values across the simplex falls to `tol` relative to the best value, or
/// when the simplex collapses.
fn nelder_mead<F>(f: F, start: [f64; 2], scale: f64, tol: f64, max_iter: usize) -> ([f64; 2], f64)
where
    F: Fn(&[f64; 2]) -> f64,
{
    let mut simplex = [
        start,
        [start[0] + scale, start[1]],
        [start[0], start[1] + scale],
    ];
    let mut values = simplex.map(|p| f(&p));
    let lerp = |a: &[f64; 2], b: &[f64; 2], c: f64| [a[0] + c * (b[0] - a[0]), a[1] + c * (b[1] - a[1])];

    for _ in 0..max_iter {
        let mut order = [0, 1, 2];
        order.sort_by(|&i, &j| values[i].total_cmp(&values[j]));
        simplex = order.map(|i| simplex[i]);
        values = order.map(|i| values[i]);

        let spread = values[2] - values[0];
        let size = (simplex[1][0] - simplex[0][0])
            .abs()
            .max((simplex[1][1] - simplex[0][1]).abs())
            .max((simplex[2][0] - simplex[0][0]).abs())
            .max((simplex[2][1] - simplex[0][1]).abs());
        if spread <= tol * values[0].abs() + 1e-30 || size < 1e-12 {
            break;
        }

        let centroid = [
            0.5 * (simplex[0][0] + simplex[1][0]),
            0.5 * (simplex[0][1] + simplex[1][1]),
        ];
        let reflected = lerp(&centroid, &simplex[2], -1.0);
        let fr = f(&reflected);
        if fr < values[0] {
            let expanded = lerp(&centroid, &simplex[2], -2.0);
            let fe = f(&expanded);
            if fe < fr {
                simplex[2] = expanded;
                values[2] = fe;
            } else {
                simplex[2] = reflected;
                values[2] = fr;
            }
        } else if fr < values[1] {
            simplex[2] = reflected;
            values[2] = fr;
        } else {
            let contracted = if fr < values[2] {
                lerp(&centroid, &reflected, 0.5)
            } else {
                lerp(&centroid, &simplex[2], 0.5)
            };
            let fc = f(&contracted);
            if fc < values[2].min(fr) {
                simplex[2] = contracted;
                values[2] = fc;
            } else {
                for k in 1..3 {
                    simplex[k] = lerp(&simplex[0], &simplex[k], 0.5);
                    values[k] = f(&simplex[k]);
                }
            }
        }
    }
    let best = (0..3)
        .min_by(|&i, &j| values[i].total_cmp(&values[j]))
        .expect("simplex has three vertices");
    (simplex[best], values[best])
}

/// Reads `t,prevalence` samples with a header row.
pub fn load_prevalence_csv(path: impl AsRef<Path>) -> Result<Vec<(f64, f64)>> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::Reader::from_reader(file);
    let headers = reader.headers()?.clone();
    let col = |name: &str| {
        headers.iter().position(|h| h.trim() == name).ok_or_else(|| {
            Error::InvalidInput(format!("{}: missing column {name:?}", path.display()))
        })
    };
    let (t_col, p_col) = (col("t")?, col("prevalence")?);
    let mut samples = Vec::new();
    for (k, record) in reader.records().enumerate() {
        let record = record?;
        let parse = |c: usize| -> Result<f64> {
            let raw = record.get(c).unwrap_or("");
            raw.trim().parse().map_err(|_| {
                Error::InvalidInput(format!(
                    "{}: row {}: non-numeric value {raw:?}",
                    path.display(),
                    k + 1
                ))
            })
        };
        samples.push((parse(t_col)?, parse(p_col)?));
    }
    Ok(samples)
}
