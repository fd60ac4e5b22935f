//! Stochastic, spatially explicit epidemic on a host landscape.
//!
//! A susceptible cell `i` becomes infected with hazard
//!
//! ```text
//! lambda_i(t) = h_i * (epsilon + beta * sum_{j infected, j != i} h_j * rho_j(t) * K(alpha, d_ij))
//! ```
//!
//! where `rho_j` is the logistic within-cell prevalence of an infected cell
//! and `K(alpha, d) = exp(-d / alpha) / (2 pi alpha)`.
//!
//! Because every `rho_j(t)` grows over time, the hazards are not constant
//! between events and a frozen-rate Gillespie step would be biased. Event
//! times are drawn by thinning instead: each susceptible cell carries the
//! bound obtained by setting all `rho_j` to 1, candidate events are proposed
//! from the superposition of those bounds, and a candidate at cell `i` and
//! time `t` is kept with probability `lambda_i(t) / bound_i`. Bounds only
//! change when a cell becomes infected, so they are updated incrementally.

use std::f64::consts::PI;

use rand::Rng as _;

use crate::error::{Error, Result};
use crate::landscape::{CellId, Landscape};
use crate::seed;

/// Kernel terms below this fraction of `K(alpha, 0)` are dropped by the simulator.
pub const KERNEL_CUTOFF: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpatialParams {
    /// Primary (external) transmission rate, per year.
    pub epsilon: f64,
    /// Secondary transmission rate, per year.
    pub beta: f64,
    /// Dispersal scale, km.
    pub alpha: f64,
    /// Within-cell logistic growth rate, per year.
    pub r: f64,
    /// Within-cell prevalence at the moment of infection.
    pub p0: f64,
}

impl SpatialParams {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("epsilon", self.epsilon),
            ("beta", self.beta),
            ("alpha", self.alpha),
            ("r", self.r),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "{name} must be finite and positive, got {v}"
                )));
            }
        }
        if !(self.p0 > 0.0 && self.p0 < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "p0 must lie in (0, 1), got {}",
                self.p0
            )));
        }
        Ok(())
    }
}

/// Exponential dispersal kernel, per km².
pub fn kernel(alpha: f64, d: f64) -> Result<f64> {
    if !(alpha.is_finite() && alpha > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "dispersal scale must be positive, got {alpha}"
        )));
    }
    if !(d >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "distance must be non-negative, got {d}"
        )));
    }
    Ok(kernel_unchecked(alpha, d))
}

#[inline]
fn kernel_unchecked(alpha: f64, d: f64) -> f64 {
    (-d / alpha).exp() / (2.0 * PI * alpha)
}

/// Logistic within-cell prevalence of a cell infected at `t_i`.
pub fn local_prevalence(params: &SpatialParams, t: f64, t_i: f64) -> Result<f64> {
    if !(t >= t_i) {
        return Err(Error::InvalidInput(format!(
            "prevalence queried at t = {t} before the infection time {t_i}"
        )));
    }
    Ok(prevalence(params.r, params.p0, t - t_i))
}

#[inline]
fn prevalence(r: f64, p0: f64, elapsed: f64) -> f64 {
    1.0 / (1.0 + (1.0 / p0 - 1.0) * (-r * elapsed).exp())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Infection {
    pub cell: CellId,
    pub time: f64,
}

/// Infection record of one outbreak.
#[derive(Debug, Clone, PartialEq)]
pub struct OutbreakState {
    n_rows: usize,
    n_cols: usize,
    infection_time: Vec<Option<f64>>,
    events: Vec<Infection>,
    origin: CellId,
    horizon: f64,
    truncated_at: Option<f64>,
}

impl OutbreakState {
    fn start(landscape: &Landscape, origin: CellId, horizon: f64) -> Result<Self> {
        let idx = landscape.index(origin)?;
        let mut infection_time = vec![None; landscape.n_cells()];
        infection_time[idx] = Some(0.0);
        Ok(Self {
            n_rows: landscape.n_rows(),
            n_cols: landscape.n_cols(),
            infection_time,
            events: vec![Infection {
                cell: origin,
                time: 0.0,
            }],
            origin,
            horizon,
            truncated_at: None,
        })
    }

    /// Assembles a state from a known infection list. The origin is infected
    /// at time 0 and must not appear in `infections`.
    pub fn from_infections(
        landscape: &Landscape,
        origin: CellId,
        horizon: f64,
        infections: &[Infection],
    ) -> Result<Self> {
        if !(horizon.is_finite() && horizon > 0.0) {
            return Err(Error::InvalidInput(format!("invalid horizon {horizon}")));
        }
        let mut state = Self::start(landscape, origin, horizon)?;
        let mut sorted = infections.to_vec();
        sorted.sort_by(|a, b| a.time.total_cmp(&b.time));
        for inf in sorted {
            let idx = landscape.index(inf.cell)?;
            if !(0.0..=horizon).contains(&inf.time) {
                return Err(Error::InvalidInput(format!(
                    "infection time {} outside [0, {horizon}]",
                    inf.time
                )));
            }
            if let Some(t) = state.infection_time[idx] {
                return Err(Error::AlreadyInfected {
                    row: inf.cell.row,
                    col: inf.cell.col,
                    t,
                });
            }
            state.infect(idx, inf.cell, inf.time);
        }
        Ok(state)
    }

    fn infect(&mut self, idx: usize, cell: CellId, time: f64) {
        self.infection_time[idx] = Some(time);
        self.events.push(Infection { cell, time });
    }

    pub fn origin(&self) -> CellId {
        self.origin
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.n_rows, self.n_cols)
    }

    /// Infections in event order, origin first.
    pub fn infections(&self) -> &[Infection] {
        &self.events
    }

    pub fn infection_time(&self, cell: CellId) -> Option<f64> {
        if cell.row >= self.n_rows || cell.col >= self.n_cols {
            return None;
        }
        self.infection_time[cell.row * self.n_cols + cell.col]
    }

    /// Number of cells infected at or before `t`.
    pub fn infected_by(&self, t: f64) -> usize {
        self.events.partition_point(|e| e.time <= t)
    }

    /// Time at which an observer stopped the run early, if it did.
    pub fn truncated_at(&self) -> Option<f64> {
        self.truncated_at
    }

    /// Writes `row,col,infection_time` rows in event order.
    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["row", "col", "infection_time"])?;
        for e in &self.events {
            w.write_record([e.cell.row.to_string(), e.cell.col.to_string(), e.time.to_string()])?;
        }
        w.flush().map_err(|e| Error::io("<outbreak csv>", e))?;
        Ok(())
    }
}

/// Instantaneous infection hazard of a susceptible cell, per year.
///
/// Evaluated exactly over every infected cell, without kernel truncation.
pub fn hazard(
    cell: CellId,
    t: f64,
    state: &OutbreakState,
    params: &SpatialParams,
    landscape: &Landscape,
) -> Result<f64> {
    let h_i = landscape.density(cell)?;
    if let Some(t_i) = state.infection_time(cell) {
        if t_i <= t {
            return Err(Error::AlreadyInfected {
                row: cell.row,
                col: cell.col,
                t: t_i,
            });
        }
    }
    let mut pressure = 0.0;
    for e in state.infections().iter().take_while(|e| e.time <= t) {
        if e.cell == cell {
            continue;
        }
        let h_j = landscape.density(e.cell)?;
        let d = landscape.distance(cell, e.cell)?;
        pressure += h_j * prevalence(params.r, params.p0, t - e.time) * kernel_unchecked(params.alpha, d);
    }
    Ok(h_i * (params.epsilon + params.beta * pressure))
}

/// Returned by an observer to continue or stop a simulation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Flow {
    Continue,
    Stop,
}

pub fn simulate_outbreak(
    params: &SpatialParams,
    landscape: &Landscape,
    origin: CellId,
    horizon: f64,
    seed: u64,
) -> Result<OutbreakState> {
    simulate_outbreak_with(params, landscape, origin, horizon, seed, |_| Flow::Continue)
}

/// Runs one outbreak, calling `observer` after every new infection (the
/// origin excluded). Returning [`Flow::Stop`] ends the run early and records
/// the stopping time in [`OutbreakState::truncated_at`].
pub fn simulate_outbreak_with<F>(
    params: &SpatialParams,
    landscape: &Landscape,
    origin: CellId,
    horizon: f64,
    seed: u64,
    mut observer: F,
) -> Result<OutbreakState>
where
    F: FnMut(&Infection) -> Flow,
{
    params.validate()?;
    if !(horizon.is_finite() && horizon > 0.0) {
        return Err(Error::InvalidInput(format!(
            "horizon must be positive, got {horizon}"
        )));
    }
    if landscape.density(origin)? <= 0.0 {
        return Err(Error::UninfectableOrigin {
            row: origin.row,
            col: origin.col,
        });
    }

    let mut state = OutbreakState::start(landscape, origin, horizon)?;
    let mut rng = seed::rng(seed);
    let kernel = KernelTable::new(params.alpha, landscape);
    let h = landscape.densities();
    let n = landscape.n_cells();

    // pressure[i] = sum over infected j of h_j * K_ij, i.e. the secondary
    // pressure with every rho_j at its supremum of 1.
    let mut pressure = vec![0.0; n];
    let mut bounds = SumTree::new(n);
    let origin_idx = landscape.index(origin)?;
    for i in 0..n {
        if i != origin_idx {
            bounds.set_leaf(i, h[i] * params.epsilon);
        }
    }
    bounds.rebuild();
    add_source(
        origin_idx,
        landscape,
        &kernel,
        &state,
        params,
        &mut pressure,
        &mut bounds,
    );

    let growth = 1.0 / params.p0 - 1.0;
    let mut t = 0.0;
    loop {
        let total = bounds.total();
        if !total.is_finite() {
            return Err(Error::NonFiniteRate(format!(
                "total hazard bound {total} at t = {t}"
            )));
        }
        if total <= 0.0 {
            break;
        }
        let u: f64 = rng.gen();
        t += -(1.0 - u).ln() / total;
        if t > horizon {
            break;
        }
        let target = bounds.sample(rng.gen::<f64>() * total);
        let bound = bounds.leaf(target);
        if bound <= 0.0 {
            continue;
        }

        let cell = landscape.cell(target);
        let mut actual_pressure = 0.0;
        for e in state.infections() {
            let k = kernel.get(cell, e.cell);
            if k > 0.0 {
                let rho = 1.0 / (1.0 + growth * (-params.r * (t - e.time)).exp());
                actual_pressure += h[e.cell.row * landscape.n_cols() + e.cell.col] * rho * k;
            }
        }
        let rate = h[target] * (params.epsilon + params.beta * actual_pressure);
        if rng.gen::<f64>() * bound >= rate {
            continue;
        }

        state.infect(target, cell, t);
        bounds.set(target, 0.0);
        add_source(
            target,
            landscape,
            &kernel,
            &state,
            params,
            &mut pressure,
            &mut bounds,
        );
        let event = *state.events.last().expect("just pushed");
        if observer(&event) == Flow::Stop {
            state.truncated_at = Some(t);
            break;
        }
    }
    Ok(state)
}

/// Adds newly infected cell `source` to the cached bounds of every
/// susceptible cell within kernel range.
fn add_source(
    source: usize,
    landscape: &Landscape,
    kernel: &KernelTable,
    state: &OutbreakState,
    params: &SpatialParams,
    pressure: &mut [f64],
    bounds: &mut SumTree,
) {
    let h = landscape.densities();
    let n_cols = landscape.n_cols();
    let src = landscape.cell(source);
    let reach = kernel.reach;
    let rows = src.row.saturating_sub(reach)..(src.row + reach + 1).min(landscape.n_rows());
    let cols = src.col.saturating_sub(reach)..(src.col + reach + 1).min(n_cols);
    let touched = rows.len() * cols.len();
    // Per-leaf propagation beats a full rebuild only for small neighbourhoods.
    let propagate = touched * bounds.depth() < bounds.capacity();

    for row in rows {
        for col in cols.clone() {
            let i = row * n_cols + col;
            if state.infection_time[i].is_some() || h[i] == 0.0 {
                continue;
            }
            let k = kernel.get(CellId::new(row, col), src);
            if k == 0.0 {
                continue;
            }
            pressure[i] += h[source] * k;
            let b = h[i] * (params.epsilon + params.beta * pressure[i]);
            if propagate {
                bounds.set(i, b);
            } else {
                bounds.set_leaf(i, b);
            }
        }
    }
    if !propagate {
        bounds.rebuild();
    }
}

/// Kernel values indexed by absolute grid offset, with truncated entries zeroed.
struct KernelTable {
    n_cols: usize,
    values: Vec<f64>,
    /// Offsets beyond this many cells in either axis are always truncated.
    reach: usize,
}

impl KernelTable {
    fn new(alpha: f64, landscape: &Landscape) -> Self {
        let (n_rows, n_cols) = (landscape.n_rows(), landscape.n_cols());
        let size = landscape.cell_size();
        let k0 = kernel_unchecked(alpha, 0.0);
        let max_d = -alpha * KERNEL_CUTOFF.ln();
        let reach = ((max_d / size).ceil() as usize).min(n_rows.max(n_cols));
        let mut values = vec![0.0; n_rows * n_cols];
        for dr in 0..n_rows {
            for dc in 0..n_cols {
                if dr == 0 && dc == 0 {
                    continue;
                }
                let d = size * ((dr * dr + dc * dc) as f64).sqrt();
                let k = kernel_unchecked(alpha, d);
                if k >= KERNEL_CUTOFF * k0 {
                    values[dr * n_cols + dc] = k;
                }
            }
        }
        Self {
            n_cols,
            values,
            reach,
        }
    }

    #[inline]
    fn get(&self, a: CellId, b: CellId) -> f64 {
        self.values[a.row.abs_diff(b.row) * self.n_cols + a.col.abs_diff(b.col)]
    }
}

/// Complete binary tree of partial sums over per-cell rate bounds.
struct SumTree {
    leaves: usize,
    nodes: Vec<f64>,
}

impl SumTree {
    fn new(n: usize) -> Self {
        let leaves = n.next_power_of_two().max(1);
        Self {
            leaves,
            nodes: vec![0.0; 2 * leaves],
        }
    }

    fn capacity(&self) -> usize {
        self.nodes.len()
    }

    fn depth(&self) -> usize {
        self.leaves.trailing_zeros() as usize + 1
    }

    fn total(&self) -> f64 {
        self.nodes[1]
    }

    fn leaf(&self, i: usize) -> f64 {
        self.nodes[self.leaves + i]
    }

    fn set_leaf(&mut self, i: usize, v: f64) {
        self.nodes[self.leaves + i] = v;
    }

    fn set(&mut self, i: usize, v: f64) {
        let mut k = self.leaves + i;
        self.nodes[k] = v;
        while k > 1 {
            k /= 2;
            self.nodes[k] = self.nodes[2 * k] + self.nodes[2 * k + 1];
        }
    }

    fn rebuild(&mut self) {
        for k in (1..self.leaves).rev() {
            self.nodes[k] = self.nodes[2 * k] + self.nodes[2 * k + 1];
        }
    }

    /// Leaf whose cumulative interval contains `u`, for `0 <= u < total`.
    fn sample(&self, mut u: f64) -> usize {
        let mut k = 1;
        while k < self.leaves {
            let left = self.nodes[2 * k];
            if u < left || self.nodes[2 * k + 1] <= 0.0 {
                k *= 2;
            } else {
                u -= left;
                k = 2 * k + 1;
            }
        }
        k - self.leaves
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::landscape::uniform_landscape;

    fn params(epsilon: f64, beta: f64, alpha: f64) -> SpatialParams {
        SpatialParams {
            epsilon,
            beta,
            alpha,
            r: 13.2,
            p0: 0.004,
        }
    }

    #[test]
    fn kernel_values() {
        assert!((kernel(0.5, 0.0).unwrap() - std::f64::consts::FRAC_1_PI).abs() < 1e-15);
        assert!((kernel(0.5, 0.5).unwrap() - 0.117_099_663_048_638_3).abs() < 1e-15);
        assert!(kernel(1.0, 1e4).unwrap() < 1e-300);
        assert!(kernel(0.0, 1.0).is_err());
        assert!(kernel(-1.0, 1.0).is_err());
        assert!(kernel(1.0, -1.0).is_err());
    }

    #[test]
    fn prevalence_values() {
        let p = params(1e-4, 8.0, 0.5);
        assert_eq!(local_prevalence(&p, 2.0, 2.0).unwrap(), 0.004);
        let half = SpatialParams { p0: 0.5, r: 3.7, ..p };
        assert_eq!(local_prevalence(&half, 1.0, 1.0).unwrap(), 0.5);
        // 1 / (1 + 249 e^{-6.6}) evaluated to 30 digits.
        let v = local_prevalence(&p, 0.5, 0.0).unwrap();
        assert!((v - 0.746_975_696_332_994_7).abs() < 1e-12, "{v}");
        assert!(local_prevalence(&p, 0.9, 1.0).is_err());
    }

    #[test]
    fn prevalence_is_monotone_and_bounded() {
        let p = params(1e-4, 8.0, 0.5);
        let mut prev = 0.0;
        for k in 0..200 {
            let v = local_prevalence(&p, k as f64 * 0.01, 0.0).unwrap();
            assert!(v >= p.p0 && v < 1.0 && v >= prev);
            prev = v;
        }
    }

    #[test]
    fn hazard_cases() {
        let l = uniform_landscape(5, 5, 0.75, 1.0).unwrap();
        let origin = CellId::new(2, 2);
        let empty = OutbreakState::start(&l, origin, 4.0).unwrap();
        // A susceptible cell far beyond reach only feels primary transmission
        // when beta is zero.
        let p = params(1e-4, 0.0, 0.5);
        let v = hazard(CellId::new(0, 0), 1.0, &empty, &p, &l).unwrap();
        assert!((v - 7.5e-5).abs() < 1e-18);

        let mut h = vec![0.75; 25];
        h[0] = 0.0;
        let holes = crate::landscape::Landscape::new(5, 5, 1.0, h).unwrap();
        let state = OutbreakState::start(&holes, origin, 4.0).unwrap();
        assert_eq!(hazard(CellId::new(0, 0), 1.0, &state, &params(1.0, 50.0, 5.0), &holes).unwrap(), 0.0);

        // One infected neighbour at distance 1 with prevalence 0.5.
        let p = SpatialParams {
            epsilon: 0.0,
            beta: 8.0,
            alpha: 0.5,
            r: 2.0,
            p0: 0.5,
        };
        let v = hazard(CellId::new(2, 3), 0.0, &empty, &p, &l).unwrap();
        assert!((v - 0.096_926_756_858_318_83).abs() < 1e-12, "{v}");

        assert!(matches!(
            hazard(origin, 1.0, &empty, &p, &l),
            Err(Error::AlreadyInfected { .. })
        ));
    }

    #[test]
    fn sum_tree_sampling() {
        let mut tree = SumTree::new(5);
        for (i, v) in [1.0, 0.0, 2.0, 0.0, 1.0].into_iter().enumerate() {
            tree.set(i, v);
        }
        assert_eq!(tree.total(), 4.0);
        assert_eq!(tree.sample(0.5), 0);
        assert_eq!(tree.sample(1.0), 2);
        assert_eq!(tree.sample(2.9), 2);
        assert_eq!(tree.sample(3.5), 4);
        tree.set_leaf(4, 3.0);
        tree.rebuild();
        assert_eq!(tree.total(), 6.0);
    }

    #[test]
    fn rejects_bad_configuration() {
        let mut h = vec![0.75; 9];
        h[4] = 0.0;
        let l = crate::landscape::Landscape::new(3, 3, 1.0, h).unwrap();
        let err = simulate_outbreak(&params(1e-4, 8.0, 0.5), &l, CellId::new(1, 1), 1.0, 1).unwrap_err();
        assert!(matches!(err, Error::UninfectableOrigin { row: 1, col: 1 }));
        assert!(simulate_outbreak(&params(1e-4, 8.0, 0.5), &l, CellId::new(3, 0), 1.0, 1).is_err());
        assert!(simulate_outbreak(&params(1e-4, 8.0, 0.5), &l, CellId::new(0, 0), 0.0, 1).is_err());
        assert!(simulate_outbreak(&params(-1.0, 8.0, 0.5), &l, CellId::new(0, 0), 1.0, 1).is_err());
    }

    #[test]
    fn isolated_origin_stays_alone() {
        let l = uniform_landscape(20, 20, 0.75, 1.0).unwrap();
        let p = params(1e-300, 1e-300, 0.5);
        let s = simulate_outbreak(&p, &l, l.centre(), 4.0, 9).unwrap();
        assert_eq!(s.infections().len(), 1);
        assert_eq!(s.infection_time(l.centre()), Some(0.0));
    }

    #[test]
    fn events_are_ordered_and_unique() {
        let l = uniform_landscape(30, 30, 0.75, 1.0).unwrap();
        for seed in 0..10 {
            let s = simulate_outbreak(&params(0.01, 20.0, 1.0), &l, l.centre(), 2.0, seed).unwrap();
            let ev = s.infections();
            assert!(ev.windows(2).all(|w| w[0].time <= w[1].time));
            let mut cells: Vec<_> = ev.iter().map(|e| e.cell).collect();
            cells.sort();
            cells.dedup();
            assert_eq!(cells.len(), ev.len());
            assert!(ev.iter().all(|e| e.time >= 0.0 && e.time <= 2.0));
        }
    }

    #[test]
    fn seeded_runs_repeat() {
        let l = uniform_landscape(30, 30, 0.75, 1.0).unwrap();
        let p = params(0.001, 8.0, 0.5);
        let a = simulate_outbreak(&p, &l, l.centre(), 4.0, 42).unwrap();
        let b = simulate_outbreak(&p, &l, l.centre(), 4.0, 42).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn observer_can_stop_early() {
        let l = uniform_landscape(30, 30, 1.0, 1.0).unwrap();
        let mut seen = 0;
        let s = simulate_outbreak_with(&params(1.0, 8.0, 0.5), &l, l.centre(), 4.0, 3, |_| {
            seen += 1;
            if seen == 5 {
                Flow::Stop
            } else {
                Flow::Continue
            }
        })
        .unwrap();
        assert_eq!(s.infections().len(), 6);
        assert_eq!(s.truncated_at(), Some(s.infections()[5].time));
    }

    #[test]
    fn outbreak_csv() {
        let l = uniform_landscape(4, 4, 1.0, 1.0).unwrap();
        let s = OutbreakState::from_infections(
            &l,
            CellId::new(0, 0),
            2.0,
            &[Infection { cell: CellId::new(1, 2), time: 0.25 }],
        )
        .unwrap();
        let mut buf = Vec::new();
        s.write_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "row,col,infection_time\n0,0,0\n1,2,0.25\n");
    }
}
