use abcrf::landscape::{CellId, Landscape};
use abcrf::seed::derive;
use abcrf::spatial::{simulate_outbreak, SpatialParams};

/// Kolmogorov-Smirnov distance between `min(T, horizon)` samples and a CDF
/// that is only specified on `[0, horizon]`. `times` holds the samples that
/// fell before the horizon; `n` counts all of them.
pub fn ks_censored(mut times: Vec<f64>, n: usize, cdf: impl Fn(f64) -> f64) -> f64 {
    times.sort_by(f64::total_cmp);
    let n = n as f64;
    let mut d: f64 = 0.0;
    for (k, &t) in times.iter().enumerate() {
        let f = cdf(t);
        d = d.max((f - k as f64 / n).abs()).max(((k + 1) as f64 / n - f).abs());
    }
    d
}

/// One neighbour at 1 km from the origin. Returns the neighbour's
/// infection times over `runs` outbreaks, plus the exact CDF.
pub struct TwoCells {
    pub params: SpatialParams,
    pub h_origin: f64,
    pub h_target: f64,
    pub horizon: f64,
}

impl TwoCells {
    pub fn reference() -> Self {
        Self {
            params: SpatialParams { epsilon: 0.2, beta: 3.0, alpha: 1.0, r: 13.2, p0: 0.004 },
            h_origin: 0.5,
            h_target: 0.8,
            horizon: 3.0,
        }
    }

    /// Cumulative hazard in closed form: the logistic integrates to
    /// `ln(1 - p0 + p0 e^{rt}) / r`.
    pub fn cdf(&self, t: f64) -> f64 {
        let p = &self.params;
        let k = (-1.0 / p.alpha).exp() / (2.0 * std::f64::consts::PI * p.alpha);
        let growth = (1.0 - p.p0 + p.p0 * (p.r * t).exp()).ln() / p.r;
        let cumulative = self.h_target * (p.epsilon * t + p.beta * self.h_origin * k * growth);
        1.0 - (-cumulative).exp()
    }

    pub fn sample(&self, runs: u64, seed: u64) -> Vec<f64> {
        let land = Landscape::new(1, 2, 1.0, vec![self.h_origin, self.h_target]).unwrap();
        (0..runs)
            .filter_map(|k| {
                let s = simulate_outbreak(&self.params, &land, CellId::new(0, 0), self.horizon, derive(seed, &[k]))
                    .unwrap();
                s.infection_time(CellId::new(0, 1))
            })
            .collect()
    }
}

/// A target 2 km from the origin with a dispersal scale so short that the
/// kernel is truncated away: the target sees only the constant primary
/// hazard `h * epsilon`.
pub fn constant_hazard_times(h: f64, epsilon: f64, horizon: f64, runs: u64, seed: u64) -> Vec<f64> {
    let land = Landscape::new(1, 3, 1.0, vec![1.0, 0.0, h]).unwrap();
    let params = SpatialParams { epsilon, beta: 5.0, alpha: 0.01, r: 13.2, p0: 0.004 };
    (0..runs)
        .filter_map(|k| {
            simulate_outbreak(&params, &land, CellId::new(0, 0), horizon, derive(seed, &[k]))
                .unwrap()
                .infection_time(CellId::new(0, 2))
        })
        .collect()
}
