mod common;

use abcrf::sir::{simulate_sir, SirInit, SirParams};
use common::SIR_EULER_I;
use proptest::prelude::*;

const TIMES: [f64; 5] = [1.0, 5.0, 9.0, 13.0, 17.0];

#[test]
fn matches_fine_euler_reference() {
    let traj = simulate_sir(
        SirParams { beta: 1.5, gamma: 0.5 },
        SirInit { n: 1000.0, i0: 1.0 },
        &TIMES,
        20.0,
    )
    .unwrap();
    assert_eq!(traj.times, TIMES);
    for (got, want) in traj.i.iter().zip(SIR_EULER_I) {
        assert!((got - want).abs() < 0.1, "{got} vs {want}");
    }
}

proptest! {
    #[test]
    fn population_is_conserved(
        beta in 0.0f64..6.0,
        gamma in 0.0f64..1.0,
        n in 10.0f64..1e5,
        frac in 1e-4f64..1.0,
    ) {
        let init = SirInit { n, i0: (n * frac).max(1e-3) };
        let times: Vec<f64> = (0..=20).map(|k| k as f64).collect();
        let traj = simulate_sir(SirParams { beta, gamma }, init, &times, 20.0).unwrap();
        for k in 0..traj.len() {
            let total = traj.s[k] + traj.i[k] + traj.r[k];
            prop_assert!((total - n).abs() <= 1e-6 * n);
            prop_assert!(traj.s[k] >= -1e-9 * n && traj.r[k] >= -1e-9 * n);
            if k > 0 {
                prop_assert!(traj.s[k] <= traj.s[k - 1] + 1e-9 * n);
                prop_assert!(traj.r[k] >= traj.r[k - 1] - 1e-9 * n);
            }
        }
    }
}
