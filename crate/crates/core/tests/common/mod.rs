//! Oracles shared by the integration tests and the acceptance report.
#![allow(dead_code)]

pub mod forest;
pub mod thinning;

/// Infected counts at t = 1, 5, 9, 13, 17 for beta 1.5, gamma 0.5, N 1000,
/// I0 1, from forward Euler with step 1e-5.
pub const SIR_EULER_I: [f64; 5] = [
    2.7098228333492123,
    111.04302082188443,
    256.0273266799299,
    68.42874092405971,
    13.900215288152896,
];
