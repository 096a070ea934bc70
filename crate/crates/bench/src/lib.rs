//! Fixtures shared by the benchmarks.

use tailgarch::{simulate_garch, ErrorDist, GarchParams, SimConfig};

/// Seeded GARCH(1,1) sample with `theta = (0.05, 0.05, 0.90)`.
pub fn sample(n: usize, dist: &ErrorDist, seed: u64) -> Vec<f64> {
    let theta = GarchParams::new(0.05, 0.05, 0.90).expect("valid parameters");
    simulate_garch(&theta, dist, n, seed, &SimConfig::default()).expect("valid simulation")
}
