//! Shared fixtures for the benchmarks.

use swayrank_core::features::Trajectory;
use swayrank_core::rng;
use swayrank_core::{draw_dataset, Dataset, Scenario, SimConfig, SummaryDim};

/// Scenario-one cohort at the default noise level.
pub fn cohort(n: usize, seed: u64) -> Dataset {
    draw_dataset(&SimConfig::new(Scenario::One, 0.5, n, seed), SummaryDim::Basic).expect("valid config")
}

/// Deterministic 70 s two-foot trajectory sampled at 40 Hz.
pub fn trajectory(seed: u64) -> Trajectory {
    let mut s = seed;
    let mut step = || {
        s = rng::derive_seed(s, &[1]);
        (s >> 11) as f64 / (1u64 << 53) as f64 - 0.5
    };
    let mut l = [-100.0, 0.0];
    let mut r = [100.0, 0.0];
    let pos: Vec<_> = (0..=2800)
        .map(|_| {
            for p in [&mut l, &mut r] {
                p[0] += step();
                p[1] += step();
            }
            (l, r)
        })
        .collect();
    Trajectory::regular(0.025, &pos).expect("finite samples")
}
