//! Parameter sets shared by the benchmarks.

use cavkin::ModelParams;

/// Organised-phase parameters at twice threshold.
pub fn organised(n: usize) -> ModelParams {
    ModelParams::from_collective(n, -1.0, 100.0, -100.0, 200.0)
}

/// Heavy-tailed cooling parameters (q = 1.4).
pub fn heavy_tail(n: usize) -> ModelParams {
    ModelParams::from_collective(n, -0.1, 100.0, -2.5, 1800.0)
}
