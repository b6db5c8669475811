//! Estimators turning samples and ensemble records into observables.

mod qfit;
mod sweep;

pub use qfit::{fit_q_gaussian, q_gaussian_log_density, QFit, MIN_FIT_SAMPLES};
pub use sweep::{branch_point, power_law_fit, sweep_statistics, PowerLawFit, SweepPoint, SweepSummary};

use serde::{Deserialize, Serialize};

use crate::model::{MASS, WAVENUMBER};

/// Observables of one trajectory at one output time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObservableRow {
    pub t: f64,
    pub t_kin: f64,
    /// `⟨sin kx⟩`, signed.
    pub theta: f64,
    pub n_photon: f64,
    pub re_alpha: f64,
    pub im_alpha: f64,
}

/// A mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Measurement {
    pub value: f64,
    pub stderr: f64,
}

/// `k_B T_kin = m⟨v²⟩` with the standard error of the mean.
pub fn kinetic_temperature(velocities: &[f64]) -> Option<Measurement> {
    let squares: Vec<f64> = velocities.iter().map(|v| MASS * v * v).collect();
    mean_and_stderr(&squares)
}

/// `Θ̂ = ⟨sin kx⟩`.
pub fn order_parameter(positions: &[f64]) -> Option<f64> {
    if positions.is_empty() {
        return None;
    }
    Some(positions.iter().map(|x| (WAVENUMBER * x).sin()).sum::<f64>() / positions.len() as f64)
}

pub fn mean_and_stderr(xs: &[f64]) -> Option<Measurement> {
    let n = xs.len();
    if n == 0 {
        return None;
    }
    let mean = xs.iter().sum::<f64>() / n as f64;
    let stderr = if n > 1 {
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        (var / n as f64).sqrt()
    } else {
        0.0
    };
    Some(Measurement { value: mean, stderr })
}

/// Fraction of a run treated as stationary.
pub const LONG_TIME_FRACTION: f64 = 0.25;
pub const LONG_TIME_BLOCKS: usize = 10;

/// Mean over the final quarter of `series`, with the error bar taken from
/// the scatter of ten block means.
pub fn long_time_average(series: &[f64]) -> Option<Measurement> {
    window_average(series, LONG_TIME_FRACTION, LONG_TIME_BLOCKS)
}

pub fn window_average(series: &[f64], fraction: f64, blocks: usize) -> Option<Measurement> {
    let len = ((series.len() as f64) * fraction).round() as usize;
    if len < blocks || blocks == 0 {
        return None;
    }
    let tail = &series[series.len() - len..];
    let means: Vec<f64> = (0..blocks)
        .map(|b| {
            let chunk = &tail[b * len / blocks..(b + 1) * len / blocks];
            chunk.iter().sum::<f64>() / chunk.len() as f64
        })
        .collect();
    let overall = tail.iter().sum::<f64>() / len as f64;
    let stderr = mean_and_stderr(&means)?.stderr;
    Some(Measurement { value: overall, stderr })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_distr::{Distribution, Normal};
    use std::f64::consts::PI;

    #[test]
    fn temperature_of_cold_sample_is_zero() {
        let t = kinetic_temperature(&[0.0; 10]).unwrap();
        assert_eq!(t.value, 0.0);
        assert!(kinetic_temperature(&[]).is_none());
    }

    #[test]
    fn temperature_estimator_is_consistent() {
        let t = 7.0;
        let normal = Normal::new(0.0, (2.0 * t / MASS).sqrt() / 2f64.sqrt()).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let v: Vec<f64> = (0..50_000).map(|_| normal.sample(&mut rng)).collect();
        let m = kinetic_temperature(&v).unwrap();
        assert!((m.value - t).abs() < 4.0 * m.stderr, "{m:?}");
    }

    #[test]
    fn q_gaussian_sample_runs_hot() {
        let f = crate::kinetic::VelocityDistribution::q_gaussian(1.4, 1.0).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(12);
        // heavy tails: the sample mean converges slowly
        let v: Vec<f64> = (0..400_000).map(|_| f.sample(&mut rng).unwrap()).collect();
        assert_relative_eq!(kinetic_temperature(&v).unwrap().value, 2.5, max_relative = 0.05);
    }

    #[test]
    fn order_parameter_examples() {
        assert_relative_eq!(order_parameter(&[PI / 2.0; 7]).unwrap(), 1.0, epsilon = 1e-15);
        assert_relative_eq!(order_parameter(&[1.5 * PI; 7]).unwrap(), -1.0, epsilon = 1e-15);
        let n = 10_000;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(4);
        let x: Vec<f64> = (0..n).map(|_| rand::Rng::gen::<f64>(&mut rng) * 2.0 * PI).collect();
        assert!(order_parameter(&x).unwrap().abs() < 4.0 / (n as f64).sqrt());
    }

    #[test]
    fn window_uses_final_quarter() {
        let mut series = vec![100.0; 300];
        series.extend(vec![2.0; 100]);
        let m = long_time_average(&series).unwrap();
        assert_eq!(m.value, 2.0);
        assert_eq!(m.stderr, 0.0);
        assert!(long_time_average(&[1.0; 20]).is_none());
    }

    proptest! {
        #[test]
        fn order_parameter_flips_under_half_period_shift(xs in proptest::collection::vec(0.0f64..std::f64::consts::TAU, 1..50)) {
            let shifted: Vec<f64> = xs.iter().map(|x| x + PI).collect();
            let a = order_parameter(&xs).unwrap();
            let b = order_parameter(&shifted).unwrap();
            prop_assert!((a + b).abs() < 1e-12);
        }

        #[test]
        fn temperature_is_reflection_invariant(vs in proptest::collection::vec(-100.0f64..100.0, 1..50)) {
            let flipped: Vec<f64> = vs.iter().map(|v| -v).collect();
            prop_assert_eq!(kinetic_temperature(&vs), kinetic_temperature(&flipped));
        }
    }
}
