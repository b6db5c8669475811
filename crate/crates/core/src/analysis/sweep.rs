use serde::{Deserialize, Serialize};

use super::{long_time_average, Measurement};
use crate::error::{invalid, Result};
use crate::sim::EnsembleRecord;

/// Long-time `|Θ|` at one pump strength.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub sqrt_n_eta: f64,
    pub abs_theta: Measurement,
    pub t_kin: Measurement,
    pub n_photon: Measurement,
}

impl SweepPoint {
    pub fn from_record(sqrt_n_eta: f64, record: &EnsembleRecord) -> Result<Self> {
        let window = |series: &[f64], name: &'static str| {
            long_time_average(series).ok_or_else(|| invalid(name, "too few output rows for the long-time window"))
        };
        Ok(Self {
            sqrt_n_eta,
            abs_theta: window(&record.abs_theta.mean, "abs_theta")?,
            t_kin: window(&record.t_kin.mean, "t_kin")?,
            n_photon: window(&record.n_photon.mean, "n_photon")?,
        })
    }
}

/// `y = amplitude · x^exponent` by least squares in log–log space.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerLawFit {
    pub exponent: f64,
    pub exponent_stderr: f64,
    pub amplitude: f64,
    pub points: usize,
}

/// Unweighted log–log regression over the points with `x, y > 0`.
pub fn power_law_fit(x: &[f64], y: &[f64]) -> Option<PowerLawFit> {
    let pts: Vec<(f64, f64)> = x
        .iter()
        .zip(y)
        .filter(|(a, b)| **a > 0.0 && **b > 0.0)
        .map(|(a, b)| (a.ln(), b.ln()))
        .collect();
    let n = pts.len();
    if n < 2 {
        return None;
    }
    let nf = n as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / nf;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / nf;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let stderr = if n > 2 {
        let rss: f64 = pts.iter().map(|p| (p.1 - intercept - slope * p.0).powi(2)).sum();
        (rss / (nf - 2.0) / sxx).sqrt()
    } else {
        f64::NAN
    };
    Some(PowerLawFit {
        exponent: slope,
        exponent_stderr: stderr,
        amplitude: intercept.exp(),
        points: n,
    })
}

/// Where the organised branch leaves zero.
///
/// `|Θ|²` is flat below threshold, rises linearly just above it and bends over
/// as the order saturates, so the steepest stretch of `|Θ|²(η)` marks the
/// onset. A least-squares line through the three consecutive organised points
/// with the largest slope is extrapolated down to `|Θ|² = floor²`. Looking
/// for the steepest stretch rather than the first points past the floor keeps
/// sub-threshold points lifted by critical fluctuations out of the estimate.
pub fn branch_point(points: &[SweepPoint], floor: f64) -> Option<f64> {
    const WINDOW: usize = 3;
    let organised: Vec<(f64, f64)> = points
        .iter()
        .filter(|p| p.abs_theta.value > 3.0 * floor)
        .map(|p| (p.sqrt_n_eta, p.abs_theta.value.powi(2)))
        .collect();
    if organised.len() < 2 {
        return None;
    }
    let (mut best, mut best_slope) = (None, f64::NEG_INFINITY);
    for window in organised.windows(WINDOW.min(organised.len())) {
        let line = least_squares(window);
        if line.2 > best_slope {
            best_slope = line.2;
            best = Some((window[0].0, line));
        }
    }
    let (x1, (mx, my, slope)) = best?;
    if slope <= 0.0 {
        return Some(organised[0].0);
    }
    let crossing = mx - (my - floor * floor) / slope;
    // never below the last homogeneous point
    let last_below = points
        .iter()
        .filter(|p| p.abs_theta.value <= 3.0 * floor)
        .map(|p| p.sqrt_n_eta)
        .fold(f64::NEG_INFINITY, f64::max);
    Some(crossing.max(last_below).min(x1))
}

/// Mean `x`, mean `y` and slope.
fn least_squares(pts: &[(f64, f64)]) -> (f64, f64, f64) {
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    (mx, my, sxy / sxx)
}

/// Branch data of a pump sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSummary {
    pub points: Vec<SweepPoint>,
    /// `E|Θ̂|` of `N` uniformly placed particles, `1/√(πN)`.
    pub noise_floor: f64,
    pub branch_point: Option<f64>,
    /// Fit of `|Θ|` against `η/η_c − 1` on the organised points.
    pub exponent: Option<PowerLawFit>,
    pub eta_c_reference: f64,
}

/// Summarises a sweep; `eta_c_reference` is the threshold used for the
/// reduced pump `η/η_c − 1` in the exponent fit.
pub fn sweep_statistics(mut points: Vec<SweepPoint>, n: usize, eta_c_reference: f64) -> Result<SweepSummary> {
    if points.len() < 5 {
        return Err(invalid(
            "sweep",
            format!("needs at least 5 pump values, got {}", points.len()),
        ));
    }
    points.sort_by(|a, b| a.sqrt_n_eta.total_cmp(&b.sqrt_n_eta));
    let noise_floor = 1.0 / (std::f64::consts::PI * n as f64).sqrt();
    let branch = branch_point(&points, noise_floor);
    let (x, y): (Vec<f64>, Vec<f64>) = points
        .iter()
        .filter(|p| p.sqrt_n_eta > eta_c_reference && p.abs_theta.value > 3.0 * noise_floor)
        .map(|p| (p.sqrt_n_eta / eta_c_reference - 1.0, p.abs_theta.value))
        .unzip();
    Ok(SweepSummary {
        exponent: power_law_fit(&x, &y),
        branch_point: branch,
        noise_floor,
        points,
        eta_c_reference,
    })
}
