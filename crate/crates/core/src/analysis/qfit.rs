use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::kinetic::thermal_velocity;
use crate::optimize::brent_minimize;

pub const MIN_FIT_SAMPLES: usize = 1000;

const Q_MAX: f64 = 3.0 - 1e-6;
const Z95: f64 = 1.959_963_984_540_054;

/// Maximum-likelihood q-Gaussian fit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QFit {
    pub q: f64,
    pub temperature: f64,
    /// 95% intervals from the observed information.
    pub q_ci: (f64, f64),
    pub temperature_ci: (f64, f64),
    pub log_likelihood: f64,
    pub n: usize,
    /// The likelihood peaks at the Gaussian end of the family.
    pub gaussian_limit: bool,
}

/// `ln F(v)` of the q-Gaussian with index `q ∈ [1, 3)` (q = 1 is the
/// Gaussian) and temperature parameter `t`.
pub fn q_gaussian_log_density(v: f64, q: f64, t: f64) -> f64 {
    let vt = thermal_velocity(t);
    let xi2 = (v / vt).powi(2);
    log_norm(q) - vt.ln() + log_kernel(xi2, q)
}

fn log_norm(q: f64) -> f64 {
    if q == 1.0 {
        -0.5 * PI.ln()
    } else {
        let a = 1.0 / (q - 1.0);
        0.5 * ((q - 1.0) / PI).ln() + libm::lgamma(a) - libm::lgamma(a - 0.5)
    }
}

fn log_kernel(xi2: f64, q: f64) -> f64 {
    if q == 1.0 {
        -xi2
    } else {
        -((q - 1.0) * xi2).ln_1p() / (q - 1.0)
    }
}

struct Sample<'a> {
    v2: &'a [f64],
}

impl Sample<'_> {
    /// Log-likelihood at `(q, ln T)`.
    fn log_likelihood(&self, q: f64, log_t: f64) -> f64 {
        let t = log_t.exp();
        let vt2 = 2.0 * t / crate::model::MASS;
        let n = self.v2.len() as f64;
        let kernel: f64 = self.v2.iter().map(|v2| log_kernel(v2 / vt2, q)).sum();
        n * (log_norm(q) - 0.5 * vt2.ln()) + kernel
    }

    /// `(ln T̂(q), ℓ)` maximising over the temperature at fixed `q`.
    fn profile(&self, q: f64, centre: f64) -> (f64, f64) {
        let (x, f) = brent_minimize(|lt| -self.log_likelihood(q, lt), centre - 10.0, centre + 6.0, 1e-9);
        (x, -f)
    }
}

/// Fits `(q, T)` by maximum likelihood over `1 ≤ q < 3`.
pub fn fit_q_gaussian(velocities: &[f64]) -> Result<QFit> {
    let n = velocities.len();
    if n < MIN_FIT_SAMPLES {
        return Err(Error::SampleTooSmall {
            got: n,
            needed: MIN_FIT_SAMPLES,
        });
    }
    if velocities.iter().any(|v| !v.is_finite()) {
        return Err(Error::FitNotConverged("non-finite velocity in sample".into()));
    }
    let v2: Vec<f64> = velocities.iter().map(|v| v * v).collect();
    let mut sorted = v2.clone();
    sorted.sort_by(f64::total_cmp);
    let median = sorted[n / 2];
    if median <= 0.0 {
        return Err(Error::FitNotConverged("degenerate sample".into()));
    }
    // Gaussian: median of ξ² is about 0.23, so T ≈ m·median(v²)
    let centre = (crate::model::MASS * median).ln();
    let sample = Sample { v2: &v2 };

    let (q_hat, neg) = brent_minimize(|q| -sample.profile(q, centre).1, 1.0, Q_MAX, 1e-7);
    let at_one = sample.profile(1.0, centre);
    let (q_hat, (log_t, ll)) = if at_one.1 >= -neg {
        (1.0, at_one)
    } else {
        (q_hat, sample.profile(q_hat, centre))
    };
    if !ll.is_finite() {
        return Err(Error::FitNotConverged("log-likelihood is not finite".into()));
    }

    // Observed information in (q, ln T), one-sided in q near the boundary.
    let hq = 1e-3;
    let ht = 1e-3;
    let l = |q: f64, lt: f64| sample.log_likelihood(q, lt);
    let q0 = if q_hat - hq < 1.0 { 1.0 + hq } else { q_hat };
    let f00 = l(q0, log_t);
    let hqq = (l(q0 + hq, log_t) - 2.0 * f00 + l(q0 - hq, log_t)) / (hq * hq);
    let htt = (l(q0, log_t + ht) - 2.0 * f00 + l(q0, log_t - ht)) / (ht * ht);
    let hqt = (l(q0 + hq, log_t + ht) - l(q0 + hq, log_t - ht) - l(q0 - hq, log_t + ht) + l(q0 - hq, log_t - ht))
        / (4.0 * hq * ht);
    let det = hqq * htt - hqt * hqt;
    let (var_q, var_lt) = if det > 0.0 && hqq < 0.0 {
        (-htt / det, -hqq / det)
    } else {
        (f64::NAN, f64::NAN)
    };
    let se_q = var_q.sqrt();
    let se_lt = var_lt.sqrt();
    let t_hat = log_t.exp();
    Ok(QFit {
        q: q_hat,
        temperature: t_hat,
        q_ci: ((q_hat - Z95 * se_q).max(1.0), (q_hat + Z95 * se_q).min(3.0)),
        temperature_ci: ((log_t - Z95 * se_lt).exp(), (log_t + Z95 * se_lt).exp()),
        log_likelihood: ll,
        n,
        gaussian_limit: q_hat - 1.0 < 1e-4,
    })
}
