use num_complex::Complex64;

use crate::error::Result;
use crate::kinetic::{dispersion, VelocityDistribution};
use crate::model::{ModelParams, HBAR, MASS, WAVENUMBER};

/// Which dispersion function enters `|D(ikv)|²`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DispersionModel {
    /// Landau boundary value of the full dispersion relation.
    #[default]
    Full,
    /// `D(ikv) ≈ (ikv + κ)² + δ²`, valid far below threshold.
    FarBelowThreshold,
}

/// Drift `A` (acceleration units) and diffusion `B` (velocity²/time).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FpeCoefficients {
    pub a: f64,
    pub b: f64,
}

/// `|D(ikv)|²` under the chosen model.
pub fn dispersion_norm_sq(
    v: f64,
    f: &VelocityDistribution,
    params: &ModelParams,
    model: DispersionModel,
) -> Result<f64> {
    let s = Complex64::new(0.0, WAVENUMBER * v);
    let d = match model {
        DispersionModel::Full => dispersion(s, f, params)?,
        DispersionModel::FarBelowThreshold => crate::kinetic::bare_dispersion(s, params),
    };
    Ok(d.norm_sqr())
}

/// `A` and `B` given `|D(ikv)|²`.
pub fn coefficients_from(v: f64, d_norm_sq: f64, params: &ModelParams) -> FpeCoefficients {
    let delta = params.delta();
    let kappa = params.kappa;
    let eta2 = params.eta * params.eta;
    let k = WAVENUMBER;
    FpeCoefficients {
        a: 2.0 * HBAR * k * delta * kappa * eta2 / MASS * k * v / d_norm_sq,
        b: HBAR * HBAR * k * k * eta2 * kappa / (2.0 * MASS * MASS) * (kappa * kappa + delta * delta + k * k * v * v)
            / d_norm_sq,
    }
}

/// Fokker–Planck drift and diffusion at velocity `v` against the frozen
/// density `f`.
pub fn fpe_coefficients(
    v: f64,
    f: &VelocityDistribution,
    params: &ModelParams,
    model: DispersionModel,
) -> Result<FpeCoefficients> {
    Ok(coefficients_from(v, dispersion_norm_sq(v, f, params, model)?, params))
}

/// `∫_{v_a}^{v_b} A/B dv = (2mδ/ħk²) ln[(κ²+δ²+k²v_b²)/(κ²+δ²+k²v_a²)]`,
/// independent of `D` and of `η`.
pub fn drift_exponent(v_a: f64, v_b: f64, params: &ModelParams) -> f64 {
    let delta = params.delta();
    let k = WAVENUMBER;
    let c = params.kappa.powi(2) + delta * delta;
    let (a2, b2) = ((k * v_a).powi(2), (k * v_b).powi(2));
    2.0 * MASS * delta / (HBAR * k * k) * ((b2 - a2) / (c + a2)).ln_1p()
}
