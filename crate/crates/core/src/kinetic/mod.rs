//! Linear response of the homogeneous state and the equilibria around it.
//!
//! Velocity densities are normalised to `∫F dv = 1`; the factor `NL` of the
//! single-wavelength box is absorbed into `N`.

mod dispersion;
mod distribution;
mod roots;
mod theory;

pub(crate) use dispersion::collective_coupling;
pub use dispersion::{bare_dispersion, dispersion, dispersion_with, pv_shape_integral, susceptibility, Route};
pub use distribution::{
    q_gaussian, q_gaussian_kinetic_temperature, thermal_velocity, GridDistribution, PowerTail, VelocityDistribution,
};
pub use roots::{growth_rate, growth_rate_in, RootSearch};
pub use theory::{
    critical_particle_number, critical_pump, gaussian_threshold, is_unstable, optimal_cooling_time,
    optimal_depth_criterion, organised_equilibrium, theta_near_threshold, CoolingTime, OptimalDepthCriterion,
    OrganisedPhase, Stability,
};

use num_complex::Complex64;

use crate::error::Result;
use crate::model::{validate_and_derive, ModelParams};

/// Largest particle number considered when solving for `N_c`.
pub const PARTICLE_NUMBER_LIMIT: u64 = 1 << 40;

/// Every analytic prediction available for one parameter set.
///
/// Entries that do not apply (positive detuning, below threshold, no
/// solution) are `None`.
#[derive(Debug, Clone, PartialEq)]
pub struct KineticPrediction {
    /// Homogeneous q-Gaussian equilibrium is linearly stable.
    pub stable: Option<bool>,
    pub margin: Option<f64>,
    pub growth_rate: Option<Complex64>,
    pub eta_c_scaled: Option<f64>,
    pub q: Option<f64>,
    pub t_eq: Option<f64>,
    /// `m⟨v²⟩` of the homogeneous equilibrium.
    pub t_kin_homogeneous: Option<f64>,
    pub organised: Option<OrganisedPhase>,
    pub theta_near: Option<f64>,
    pub n_c: Option<u64>,
    pub cooling: Option<CoolingTime>,
}

impl KineticPrediction {
    /// `initial_temperature` is only used for the cooling-time estimate.
    pub fn compute(params: &ModelParams, initial_temperature: Option<f64>) -> Result<Self> {
        let derived = validate_and_derive(params)?;
        let equilibrium = match (derived.q, derived.t_eq) {
            (Some(q), Some(t)) if q < 3.0 => Some(VelocityDistribution::q_gaussian(q, t)?),
            _ => None,
        };
        let (stable, margin, growth) = match &equilibrium {
            Some(f) => {
                let s = is_unstable(params, f)?;
                let root = if params.eta > 0.0 {
                    growth_rate(params, f)?
                } else {
                    None
                };
                (Some(!s.unstable), Some(s.margin), root)
            }
            None => (None, None, None),
        };
        let organised = organised_equilibrium(params).ok();
        let theta_near = derived
            .eta_c_scaled
            .and_then(|c| theta_near_threshold(params.sqrt_n_eta() / c).ok());
        let n_c = if params.eta > 0.0 && derived.delta < 0.0 {
            critical_particle_number(params, PARTICLE_NUMBER_LIMIT).ok()
        } else {
            None
        };
        let cooling = initial_temperature
            .map(|t0| optimal_cooling_time(params, t0))
            .transpose()?;
        Ok(Self {
            stable,
            margin,
            growth_rate: growth,
            eta_c_scaled: derived.eta_c_scaled,
            q: derived.q,
            t_eq: derived.t_eq,
            t_kin_homogeneous: equilibrium.as_ref().and_then(|f| f.kinetic_temperature()),
            organised,
            theta_near,
            n_c,
            cooling,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn fig6_bundle() {
        let p = ModelParams::from_collective(250, -1.0, 100.0, -100.0, 200.0);
        let k = KineticPrediction::compute(&p, Some(300.0)).unwrap();
        assert_eq!(k.stable, Some(false));
        assert!(k.growth_rate.unwrap().re > 0.0);
        let o = k.organised.unwrap();
        assert_relative_eq!(o.t_kin / p.kappa, 0.57, max_relative = 0.01);
        assert!(k.n_c.unwrap() < 250);
    }

    #[test]
    fn heating_side_has_no_equilibrium() {
        let p = ModelParams::from_collective(10, 0.0, 100.0, 20.0, 50.0);
        let k = KineticPrediction::compute(&p, None).unwrap();
        assert_eq!(k.stable, None);
        assert_eq!(k.t_eq, None);
        assert!(k.organised.is_none() && k.n_c.is_none());
    }
}
