use std::f64::consts::PI;

use super::dispersion::pv_shape_integral;
use super::distribution::{thermal_velocity, VelocityDistribution};
use crate::error::{invalid, Error, Result};
use crate::model::{
    critical_pump_q_gaussian, equilibrium_temperature, tsallis_index, ModelParams, HBAR, RECOIL_FREQUENCY, WAVENUMBER,
};

/// Outcome of the linear stability criterion of the homogeneous state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Stability {
    pub unstable: bool,
    /// `LHS/RHS − 1`; positive when unstable.
    pub margin: f64,
    /// `(Nη²/k_BT) · vp∫ g′(ξ)/(−2ξ) dξ`.
    pub lhs: f64,
    /// `(δ² + κ²)/(ħ|δ|)`.
    pub rhs: f64,
}

fn require_negative_detuning(params: &ModelParams) -> Result<f64> {
    let delta = params.delta();
    if delta < 0.0 {
        Ok(delta)
    } else {
        Err(Error::PositiveDetuning { delta })
    }
}

/// Instability criterion for the homogeneous state with velocity density `f`.
pub fn is_unstable(params: &ModelParams, f: &VelocityDistribution) -> Result<Stability> {
    params.validate()?;
    let delta = require_negative_detuning(params)?;
    let rhs = (delta * delta + params.kappa.powi(2)) / (HBAR * delta.abs());
    if params.eta == 0.0 {
        return Ok(Stability {
            unstable: false,
            margin: -1.0,
            lhs: 0.0,
            rhs,
        });
    }
    let lhs = params.n_eta_sq() / f.scale_temperature() * shape_integral(f)?;
    Ok(Stability {
        unstable: lhs > rhs,
        margin: lhs / rhs - 1.0,
        lhs,
        rhs,
    })
}

fn shape_integral(f: &VelocityDistribution) -> Result<f64> {
    match f.q() {
        Some(q) => Ok((3.0 - q) / 2.0),
        None => pv_shape_integral(f),
    }
}

/// `√N η_c` for the shape of `f` placed at the equilibrium temperature.
pub fn critical_pump(params: &ModelParams, f: &VelocityDistribution) -> Result<f64> {
    params.validate()?;
    let delta = require_negative_detuning(params)?;
    if let Some(q) = f.q() {
        return critical_pump_q_gaussian(params.kappa, delta, q);
    }
    let t_eq = equilibrium_temperature(params.kappa, delta).expect("negative detuning");
    let rhs = (delta * delta + params.kappa.powi(2)) / (HBAR * delta.abs());
    Ok((t_eq * rhs / pv_shape_integral(f)?).sqrt())
}

/// The threshold in the form `N|U₀|V_opt > ħκ²`, with `V_opt = ħη²/|U₀|`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimalDepthCriterion {
    pub v_opt: f64,
    pub lhs: f64,
    pub rhs: f64,
    pub unstable: bool,
}

pub fn optimal_depth_criterion(params: &ModelParams) -> Result<OptimalDepthCriterion> {
    params.validate()?;
    if params.u0 == 0.0 {
        return Err(invalid("u0", "V_opt is undefined for U0 = 0"));
    }
    let v_opt = HBAR * params.eta.powi(2) / params.u0.abs();
    let lhs = params.n as f64 * params.u0.abs() * v_opt;
    let rhs = HBAR * params.kappa.powi(2);
    Ok(OptimalDepthCriterion {
        v_opt,
        lhs,
        rhs,
        unstable: lhs > rhs,
    })
}

/// Smallest `N ≤ n_max` for which the per-particle pump `η` of `params`
/// reaches the self-consistent threshold, `√N η ≥ √N η_c(N)`.
///
/// `U₀` and `Δ_c` are held fixed, so `δ`, `q` and the threshold move with `N`.
pub fn critical_particle_number(params: &ModelParams, n_max: u64) -> Result<u64> {
    params.validate()?;
    if params.eta <= 0.0 {
        return Err(invalid("eta", "must be positive"));
    }
    let reaches = |n: u64| -> bool {
        let p = ModelParams {
            n: n as usize,
            ..*params
        };
        let delta = p.delta();
        match tsallis_index(delta).map(|q| critical_pump_q_gaussian(p.kappa, delta, q)) {
            Some(Ok(eta_c)) => p.sqrt_n_eta() >= eta_c,
            _ => false,
        }
    };
    if reaches(1) {
        return Ok(1);
    }
    let mut lo = 1u64;
    let mut hi = 2u64;
    while !reaches(hi) {
        if hi >= n_max {
            return Err(Error::NoCriticalParticleNumber { n_max });
        }
        lo = hi;
        hi = (hi * 2).min(n_max);
    }
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if reaches(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

/// Self-organised state above threshold (harmonic, far-detuned regime).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OrganisedPhase {
    /// `η/η_c` with the Gaussian threshold `(κ²+δ²)/(2|δ|)`.
    pub pump_ratio: f64,
    pub omega0_sq: f64,
    pub omega0: f64,
    /// `k_B T_kin = ħ(κ² + δ² + 4ω₀²)/(4|δ|)`.
    pub t_kin: f64,
    /// `|Θ| = 1 − k_B T_kin ω_R/(ħω₀²)`; both signs are physical.
    pub theta: f64,
    /// `Re⟨α⟩_∞` on the `Θ > 0` branch; the other branch has the opposite sign.
    pub alpha_ss: f64,
    /// `|Θ|` as `η → ∞`: `1 − ω_R/|δ|`.
    pub theta_asymptote: f64,
    /// `k²(Δx)² = 2ω_R/|δ|`.
    pub width_sq: f64,
}

/// Threshold `√N η_c` the organised-phase formulas are written against.
pub fn gaussian_threshold(kappa: f64, delta: f64) -> f64 {
    (kappa * kappa + delta * delta) / (2.0 * delta.abs())
}

pub fn organised_equilibrium(params: &ModelParams) -> Result<OrganisedPhase> {
    params.validate()?;
    let delta = require_negative_detuning(params)?;
    let kappa = params.kappa;
    let ratio = params.sqrt_n_eta() / gaussian_threshold(kappa, delta);
    if !(ratio > 1.0) {
        return Err(Error::BelowThreshold { ratio });
    }
    let omega0_sq = params.sqrt_n_eta() * RECOIL_FREQUENCY * (ratio + (ratio * ratio - 1.0).sqrt());
    let t_kin = HBAR * (kappa * kappa + delta * delta + 4.0 * omega0_sq) / (4.0 * delta.abs());
    let theta = 1.0 - t_kin * RECOIL_FREQUENCY / (HBAR * omega0_sq);
    let n_eta = params.n as f64 * params.eta;
    Ok(OrganisedPhase {
        pump_ratio: ratio,
        omega0_sq,
        omega0: omega0_sq.sqrt(),
        t_kin,
        theta,
        alpha_ss: -n_eta * delta.abs() * theta / (kappa * kappa + delta * delta),
        theta_asymptote: 1.0 - RECOIL_FREQUENCY / delta.abs(),
        width_sq: 2.0 * RECOIL_FREQUENCY / delta.abs(),
    })
}

/// `|Θ| = 2√(η/η_c − 1)` just above threshold.
pub fn theta_near_threshold(eta_ratio: f64) -> Result<f64> {
    if !(eta_ratio >= 1.0) {
        return Err(Error::BelowThreshold { ratio: eta_ratio });
    }
    Ok(2.0 * (eta_ratio - 1.0).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoolingTime {
    pub tau_opt: f64,
    /// `k v_T0`, which the estimate assumes to be large compared with `κ`.
    pub doppler_width: f64,
    pub valid: bool,
}

/// `τ_opt = k v_T0 N / (4√π κ²)`, written for `δ = −κ`.
pub fn optimal_cooling_time(params: &ModelParams, t0: f64) -> Result<CoolingTime> {
    params.validate()?;
    if !(t0 > 0.0 && t0.is_finite()) {
        return Err(invalid("initial_temperature", "must be positive"));
    }
    let doppler_width = WAVENUMBER * thermal_velocity(t0);
    Ok(CoolingTime {
        tau_opt: doppler_width * params.n as f64 / (4.0 * PI.sqrt() * params.kappa.powi(2)),
        doppler_width,
        valid: doppler_width > params.kappa,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn fig2() -> ModelParams {
        ModelParams::from_collective(5000, -0.1, 100.0, -2.5, 1800.0)
    }

    fn fig6() -> ModelParams {
        ModelParams::from_collective(250, -1.0, 100.0, -100.0, 200.0)
    }

    #[test]
    fn fig2_parameters_are_stable() {
        let p = fig2();
        let f = VelocityDistribution::q_gaussian(1.4, equilibrium_temperature(100.0, -2.5).unwrap()).unwrap();
        let s = is_unstable(&p, &f).unwrap();
        assert!(!s.unstable && s.margin < 0.0);
        assert_relative_eq!(critical_pump(&p, &f).unwrap(), 2237.5, max_relative = 1e-4);
    }

    #[test]
    fn zero_pump_is_stable() {
        let p = fig6().with_eta(0.0);
        let f = VelocityDistribution::lorentzian(1.0).unwrap();
        assert!(!is_unstable(&p, &f).unwrap().unstable);
    }

    #[test]
    fn fig6_parameters_are_unstable() {
        let p = fig6();
        let f = VelocityDistribution::gaussian(50.0).unwrap();
        assert!(is_unstable(&p, &f).unwrap().unstable);
    }

    #[test]
    fn positive_detuning_is_rejected() {
        let p = ModelParams::from_collective(10, 0.0, 100.0, 5.0, 10.0);
        let f = VelocityDistribution::gaussian(50.0).unwrap();
        assert!(matches!(is_unstable(&p, &f), Err(Error::PositiveDetuning { .. })));
    }

    #[test]
    fn criterion_is_marginal_at_critical_pump() {
        let base = ModelParams::from_collective(100, -1e-6, 100.0, -60.0, 1.0);
        let t = equilibrium_temperature(100.0, -60.0).unwrap();
        for f in [
            VelocityDistribution::gaussian(t).unwrap(),
            VelocityDistribution::q_gaussian(1.3, t).unwrap(),
        ] {
            let eta_c = critical_pump(&base, &f).unwrap();
            let s = is_unstable(&base.with_sqrt_n_eta(eta_c), &f).unwrap();
            assert!(s.margin.abs() < 1e-12);
        }
    }

    #[test]
    fn gridded_shape_inverts_numerically() {
        let p = ModelParams::from_collective(100, -1e-6, 100.0, -100.0, 1.0);
        let g = VelocityDistribution::gaussian(50.0).unwrap();
        let grid = VelocityDistribution::Grid(g.tabulate(10.0 * g.scale(), 4001).unwrap());
        assert_relative_eq!(critical_pump(&p, &grid).unwrap(), 100.0, max_relative = 1e-6);
    }

    #[test]
    fn optimal_depth_form_matches_gaussian_threshold() {
        for ratio in [0.9, 1.1] {
            let p = ModelParams::from_collective(100, -0.5, 100.0, -100.0, 100.0 * ratio);
            let c = optimal_depth_criterion(&p).unwrap();
            assert_eq!(c.unstable, ratio > 1.0);
        }
        assert!(optimal_depth_criterion(&ModelParams::new(10, 0.0, 1.0, -1.0, 1.0)).is_err());
    }

    #[test]
    fn critical_particle_numbers() {
        let eta_c1 = critical_pump_q_gaussian(100.0, -100.0, 1.01).unwrap();
        let p = ModelParams::new(1, 0.0, 100.0, -100.0, eta_c1);
        assert_eq!(critical_particle_number(&p, 1_000_000).unwrap(), 1);

        let p = ModelParams::new(1, 0.0, 100.0, -100.0, 28.0);
        assert_eq!(critical_particle_number(&p, 1_000_000).unwrap(), 13);

        let n1 = critical_particle_number(&p.with_eta(2.8), 1_000_000).unwrap();
        let n2 = critical_particle_number(&p.with_eta(5.6), 1_000_000).unwrap();
        assert!((n1 as f64 / 4.0 - n2 as f64).abs() <= 1.0, "{n1} {n2}");

        assert!(matches!(
            critical_particle_number(&p.with_eta(1e-3), 1000),
            Err(Error::NoCriticalParticleNumber { .. })
        ));
    }

    #[test]
    fn fig6_organised_state() {
        let o = organised_equilibrium(&fig6()).unwrap();
        assert_relative_eq!(o.omega0_sq, 200.0 * (2.0 + 3f64.sqrt()), max_relative = 1e-12);
        assert_relative_eq!(o.omega0_sq, 746.4, max_relative = 1e-4);
        assert_relative_eq!(o.t_kin / 100.0, 0.57, max_relative = 0.01);
        assert_relative_eq!(o.theta, 1.0 - o.t_kin / o.omega0_sq, epsilon = 1e-15);
        assert_relative_eq!(o.theta, 0.923, epsilon = 1e-3);
        assert!(o.alpha_ss < 0.0);
    }

    #[test]
    fn strong_pump_asymptote() {
        let p = fig6().with_sqrt_n_eta(1e9);
        let o = organised_equilibrium(&p).unwrap();
        assert_relative_eq!(o.theta, 0.99, epsilon = 1e-4);
        assert_eq!(o.theta_asymptote, 0.99);
        assert!(matches!(
            organised_equilibrium(&fig6().with_sqrt_n_eta(50.0)),
            Err(Error::BelowThreshold { .. })
        ));
    }

    #[test]
    fn organised_temperature_reduces_to_equilibrium() {
        let p = fig6();
        let o = organised_equilibrium(&p).unwrap();
        let t_eq = equilibrium_temperature(p.kappa, p.delta()).unwrap();
        assert_relative_eq!(o.t_kin - o.omega0_sq / p.delta().abs(), t_eq, max_relative = 1e-12);
    }

    #[test]
    fn near_threshold_order_parameter() {
        assert_eq!(theta_near_threshold(1.0).unwrap(), 0.0);
        assert_relative_eq!(theta_near_threshold(1.01).unwrap(), 0.2, epsilon = 1e-12);
        assert!(theta_near_threshold(0.99).is_err());
        let (a, b) = (1e-4, 1e-2);
        let slope =
            (theta_near_threshold(1.0 + b).unwrap() / theta_near_threshold(1.0 + a).unwrap()).ln() / (b / a).ln();
        assert_relative_eq!(slope, 0.5, epsilon = 1e-12);
    }

    #[test]
    fn both_order_parameter_forms_vanish_at_threshold() {
        let p = fig6();
        let eta_c = gaussian_threshold(p.kappa, p.delta());
        let near = organised_equilibrium(&p.with_sqrt_n_eta(eta_c * (1.0 + 1e-12))).unwrap();
        // harmonic form is far from 1 at threshold only through T_kin/ω₀²
        assert!(near.theta < organised_equilibrium(&p).unwrap().theta);
        assert_eq!(theta_near_threshold(1.0).unwrap(), 0.0);
    }

    #[test]
    fn cooling_time_examples() {
        // k v_T0 = 1000 needs T0 = m (1000)²/2
        let p = ModelParams::new(1000, 0.0, 100.0, -100.0, 1.0);
        let c = optimal_cooling_time(&p, 0.25 * 1e6).unwrap();
        assert_relative_eq!(c.doppler_width, 1000.0, epsilon = 1e-9);
        assert_relative_eq!(c.tau_opt, 14.1, max_relative = 2e-3);
        assert!(c.valid);
        let double = optimal_cooling_time(&ModelParams { n: 2000, ..p }, 0.25e6).unwrap();
        assert_relative_eq!(double.tau_opt, 2.0 * c.tau_opt, epsilon = 1e-12);
        let cold = optimal_cooling_time(&p, 110.0).unwrap();
        assert_relative_eq!(cold.doppler_width, 2.0 * 110f64.sqrt(), epsilon = 1e-12);
        assert!(!cold.valid);
    }

    proptest! {
        #[test]
        fn margin_sign_tracks_pump(ratio in 0.2f64..3.0, delta in -300.0f64..-2.0) {
            let p = ModelParams::from_collective(100, -1e-6, 100.0, delta, 1.0);
            let t = equilibrium_temperature(100.0, delta).unwrap();
            let f = VelocityDistribution::gaussian(t).unwrap();
            let eta_c = critical_pump(&p, &f).unwrap();
            let s = is_unstable(&p.with_sqrt_n_eta(ratio * eta_c), &f).unwrap();
            prop_assert_eq!(s.unstable, ratio > 1.0);
            prop_assert!((s.margin - (ratio * ratio - 1.0)).abs() < 1e-9);
        }
    }
}
