//! Kinetic-theory identities checked against independent quadrature.

use cavkin::fpe::{drift_exponent, fpe_coefficients, DispersionModel};
use cavkin::kinetic::{
    growth_rate, is_unstable, organised_equilibrium, pv_shape_integral, q_gaussian, VelocityDistribution,
};
use cavkin::model::{critical_pump_q_gaussian, equilibrium_temperature, tsallis_index};
use cavkin::quad::{integrate, integrate_real_line, Tolerance};
use cavkin::ModelParams;
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn q_gaussians_are_normalised(q in 1.0..2.6f64, t in 0.5..500.0f64) {
        let f = |v: f64| q_gaussian(v, q, t).unwrap();
        let mass = integrate_real_line(f, 0.0, (2.0 * t).sqrt(), Tolerance::new(1e-14, 1e-11)).unwrap().value;
        prop_assert!((mass - 1.0).abs() < 1e-8);
    }

    #[test]
    fn shape_integral_of_q_gaussians(q in 1.0..2.8f64, t in 0.1..1e3f64) {
        let f = VelocityDistribution::q_gaussian(q, t).unwrap();
        let value = pv_shape_integral(&f).unwrap();
        prop_assert!((value - (3.0 - q) / 2.0).abs() < 1e-6);
    }

    /// `∫A/B dv` does not depend on the dispersion or on the pump.
    #[test]
    fn drift_over_diffusion_integrates_in_closed_form(
        delta in -150.0..-1.0f64,
        v in 0.5..300.0f64,
        eta in 1.0..40.0f64,
    ) {
        let params = ModelParams::from_collective(1000, -0.1, 100.0, delta, eta);
        let f = VelocityDistribution::gaussian(30.0).unwrap();
        let ratio = |u: f64| {
            let c = fpe_coefficients(u, &f, &params, DispersionModel::FarBelowThreshold).unwrap();
            c.a / c.b
        };
        let quad = integrate(ratio, 0.0, v, Tolerance::new(1e-300, 1e-12)).unwrap().value;
        let closed = drift_exponent(0.0, v, &params);
        prop_assert!(((quad - closed) / closed).abs() < 1e-9);
    }

    /// The q-Gaussian at its own temperature makes `A/B` an exact logarithmic
    /// derivative.
    #[test]
    fn q_gaussian_is_the_stationary_profile(delta in -150.0..-1.0f64, v in 0.5..300.0f64) {
        let params = ModelParams::from_collective(1000, -0.1, 100.0, delta, 5.0);
        let q = tsallis_index(delta).unwrap();
        let t = equilibrium_temperature(100.0, delta).unwrap();
        let expected = (q_gaussian(v, q, t).unwrap() / q_gaussian(0.0, q, t).unwrap()).ln();
        prop_assert!(((drift_exponent(0.0, v, &params) - expected) / expected).abs() < 1e-12);
    }

    /// Below the threshold there is no growing mode, above it there is.
    #[test]
    fn threshold_separates_growth(delta in -150.0..-30.0f64, ratio in 0.3..0.9f64, above in 1.2..3.0f64) {
        let kappa = 100.0;
        let q = tsallis_index(delta).unwrap();
        let t = equilibrium_temperature(kappa, delta).unwrap();
        let f = VelocityDistribution::q_gaussian(q, t).unwrap();
        let eta_c = critical_pump_q_gaussian(kappa, delta, q).unwrap();
        let below = ModelParams::from_collective(500, -1e-6, kappa, delta, ratio * eta_c);
        let over = ModelParams::from_collective(500, -1e-6, kappa, delta, above * eta_c);
        prop_assert!(!is_unstable(&below, &f).unwrap().unstable);
        prop_assert!(is_unstable(&over, &f).unwrap().unstable);
        prop_assert!(growth_rate(&below, &f).unwrap().is_none());
        prop_assert!(growth_rate(&over, &f).unwrap().is_some_and(|s| s.re > 0.0));
    }
}

#[test]
fn organised_phase_at_twice_the_threshold() {
    let params = ModelParams::from_collective(250, -1.0, 100.0, -100.0, 200.0);
    let phase = organised_equilibrium(&params).unwrap();
    // ω₀² = 200(2 + √3), T = (2·10⁴ + 4ω₀²)/400
    let omega0_sq = 200.0 * (2.0 + 3f64.sqrt());
    assert!((phase.omega0_sq - omega0_sq).abs() < 1e-9);
    assert!((phase.t_kin - (2e4 + 4.0 * omega0_sq) / 400.0).abs() < 1e-9);
    assert!((phase.t_kin / 100.0 - 0.5746).abs() < 1e-3);
}
