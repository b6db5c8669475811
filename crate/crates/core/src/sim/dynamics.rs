use num_complex::Complex64;
use std::f64::consts::TAU;

use crate::error::{Error, Result};
use crate::model::{ModelParams, HBAR, MASS, RECOIL_VELOCITY, WAVENUMBER};
use crate::rng::NoisePair;

const I: Complex64 = Complex64::new(0.0, 1.0);

/// Positions, velocities and field amplitude of one trajectory at time `t`.
///
/// Positions are stored wrapped into `[0, 2π)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SimState {
    pub t: f64,
    pub x: Vec<f64>,
    pub v: Vec<f64>,
    pub alpha: Complex64,
}

impl SimState {
    pub fn n(&self) -> usize {
        self.x.len()
    }

    pub fn check(&self) -> Result<()> {
        if self.x.len() != self.v.len() {
            return Err(crate::error::invalid(
                "state",
                format!("{} positions but {} velocities", self.x.len(), self.v.len()),
            ));
        }
        let finite = self.x.iter().chain(&self.v).all(|z| z.is_finite())
            && self.alpha.re.is_finite()
            && self.alpha.im.is_finite()
            && self.t.is_finite();
        if !finite {
            return Err(crate::error::invalid("state", "non-finite entry"));
        }
        Ok(())
    }
}

/// Blow-up detection thresholds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GuardBounds {
    pub v_max: f64,
    pub alpha_max: f64,
}

impl GuardBounds {
    /// `|v| ≤ 10³` recoil velocities and `|α| ≤ 10³ √N`.
    pub fn for_particles(n: usize) -> Self {
        Self {
            v_max: 1e3 * RECOIL_VELOCITY,
            alpha_max: 1e3 * (n as f64).sqrt(),
        }
    }
}

/// Acceleration `-(1/m) ∂U/∂x` of a particle at `x`.
pub fn force(x: f64, alpha: Complex64, params: &ModelParams) -> f64 {
    let (s, c) = (WAVENUMBER * x).sin_cos();
    acceleration(s, c, alpha.norm_sqr(), alpha.re, params.u0, params.eta)
}

#[inline(always)]
fn acceleration(s: f64, c: f64, photons: f64, re_alpha: f64, u0: f64, eta: f64) -> f64 {
    // ∂U/∂x = ħk [U₀|α|² sin(2kx) + 2η Re α cos(kx)]
    -(2.0 * HBAR * WAVENUMBER / MASS) * c * (u0 * photons * s + eta * re_alpha)
}

/// Deterministic part of `dα/dt`.
pub fn field_drift(alpha: Complex64, positions: &[f64], params: &ModelParams) -> Complex64 {
    let (sum_sin, sum_sin_sq) = positions.iter().fold((0.0, 0.0), |(s1, s2), &x| {
        let s = (WAVENUMBER * x).sin();
        (s1 + s, s2 + s * s)
    });
    Complex64::new(-params.kappa, params.delta_c - params.u0 * sum_sin_sq) * alpha - I * params.eta * sum_sin
}

/// `(sin θ, cos θ)`; Taylor series for the small per-step rotation angles.
#[inline(always)]
fn rotation(theta: f64) -> (f64, f64) {
    const S: [f64; 5] = [1.0 / 6.0, 1.0 / 20.0, 1.0 / 42.0, 1.0 / 72.0, 1.0 / 110.0];
    const C: [f64; 6] = [0.5, 1.0 / 12.0, 1.0 / 30.0, 1.0 / 56.0, 1.0 / 90.0, 1.0 / 132.0];
    if theta.abs() < 0.25 {
        let t2 = theta * theta;
        let s =
            theta * (1.0 - t2 * S[0] * (1.0 - t2 * S[1] * (1.0 - t2 * S[2] * (1.0 - t2 * S[3] * (1.0 - t2 * S[4])))));
        let c = 1.0
            - t2 * C[0]
                * (1.0 - t2 * C[1] * (1.0 - t2 * C[2] * (1.0 - t2 * C[3] * (1.0 - t2 * C[4] * (1.0 - t2 * C[5])))));
        (s, c)
    } else {
        theta.sin_cos()
    }
}

const RESYNC_INTERVAL: u32 = 256;

/// Stateful stepper holding `sin(kx_j)` and `cos(kx_j)` between steps.
///
/// One step is a kick–drift–kick splitting: half a velocity kick with the
/// current field, free streaming of the particles while the field equation is
/// integrated exactly along the straight-line trajectories (linear part
/// `i(Δ_c − U₀Σsin²) − κ` frozen at the start of the step, exact OU noise),
/// then the second half kick with the updated field.
#[derive(Debug, Clone)]
pub struct Integrator {
    params: ModelParams,
    dt: f64,
    guard: GuardBounds,
    t: f64,
    x: Vec<f64>,
    v: Vec<f64>,
    sin: Vec<f64>,
    cos: Vec<f64>,
    alpha: Complex64,
    sum_sin_sq: f64,
    since_resync: u32,
    noise_gain: f64,
}

impl Integrator {
    pub fn new(params: &ModelParams, state: SimState, dt: f64, guard: GuardBounds) -> Result<Self> {
        params.validate()?;
        state.check()?;
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(crate::error::invalid("dt", format!("must be positive, got {dt}")));
        }
        let kappa = params.kappa;
        // Per-quadrature standard deviation of ∫ e^{λ(dt-τ)} √(κ/2) dW over one
        // step, divided by √dt so it multiplies dW directly.
        let noise_gain = (kappa / 2.0).sqrt() * (-(-2.0 * kappa * dt).exp_m1() / (2.0 * kappa * dt)).sqrt();
        let mut integrator = Self {
            params: *params,
            dt,
            guard,
            t: state.t,
            sin: vec![0.0; state.x.len()],
            cos: vec![0.0; state.x.len()],
            x: state.x,
            v: state.v,
            alpha: state.alpha,
            sum_sin_sq: 0.0,
            since_resync: 0,
            noise_gain,
        };
        integrator.resync();
        Ok(integrator)
    }

    fn resync(&mut self) {
        let mut q = 0.0;
        for ((x, s), c) in self.x.iter().zip(&mut self.sin).zip(&mut self.cos) {
            let (sx, cx) = (WAVENUMBER * x).sin_cos();
            *s = sx;
            *c = cx;
            q += sx * sx;
        }
        self.sum_sin_sq = q;
        self.since_resync = 0;
    }

    pub fn time(&self) -> f64 {
        self.t
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn alpha(&self) -> Complex64 {
        self.alpha
    }

    pub fn positions(&self) -> &[f64] {
        &self.x
    }

    pub fn velocities(&self) -> &[f64] {
        &self.v
    }

    pub fn set_time(&mut self, t: f64) {
        self.t = t;
    }

    /// `m⟨v²⟩` over the particles.
    pub fn kinetic_temperature(&self) -> f64 {
        MASS * self.v.iter().map(|v| v * v).sum::<f64>() / self.v.len() as f64
    }

    /// `⟨sin(kx)⟩` over the particles.
    pub fn order_parameter(&self) -> f64 {
        self.sin.iter().sum::<f64>() / self.sin.len() as f64
    }

    pub fn state(&self) -> SimState {
        SimState {
            t: self.t,
            x: self.x.clone(),
            v: self.v.clone(),
            alpha: self.alpha,
        }
    }

    /// Advances one step driven by standard-normal draws `(ξ₁, ξ₂)`.
    pub fn advance(&mut self, xi1: f64, xi2: f64) -> Result<()> {
        let sqrt_dt = self.dt.sqrt();
        self.advance_with(NoisePair {
            dw1: xi1 * sqrt_dt,
            dw2: xi2 * sqrt_dt,
        })
    }

    /// Advances one step with explicit Wiener increments.
    pub fn advance_with(&mut self, noise: NoisePair) -> Result<()> {
        let ModelParams {
            u0,
            kappa,
            delta_c,
            eta,
            ..
        } = self.params;
        let dt = self.dt;
        let half_dt = 0.5 * dt;

        let photons = self.alpha.norm_sqr();
        let re_alpha = self.alpha.re;
        for ((v, &s), &c) in self.v.iter_mut().zip(&self.sin).zip(&self.cos) {
            *v += half_dt * acceleration(s, c, photons, re_alpha, u0, eta);
        }

        let detuning = delta_c - u0 * self.sum_sin_sq;
        let mu = Complex64::new(kappa, -detuning);
        let decay = (-mu * dt).exp();
        let mut pump = Complex64::new(0.0, 0.0);
        let mut sum_sin_sq = 0.0;
        for (((x, v), s), c) in self.x.iter_mut().zip(&self.v).zip(&mut self.sin).zip(&mut self.cos) {
            let kv = WAVENUMBER * *v;
            let theta = kv * dt;
            let (st, ct) = rotation(theta);
            let phase = Complex64::new(*c, *s);
            let turn = Complex64::new(ct, st);
            // ∫₀^dt e^{λ(dt-τ)} e^{±ik(x+vτ)} dτ, both denominators inverted
            // with a single division
            let (den_f, den_b) = (mu + I * kv, mu - I * kv);
            let (nf, nb) = (den_f.norm_sqr(), den_b.norm_sqr());
            let r = 1.0 / (nf * nb);
            let forward = phase * (turn - decay) * den_f.conj() * (nb * r);
            let backward = phase.conj() * (turn.conj() - decay) * den_b.conj() * (nf * r);
            pump += forward - backward;

            let (sn, cn) = (*s * ct + *c * st, *c * ct - *s * st);
            *s = sn;
            *c = cn;
            sum_sin_sq += sn * sn;
            *x += theta / WAVENUMBER;
            if !(0.0..TAU).contains(x) {
                *x = x.rem_euclid(TAU);
            }
        }
        // Σ_j ∫ e^{λ(dt-τ)} sin(kx_j(τ)) dτ = pump / 2i
        let pump_term = -I * eta * (pump / (2.0 * I));
        self.alpha = decay * self.alpha + pump_term + Complex64::new(noise.dw1, noise.dw2) * self.noise_gain;

        self.since_resync += 1;
        if self.since_resync >= RESYNC_INTERVAL {
            self.resync();
        } else {
            self.sum_sin_sq = sum_sin_sq;
        }

        let photons = self.alpha.norm_sqr();
        let re_alpha = self.alpha.re;
        let mut v_extreme = 0.0f64;
        for ((v, &s), &c) in self.v.iter_mut().zip(&self.sin).zip(&self.cos) {
            *v += half_dt * acceleration(s, c, photons, re_alpha, u0, eta);
            v_extreme = v_extreme.max(v.abs());
        }
        self.t += dt;

        let alpha_abs = photons.sqrt();
        if !(alpha_abs <= self.guard.alpha_max) {
            return Err(Error::Diverged {
                t: self.t,
                what: format!("|alpha| = {alpha_abs:e} exceeds {:e}", self.guard.alpha_max),
            });
        }
        if !(v_extreme <= self.guard.v_max) {
            return Err(Error::Diverged {
                t: self.t,
                what: format!("|v| = {v_extreme:e} exceeds {:e}", self.guard.v_max),
            });
        }
        Ok(())
    }
}

/// One integration step from `state` with the given Wiener increments.
pub fn step(state: &SimState, dt: f64, noise: NoisePair, params: &ModelParams) -> Result<SimState> {
    let guard = GuardBounds::for_particles(state.n());
    let mut integrator = Integrator::new(params, state.clone(), dt, guard)?;
    integrator.advance_with(noise)?;
    Ok(integrator.state())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    fn params(u0: f64, eta: f64) -> ModelParams {
        ModelParams::new(10, u0, 100.0, -100.0, eta)
    }

    #[test]
    fn force_examples() {
        let p = params(0.3, 1.0);
        for x in [0.0, 0.4, 1.0, 2.5] {
            assert_eq!(force(x, Complex64::new(0.0, 0.0), &p), 0.0);
        }
        assert_relative_eq!(force(0.0, Complex64::new(1.0, 0.0), &p), -4.0, epsilon = 1e-14);
        assert!(force(PI / 2.0, Complex64::new(0.7, -0.2), &p).abs() < 1e-14);
    }

    #[test]
    fn force_matches_numerical_gradient() {
        let p = params(-0.3, 1.7);
        let alpha = Complex64::new(0.8, -1.1);
        let potential =
            |x: f64| HBAR * p.u0 * alpha.norm_sqr() * x.sin().powi(2) + HBAR * p.eta * 2.0 * alpha.re * x.sin();
        for x in [0.1, 1.3, 2.9, 4.4] {
            let h = 1e-6;
            let grad = (potential(x + h) - potential(x - h)) / (2.0 * h);
            assert_relative_eq!(force(x, alpha, &p), -grad / MASS, epsilon = 1e-7);
        }
    }

    #[test]
    fn field_drift_examples() {
        let p = ModelParams::new(4, 0.05, 10.0, -3.0, 2.0);
        let alpha = Complex64::new(0.3, 0.4);
        let at_zero = field_drift(alpha, &[0.0; 4], &p);
        let expected = Complex64::new(-p.kappa, p.delta_c) * alpha;
        assert!((at_zero - expected).norm() < 1e-14);

        let at_antinode = field_drift(alpha, &[PI / 2.0; 4], &p);
        let expected = Complex64::new(-p.kappa, p.delta_c - 4.0 * p.u0) * alpha - I * p.eta * 4.0;
        assert!((at_antinode - expected).norm() < 1e-12);
    }

    #[test]
    fn free_decay_is_exact() {
        let p = ModelParams::new(3, 0.0, 100.0, -37.0, 0.0);
        let state = SimState {
            t: 0.0,
            x: vec![0.1, 2.0, 5.0],
            v: vec![3.0, -1.0, 0.5],
            alpha: Complex64::new(2.0, 1.0),
        };
        let dt = 1e-3;
        let mut it = Integrator::new(&p, state.clone(), dt, GuardBounds::for_particles(3)).unwrap();
        for _ in 0..50 {
            it.advance_with(NoisePair::ZERO).unwrap();
        }
        let t = 50.0 * dt;
        assert_relative_eq!(
            it.alpha().norm(),
            state.alpha.norm() * (-p.kappa * t).exp(),
            epsilon = 1e-12
        );
        assert_eq!(it.velocities(), &state.v[..]);
        for (x, (x0, v)) in it.positions().iter().zip(state.x.iter().zip(&state.v)) {
            assert_relative_eq!(*x, (x0 + v * t).rem_euclid(TAU), epsilon = 1e-12);
        }
    }

    #[test]
    fn kinetic_energy_conserved_without_coupling() {
        let p = ModelParams::new(50, 0.0, 100.0, -100.0, 0.0);
        let mut rng = crate::rng::NoiseStream::new(5, 0, 0);
        let state = SimState {
            t: 0.0,
            x: (0..50).map(|j| j as f64 * 0.1).collect(),
            v: (0..50).map(|j| (j as f64 - 25.0) * 0.7).collect(),
            alpha: Complex64::new(0.0, 0.0),
        };
        let mut it = Integrator::new(&p, state, 1e-3, GuardBounds::for_particles(50)).unwrap();
        let t0 = it.kinetic_temperature();
        for k in 0..2000 {
            let (a, b) = rng.standard_normals(k);
            it.advance(a, b).unwrap();
        }
        assert_eq!(it.kinetic_temperature(), t0);
    }

    #[test]
    fn cached_trig_stays_in_sync() {
        let p = params(-0.01, 5.0);
        let state = SimState {
            t: 0.0,
            x: (0..10).map(|j| j as f64 * 0.6).collect(),
            v: (0..10).map(|j| (j as f64 - 5.0) * 13.0).collect(),
            alpha: Complex64::new(0.0, 0.0),
        };
        let mut it = Integrator::new(&p, state, 1e-3, GuardBounds::for_particles(10)).unwrap();
        for _ in 0..(RESYNC_INTERVAL - 1) {
            it.advance_with(NoisePair::ZERO).unwrap();
        }
        for ((x, s), c) in it.x.iter().zip(&it.sin).zip(&it.cos) {
            assert!((x.sin() - s).abs() < 1e-12);
            assert!((x.cos() - c).abs() < 1e-12);
        }
    }

    #[test]
    fn step_matches_integrator() {
        let p = params(-0.02, 3.0);
        let state = SimState {
            t: 0.5,
            x: (0..10).map(|j| j as f64 * 0.5).collect(),
            v: (0..10).map(|j| j as f64 - 4.0).collect(),
            alpha: Complex64::new(0.2, -0.1),
        };
        let noise = NoisePair { dw1: 0.01, dw2: -0.02 };
        let next = step(&state, 1e-3, noise, &p).unwrap();
        let mut it = Integrator::new(&p, state, 1e-3, GuardBounds::for_particles(10)).unwrap();
        it.advance_with(noise).unwrap();
        assert_eq!(next, it.state());
        assert_relative_eq!(next.t, 0.501, epsilon = 1e-15);
    }

    #[test]
    fn divergence_is_reported() {
        let p = params(0.0, 0.0);
        let state = SimState {
            t: 0.0,
            x: vec![0.0; 10],
            v: vec![0.0; 10],
            alpha: Complex64::new(1e6, 0.0),
        };
        let err = step(&state, 1e-4, NoisePair::ZERO, &p).unwrap_err();
        assert!(matches!(err, Error::Diverged { .. }));
    }

    #[test]
    fn rotation_series_accuracy() {
        for i in -100..=100 {
            let t = 0.0025 * i as f64;
            let (s, c) = rotation(t);
            assert!((s - t.sin()).abs() < 2e-16);
            assert!((c - t.cos()).abs() < 2e-16);
        }
    }
}
