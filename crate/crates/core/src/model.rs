//! Unit system, model parameters and the derived quantities every other module
//! shares.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{invalid, Error, Result};

pub const HBAR: f64 = 1.0;
/// Cavity/pump wave number `k`.
pub const WAVENUMBER: f64 = 1.0;
/// Recoil frequency `ω_R = ħk²/2m`.
pub const RECOIL_FREQUENCY: f64 = 1.0;
pub const MASS: f64 = HBAR * WAVENUMBER * WAVENUMBER / (2.0 * RECOIL_FREQUENCY);
/// `ħk/m`.
pub const RECOIL_VELOCITY: f64 = HBAR * WAVENUMBER / MASS;
/// One optical wavelength. All couplings go through `sin(kx)` and `sin²(kx)`.
pub const DOMAIN_LENGTH: f64 = 2.0 * PI / WAVENUMBER;

/// Effective parameters of the coupled particle/field equations, in recoil
/// units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    /// Number of particles.
    pub n: usize,
    /// Light shift per photon `U₀`.
    pub u0: f64,
    /// Cavity field decay rate `κ`.
    pub kappa: f64,
    /// Pump–cavity detuning `Δ_c`.
    pub delta_c: f64,
    /// Effective pump strength per particle `η`.
    pub eta: f64,
}

/// Classification of the q-Gaussian steady state by its detuning.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Normalisability {
    /// No normalisable steady state (`δ ≥ -ω_R/2`, including the heating side).
    None,
    /// Normalisable but without second moment (`ω_R/2 < |δ| ≤ 3ω_R/2`).
    HeavyTailNoVariance,
    /// Finite kinetic energy (`|δ| > 3ω_R/2`).
    FiniteVariance,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DerivedParams {
    /// Effective detuning `δ = Δ_c − NU₀/2`.
    pub delta: f64,
    /// Tsallis index `1 + ω_R/|δ|`, only for `δ < 0`.
    pub q: Option<f64>,
    /// Temperature parameter of the q-Gaussian equilibrium.
    pub t_eq: Option<f64>,
    /// Self-consistent critical pump `√N η_c`, only for `δ < 0` and `q < 3`.
    pub eta_c_scaled: Option<f64>,
    pub domain_length: f64,
    pub normalisability: Normalisability,
    /// `N|U₀| < 0.1 min(|Δ_c|, κ)`.
    pub weak_coupling: bool,
}

impl ModelParams {
    pub fn new(n: usize, u0: f64, kappa: f64, delta_c: f64, eta: f64) -> Self {
        Self {
            n,
            u0,
            kappa,
            delta_c,
            eta,
        }
    }

    /// Builds parameters from the collective quantities figure captions use:
    /// `NU₀`, the effective detuning `δ` and `√N η`.
    pub fn from_collective(n: usize, n_u0: f64, kappa: f64, delta: f64, sqrt_n_eta: f64) -> Self {
        let nf = n as f64;
        Self {
            n,
            u0: n_u0 / nf,
            kappa,
            delta_c: delta + n_u0 / 2.0,
            eta: sqrt_n_eta / nf.sqrt(),
        }
    }

    /// `δ = Δ_c − NU₀/2`.
    pub fn delta(&self) -> f64 {
        self.delta_c - self.n as f64 * self.u0 / 2.0
    }

    /// `√N η`.
    pub fn sqrt_n_eta(&self) -> f64 {
        (self.n as f64).sqrt() * self.eta
    }

    /// `N η²`, the combination entering the dispersion relation.
    pub fn n_eta_sq(&self) -> f64 {
        self.n as f64 * self.eta * self.eta
    }

    pub fn with_eta(mut self, eta: f64) -> Self {
        self.eta = eta;
        self
    }

    pub fn with_sqrt_n_eta(mut self, sqrt_n_eta: f64) -> Self {
        self.eta = sqrt_n_eta / (self.n as f64).sqrt();
        self
    }

    pub fn validate(&self) -> Result<()> {
        for (name, value) in [
            ("u0", self.u0),
            ("kappa", self.kappa),
            ("delta_c", self.delta_c),
            ("eta", self.eta),
        ] {
            if !value.is_finite() {
                return Err(invalid(name, format!("must be finite, got {value}")));
            }
        }
        if self.n < 1 {
            return Err(invalid("n", "particle number must be at least 1"));
        }
        if self.kappa <= 0.0 {
            return Err(invalid("kappa", format!("must be positive, got {}", self.kappa)));
        }
        if self.eta < 0.0 {
            return Err(invalid("eta", format!("must be non-negative, got {}", self.eta)));
        }
        Ok(())
    }

    pub fn is_weak_coupling(&self) -> bool {
        let collective = self.n as f64 * self.u0.abs();
        collective < 0.1 * self.delta_c.abs().min(self.kappa)
    }
}

/// `1 + ω_R/|δ|` for negative detuning.
pub fn tsallis_index(delta: f64) -> Option<f64> {
    (delta < 0.0).then(|| 1.0 + RECOIL_FREQUENCY / delta.abs())
}

/// `k_B T = ħ(κ² + δ²)/(4|δ|)`, the temperature parameter of the sub-threshold
/// equilibrium.
pub fn equilibrium_temperature(kappa: f64, delta: f64) -> Option<f64> {
    (delta < 0.0).then(|| HBAR * (kappa * kappa + delta * delta) / (4.0 * delta.abs()))
}

/// `√N η_c = (κ² + δ²)/(2|δ|) √(2/(3 − q))` for a q-Gaussian at its own
/// equilibrium temperature.
pub fn critical_pump_q_gaussian(kappa: f64, delta: f64, q: f64) -> Result<f64> {
    if delta >= 0.0 {
        return Err(Error::PositiveDetuning { delta });
    }
    if !(1.0..3.0).contains(&q) {
        return Err(Error::QOutOfRange { q, range: "[1, 3)" });
    }
    Ok((kappa * kappa + delta * delta) / (2.0 * delta.abs()) * (2.0 / (3.0 - q)).sqrt())
}

pub fn normalisability(delta: f64) -> Normalisability {
    let abs = delta.abs();
    if delta >= 0.0 || abs <= RECOIL_FREQUENCY / 2.0 {
        Normalisability::None
    } else if abs <= 1.5 * RECOIL_FREQUENCY {
        Normalisability::HeavyTailNoVariance
    } else {
        Normalisability::FiniteVariance
    }
}

/// Validates the parameters and computes every derived scalar.
pub fn validate_and_derive(params: &ModelParams) -> Result<DerivedParams> {
    params.validate()?;
    let delta = params.delta();
    let q = tsallis_index(delta);
    let t_eq = equilibrium_temperature(params.kappa, delta);
    let eta_c_scaled = q
        .filter(|&q| q < 3.0)
        .and_then(|q| critical_pump_q_gaussian(params.kappa, delta, q).ok());
    Ok(DerivedParams {
        delta,
        q,
        t_eq,
        eta_c_scaled,
        domain_length: DOMAIN_LENGTH,
        normalisability: normalisability(delta),
        weak_coupling: params.is_weak_coupling(),
    })
}
