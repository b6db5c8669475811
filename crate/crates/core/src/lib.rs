//! Stochastic simulation and kinetic theory of laser-pumped polarisable
//! particles moving along the axis of a lossy standing-wave resonator.
//!
//! The crate has two halves that are meant to be checked against each other:
//!
//! * [`sim`] integrates the coupled particle/cavity-field stochastic equations
//!   of motion for finite ensembles, and
//! * [`kinetic`] and [`fpe`] implement the mean-field description: the
//!   dispersion relation and self-organisation threshold, the nonlinear
//!   Fokker–Planck equation for the velocity distribution, its q-Gaussian
//!   equilibria and the organised-phase predictions.
//!
//! [`analysis`] turns simulation output into the same observables the kinetic
//! theory predicts.
//!
//! All quantities are in recoil units: `ħ = k = ω_R = 1`, so the particle mass
//! is `1/2`, one recoil velocity `ħk/m` is `2`, energies are in `E_R = ħω_R` and
//! positions are phases `kx` on a periodic domain of one wavelength.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod error;
pub mod fpe;
pub mod kinetic;
pub mod model;
pub(crate) mod optimize;
pub mod quad;
pub mod rng;
pub mod sim;

pub use error::{Error, Result};
pub use model::{DerivedParams, ModelParams, Normalisability};
pub use num_complex::Complex64;
