//! Direct integration of the coupled particle/cavity-field Itō equations
//!
//! ```text
//! dx_j = v_j dt
//! dv_j = -(1/m) ∂U(x_j, α)/∂x_j dt
//! dα   = [i(Δ_c − U₀ Σ sin²(kx_j)) − κ] α dt − iη Σ sin(kx_j) dt + √(κ/2)(dW₁ + i dW₂)
//! ```
//!
//! with `U(x, α) = ħU₀|α|² sin²(kx) + ħη(α + α*) sin(kx)`.

mod dynamics;
mod ensemble;

pub use dynamics::{field_drift, force, step, GuardBounds, Integrator, SimState};
pub use ensemble::{
    default_dt, run_ensemble, run_trajectory, sample_initial, EnsemblePlan, EnsembleRecord, SeriesStat, Snapshot,
    TrajectoryId, TrajectoryRecord, STABILITY_BOUND,
};
