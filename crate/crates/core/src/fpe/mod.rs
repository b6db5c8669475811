//! Nonlinear Fokker–Planck equation for the spatially averaged velocity
//! distribution, below threshold.
//!
//! Friction and diffusion follow from the cavity field fluctuations seen by a
//! particle moving at velocity `v`. The dispersion function `D(ikv)` in their
//! denominators carries the dependence on the whole distribution.

mod closure;
mod coefficients;
mod grid;

pub use closure::{closure_fixed_point, closure_rate, evolve_temperature, ClosureOptions, TemperatureTrajectory};
pub use coefficients::{
    coefficients_from, dispersion_norm_sq, drift_exponent, fpe_coefficients, DispersionModel, FpeCoefficients,
};
pub use grid::{
    evolve_distribution, evolve_values, flux_residual, grid_extent, outside_mass, CavityTransport, ConstantTransport,
    FpeGrid, FpeOptions, FpeSolution, GridExtent, TransportModel,
};
