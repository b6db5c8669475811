use errorfunctions::{ComplexErrorFunctions, RealErrorFunctions};
use num_complex::Complex64;
use std::f64::consts::PI;

use super::distribution::VelocityDistribution;
use crate::error::{Error, Result};
use crate::model::{ModelParams, HBAR, MASS, WAVENUMBER};
use crate::quad::{integrate, integrate_from_minus_infinity, integrate_to_infinity, Tolerance};

const I: Complex64 = Complex64::new(0.0, 1.0);

/// How the velocity integral is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Route {
    /// Closed form where one exists (Gaussian), quadrature otherwise.
    #[default]
    Auto,
    Quadrature,
}

fn tolerance() -> Tolerance {
    Tolerance::new(1e-14, 1e-11)
}

/// Response integral `χ(s) = (1/k²) ∫ ∂_vF(v) / (v − is/k) dv`.
///
/// For `Re s > 0` the pole lies off the real axis; on the imaginary axis
/// the Landau boundary value (principal value plus `iπ ∂_vF` at the pole) is
/// returned.
pub fn susceptibility(s: Complex64, f: &VelocityDistribution, route: Route) -> Result<Complex64> {
    if !(s.re >= 0.0) || !s.im.is_finite() {
        return Err(Error::LeftHalfPlane { re: s.re });
    }
    match (route, f) {
        (Route::Auto, VelocityDistribution::Gaussian { .. }) => Ok(gaussian_closed_form(s, f.scale())),
        _ => susceptibility_quadrature(s, f),
    }
}

/// `Z′(ζ)/(k v_T)²` with the plasma dispersion function `Z`.
fn gaussian_closed_form(s: Complex64, vt: f64) -> Complex64 {
    let zeta = I * s / (WAVENUMBER * vt);
    let z = if s.re == 0.0 {
        // real argument: Z(x) = i√π e^{−x²} − 2 Daw(x)
        let x = zeta.re;
        Complex64::new(-2.0 * x.dawson(), PI.sqrt() * (-x * x).exp())
    } else {
        I * PI.sqrt() * zeta.w()
    };
    let z_prime = -2.0 * (1.0 + zeta * z);
    z_prime / (WAVENUMBER * vt).powi(2)
}

/// Quadrature with Plemelj splitting: on a window around `Re v₀` the
/// integrand `(F′(v) − F′(Re v₀))/(v − v₀)` is smooth, and the subtracted
/// part is integrated in closed form.
fn susceptibility_quadrature(s: Complex64, f: &VelocityDistribution) -> Result<Complex64> {
    let k = WAVENUMBER;
    let v0 = I * s / k;
    let a = v0.re;
    let b = v0.im;
    let scale = f.scale();
    let w = 4.0 * scale;
    let (lo, hi) = (a - w, a + w);
    let tol = tolerance();
    let dfa = f.derivative(a);
    let mut breaks = vec![lo, a, hi];
    if let Some(edge) = f.breakpoints() {
        breaks.extend([-edge, edge]);
    }
    breaks.sort_by(f64::total_cmp);
    breaks.dedup();

    let inner = |v: f64| -> Complex64 {
        let dv = v - a;
        if b == 0.0 && dv == 0.0 {
            // limit of the difference quotient
            let h = 1e-6 * scale;
            return Complex64::new((f.derivative(a + h) - f.derivative(a - h)) / (2.0 * h), 0.0);
        }
        (f.derivative(v) - dfa) / Complex64::new(dv, -b)
    };
    let outer = |v: f64| -> Complex64 { f.derivative(v) / Complex64::new(v - a, -b) };

    let mut total = Complex64::new(0.0, 0.0);
    for pair in breaks.windows(2) {
        let (x0, x1) = (pair[0], pair[1]);
        let piece = if x0 >= lo && x1 <= hi {
            integrate(inner, x0, x1, tol)?
        } else {
            integrate(outer, x0, x1, tol)?
        };
        total += piece.value;
    }
    total += integrate_from_minus_infinity(outer, breaks[0], scale, tol)?.value;
    total += integrate_to_infinity(outer, breaks[breaks.len() - 1], scale, tol)?.value;
    // ∫_{a−w}^{a+w} dv/(v − a − ib) = i(π − 2 atan(b/w))
    total += dfa * I * (PI - 2.0 * (b / w).atan());
    Ok(total / (k * k))
}

/// Dispersion function
/// `D(s) = (s+κ)² + δ² − iħkδ (Nη²/2m) ∫ ∂_vF [1/(s+ikv) − 1/(s−ikv)] dv`
/// for `Re s ≥ 0`, with the Landau boundary value on the imaginary axis.
pub fn dispersion(s: Complex64, f: &VelocityDistribution, params: &ModelParams) -> Result<Complex64> {
    dispersion_with(s, f, params, Route::Auto)
}

pub fn dispersion_with(
    s: Complex64,
    f: &VelocityDistribution,
    params: &ModelParams,
    route: Route,
) -> Result<Complex64> {
    let chi = susceptibility(s, f, route)?;
    Ok(bare_dispersion(s, params) - collective_coupling(params) * chi)
}

/// `(s+κ)² + δ²`, the dispersion function without particles.
pub fn bare_dispersion(s: Complex64, params: &ModelParams) -> Complex64 {
    let d = params.delta();
    (s + params.kappa).powi(2) + d * d
}

/// `ħk²δNη²/m`, the factor multiplying `χ` in `D`.
pub(crate) fn collective_coupling(params: &ModelParams) -> f64 {
    HBAR * WAVENUMBER * WAVENUMBER * params.delta() * params.n_eta_sq() / MASS
}

/// `vp∫ g′(ξ)/(−2ξ) dξ` for the shape of `f`.
///
/// The integrand is even and regular at the origin, but is evaluated the
/// way a principal value is: with a window `|ξ| < ε` removed, and the
/// window contribution eliminated by Richardson extrapolation in `ε`.
pub fn pv_shape_integral(f: &VelocityDistribution) -> Result<f64> {
    let vt = f.scale();
    let tol = Tolerance::new(1e-15, 1e-12);
    let h = |v: f64| -f.derivative(v) / v;
    let edge = f.breakpoints();
    let outside = |eps: f64| -> Result<f64> {
        let mut cuts = vec![eps, vt];
        if let Some(e) = edge {
            if e > vt {
                cuts.push(e);
            }
        }
        let mut sum = 0.0;
        for w in cuts.windows(2) {
            sum += integrate(h, w[0], w[1], tol)?.value;
        }
        sum += integrate_to_infinity(h, cuts[cuts.len() - 1], vt, tol)?.value;
        Ok(sum)
    };
    let eps = 1e-2 * vt;
    let j = [outside(eps)?, outside(eps / 2.0)?, outside(eps / 4.0)?];
    // missing window ∝ ε + O(ε³) since the integrand is even
    let r1 = [2.0 * j[1] - j[0], 2.0 * j[2] - j[1]];
    let r2 = (8.0 * r1[1] - r1[0]) / 7.0;
    let change = (r2 - r1[1]).abs();
    if change > 1e-6 * r2.abs().max(1e-300) {
        return Err(Error::QuadratureNotConverged {
            error: change,
            requested: 1e-6 * r2.abs(),
        });
    }
    // ∫_{−∞}^{∞} F′/(−v) dv · v_T²/2, with both halves equal
    Ok(r2 * vt * vt)
}
