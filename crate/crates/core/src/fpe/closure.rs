use super::coefficients::{coefficients_from, dispersion_norm_sq, DispersionModel};
use crate::error::{invalid, Error, Result};
use crate::kinetic::{is_unstable, thermal_velocity, VelocityDistribution};
use crate::model::{ModelParams, MASS};
use crate::optimize::brent_root;
use crate::quad::{integrate, integrate_to_infinity, Tolerance};

/// `dT_kin/dt = −2m ∫ v (B ∂_vF − A F) dv` with `F` the Gaussian at `T_kin`.
pub fn closure_rate(params: &ModelParams, t_kin: f64, model: DispersionModel) -> Result<f64> {
    let f = VelocityDistribution::gaussian(t_kin)?;
    let vt = thermal_velocity(t_kin);
    // ∂_vF = −(m v / k_BT) F for the Gaussian. Friction and diffusion have
    // fixed signs, so each is integrated to relative accuracy on its own.
    let mut failure = None;
    let mut coefficients = |v: f64| -> Option<(f64, f64)> {
        let density = f.density(v);
        if density == 0.0 {
            return Some((0.0, 0.0));
        }
        match dispersion_norm_sq(v, &f, params, model) {
            Ok(d2) => {
                let c = coefficients_from(v, d2, params);
                Some((v * c.a * density, MASS * v * v / t_kin * c.b * density))
            }
            Err(e) => {
                failure.get_or_insert(e);
                None
            }
        }
    };
    let mut part = |pick: fn((f64, f64)) -> f64| -> Result<f64> {
        let mut g = |v: f64| coefficients(v).map_or(f64::NAN, pick);
        let core = integrate(&mut g, 0.0, 4.0 * vt, Tolerance::new(0.0, 1e-10))?.value;
        let tail = integrate_to_infinity(&mut g, 4.0 * vt, vt, Tolerance::new(1e-12 * core.abs(), 1e-10))?.value;
        Ok(core + tail)
    };
    let friction = part(|c| c.0);
    let diffusion = part(|c| c.1);
    if let Some(e) = failure {
        return Err(e);
    }
    Ok(4.0 * MASS * (friction? + diffusion?))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClosureOptions {
    pub model: DispersionModel,
    pub rtol: f64,
    pub atol: f64,
    /// Stop when the homogeneous Gaussian at the current `T_kin` turns unstable.
    pub stop_on_instability: bool,
}

impl Default for ClosureOptions {
    fn default() -> Self {
        Self {
            model: DispersionModel::Full,
            rtol: 1e-7,
            atol: 1e-9,
            stop_on_instability: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TemperatureTrajectory {
    /// Requested output times reached before any stop.
    pub times: Vec<f64>,
    pub t_kin: Vec<f64>,
    /// Time at which the instability criterion fired, if it did.
    pub unstable_at: Option<f64>,
}

/// Integrates the Gaussian closure from `t0` and reports `T_kin` at each of
/// `times` (increasing, starting after zero), with an adaptive
/// Dormand–Prince 5(4) pair.
pub fn evolve_temperature(
    params: &ModelParams,
    t0: f64,
    times: &[f64],
    options: ClosureOptions,
) -> Result<TemperatureTrajectory> {
    params.validate()?;
    if !(t0 > 0.0 && t0.is_finite()) {
        return Err(invalid("initial_temperature", "must be positive"));
    }
    if times.windows(2).any(|w| w[1] <= w[0]) || times.first().is_some_and(|&t| t < 0.0) {
        return Err(invalid("times", "must be non-negative and strictly increasing"));
    }
    let check = params.delta() < 0.0 && options.stop_on_instability;
    let unstable = |t: f64| -> Result<bool> {
        if !check {
            return Ok(false);
        }
        Ok(is_unstable(params, &VelocityDistribution::gaussian(t)?)?.unstable)
    };
    let rhs = |t: f64| closure_rate(params, t, options.model);

    let mut out = TemperatureTrajectory {
        times: Vec::with_capacity(times.len()),
        t_kin: Vec::with_capacity(times.len()),
        unstable_at: None,
    };
    if unstable(t0)? {
        out.unstable_at = Some(0.0);
        return Ok(out);
    }
    let mut time = 0.0;
    let mut y = t0;
    let mut k1 = rhs(y)?;
    let mut h = (0.01 * y / k1.abs().max(1e-300))
        .min(times.last().copied().unwrap_or(0.0))
        .max(1e-12);
    for &target in times {
        while time < target {
            let tol = options.atol + options.rtol * y.abs();
            if k1.abs() * (target - time) <= tol {
                time = target;
                break;
            }
            if k1.abs() * h <= tol && settled(&rhs, y, k1, tol)? {
                time = target;
                break;
            }
            let step = h.min(target - time);
            let (y_new, err, k_last) = dormand_prince(&rhs, y, k1, step)?;
            let scale = options.atol + options.rtol * y.abs().max(y_new.abs());
            let ratio = err / scale;
            if ratio <= 1.0 && y_new > 0.0 {
                time += step;
                y = y_new;
                k1 = k_last;
                if unstable(y)? {
                    out.unstable_at = Some(time);
                    return Ok(out);
                }
                h = step * (0.9 * ratio.max(1e-10).powf(-0.2)).min(5.0);
            } else {
                h = step * (0.9 * ratio.powf(-0.25)).clamp(0.1, 0.5);
                if h < 1e-14 * (1.0 + time) {
                    return Err(Error::FitNotConverged(format!(
                        "temperature closure step underflow at t = {time}"
                    )));
                }
            }
        }
        out.times.push(target);
        out.t_kin.push(y);
    }
    Ok(out)
}

/// Within `tol` of a stable fixed point, by a Newton estimate of the distance.
fn settled(rhs: &impl Fn(f64) -> Result<f64>, y: f64, k1: f64, tol: f64) -> Result<bool> {
    let eps = 1e-6 * y.abs().max(1e-12);
    let lambda = (rhs(y + eps)? - k1) / eps;
    Ok(lambda < 0.0 && (k1 / lambda).abs() <= tol)
}

/// One Dormand–Prince step; returns the fifth-order value, the embedded
/// error estimate and the derivative at the new point (FSAL).
fn dormand_prince(rhs: &impl Fn(f64) -> Result<f64>, y: f64, k1: f64, h: f64) -> Result<(f64, f64, f64)> {
    let eval = |v: f64| if v > 0.0 { rhs(v) } else { Ok(f64::NAN) };
    let k2 = eval(y + h * (k1 / 5.0))?;
    let k3 = eval(y + h * (3.0 / 40.0 * k1 + 9.0 / 40.0 * k2))?;
    let k4 = eval(y + h * (44.0 / 45.0 * k1 - 56.0 / 15.0 * k2 + 32.0 / 9.0 * k3))?;
    let k5 =
        eval(y + h * (19372.0 / 6561.0 * k1 - 25360.0 / 2187.0 * k2 + 64448.0 / 6561.0 * k3 - 212.0 / 729.0 * k4))?;
    let k6 = eval(
        y + h
            * (9017.0 / 3168.0 * k1 - 355.0 / 33.0 * k2 + 46732.0 / 5247.0 * k3 + 49.0 / 176.0 * k4
                - 5103.0 / 18656.0 * k5),
    )?;
    let y5 = y + h
        * (35.0 / 384.0 * k1 + 500.0 / 1113.0 * k3 + 125.0 / 192.0 * k4 - 2187.0 / 6784.0 * k5 + 11.0 / 84.0 * k6);
    let k7 = eval(y5)?;
    let err = h
        * (71.0 / 57600.0 * k1 - 71.0 / 16695.0 * k3 + 71.0 / 1920.0 * k4 - 17253.0 / 339200.0 * k5
            + 22.0 / 525.0 * k6
            - 1.0 / 40.0 * k7);
    let err = if err.is_finite() { err.abs() } else { f64::INFINITY };
    Ok((y5, err, k7))
}

/// Temperature at which the closure rate vanishes, searched upward from the
/// instability temperature (or from zero for positive detuning). `None` if
/// the rate never changes sign in the searched range.
pub fn closure_fixed_point(params: &ModelParams, model: DispersionModel) -> Result<Option<f64>> {
    params.validate()?;
    let delta = params.delta();
    let floor = if delta < 0.0 {
        // Gaussian criterion: Nη²/k_BT > (κ²+δ²)/|δ|
        params.n_eta_sq() * delta.abs() / (params.kappa.powi(2) + delta * delta)
    } else {
        0.0
    };
    let mut lo = (floor * 1.0001).max(1e-6 * params.kappa);
    let mut hi = lo.max(params.kappa);
    let r_lo = closure_rate(params, lo, model)?;
    if r_lo <= 0.0 {
        return Ok(None);
    }
    let mut r_hi = closure_rate(params, hi, model)?;
    let mut guard = 0;
    while r_hi > 0.0 {
        lo = hi;
        hi *= 2.0;
        r_hi = closure_rate(params, hi, model)?;
        guard += 1;
        if guard > 60 {
            return Ok(None);
        }
    }
    let mut failure = None;
    let root = brent_root(
        |t| match closure_rate(params, t, model) {
            Ok(r) => r,
            Err(e) => {
                failure.get_or_insert(e);
                f64::NAN
            }
        },
        lo,
        hi,
        1e-10 * hi,
    );
    match failure {
        Some(e) => Err(e),
        None => Ok(root),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::equilibrium_temperature;
    use approx::assert_relative_eq;

    fn fig5() -> ModelParams {
        ModelParams::from_collective(100, -0.01, 100.0, -100.0, 80.0)
    }

    #[test]
    fn cools_from_above_and_heats_on_the_blue_side() {
        let p = fig5();
        assert!(closure_rate(&p, 110.0, DispersionModel::Full).unwrap() < 0.0);
        let blue = ModelParams::from_collective(100, -0.01, 100.0, 100.0, 80.0);
        assert!(closure_rate(&blue, 110.0, DispersionModel::Full).unwrap() > 0.0);
    }

    #[test]
    fn far_below_fixed_point_is_equilibrium_temperature() {
        // Gaussian moments of the q-Gaussian drift: k_BT = ħ(κ²+δ²)/(4|δ|)
        // up to O(ω_R/|δ|) from the velocity dependence of B.
        let p = ModelParams::from_collective(100, -0.01, 100.0, -100.0, 1.0);
        let t = closure_fixed_point(&p, DispersionModel::FarBelowThreshold)
            .unwrap()
            .unwrap();
        let t_eq = equilibrium_temperature(100.0, -100.0).unwrap();
        assert_relative_eq!(t, t_eq, max_relative = 0.03);
    }

    #[test]
    fn fig5_fixed_point_is_near_equilibrium() {
        let p = fig5();
        let t = closure_fixed_point(&p, DispersionModel::Full).unwrap().unwrap();
        let t_eq = equilibrium_temperature(100.0, -100.0).unwrap();
        assert!((t / t_eq - 1.0).abs() < 0.15, "{t}");
        assert!(closure_rate(&p, t, DispersionModel::Full).unwrap().abs() < 1e-8);
    }

    #[test]
    fn trajectory_approaches_fixed_point() {
        let p = fig5();
        let times: Vec<f64> = (1..=20).map(|i| 100.0 * i as f64).collect();
        let traj = evolve_temperature(&p, 110.0, &times, ClosureOptions::default()).unwrap();
        assert!(traj.unstable_at.is_none());
        assert_eq!(traj.times.len(), 20);
        assert!(traj.t_kin.windows(2).all(|w| w[1] <= w[0]));
        let fixed = closure_fixed_point(&p, DispersionModel::Full).unwrap().unwrap();
        assert_relative_eq!(*traj.t_kin.last().unwrap(), fixed, max_relative = 0.02);
    }

    #[test]
    fn instability_halts_integration() {
        // √Nη = 1.2 η_c: the Gaussian turns unstable while cooling to T_eq
        let p = ModelParams::from_collective(100, -0.01, 100.0, -100.0, 120.0);
        let times: Vec<f64> = (1..=50).map(|i| 100.0 * i as f64).collect();
        let traj = evolve_temperature(&p, 110.0, &times, ClosureOptions::default()).unwrap();
        assert!(traj.unstable_at.is_some());
        assert!(traj.times.len() < 50);
    }
}
