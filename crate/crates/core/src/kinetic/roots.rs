use num_complex::Complex64;

use super::dispersion::dispersion;
use super::distribution::VelocityDistribution;
use crate::error::{Error, Result};
use crate::model::{ModelParams, WAVENUMBER};
use crate::optimize::brent_root;

/// Search rectangle `[0, s_max] × [−i k v_max, +i k v_max]` and grid density.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RootSearch {
    pub s_max: f64,
    pub v_max: f64,
    pub n_re: usize,
    pub n_im: usize,
}

impl RootSearch {
    /// `s_max = 3κ`, `v_max = 8 v_T`.
    pub fn for_problem(params: &ModelParams, f: &VelocityDistribution) -> Self {
        Self {
            s_max: 3.0 * params.kappa,
            v_max: 8.0 * f.scale(),
            n_re: 16,
            n_im: 24,
        }
    }
}

/// Root of `D` with the largest real part in the closed right half plane, or
/// `None` if there is none.
pub fn growth_rate(params: &ModelParams, f: &VelocityDistribution) -> Result<Option<Complex64>> {
    growth_rate_in(params, f, RootSearch::for_problem(params, f))
}

pub fn growth_rate_in(params: &ModelParams, f: &VelocityDistribution, search: RootSearch) -> Result<Option<Complex64>> {
    params.validate()?;
    let d = |s: Complex64| dispersion(s, f, params);
    let scale = params.kappa.powi(2) + params.delta().powi(2);
    let mut roots: Vec<Complex64> = Vec::new();

    // D is real on the real axis, so a sign change brackets a purely growing mode.
    let d0 = d(Complex64::new(0.0, 0.0))?.re;
    if d0.abs() <= 1e-9 * scale {
        roots.push(Complex64::new(0.0, 0.0));
    } else if d0 < 0.0 {
        let mut failure = None;
        let real = |x: f64| match d(Complex64::new(x, 0.0)) {
            Ok(v) => v.re,
            Err(e) => {
                failure.get_or_insert(e);
                f64::NAN
            }
        };
        let root = brent_root(real, 0.0, search.s_max, 1e-13 * params.kappa);
        if let Some(e) = failure {
            return Err(e);
        }
        if let Some(r) = root {
            roots.push(Complex64::new(r, 0.0));
        }
    }

    // Oscillatory modes come in conjugate pairs; scan the upper half only.
    let w_max = WAVENUMBER * search.v_max;
    let re_at = |i: usize| search.s_max * (i as f64 + 0.5) / search.n_re as f64;
    let im_at = |j: usize| w_max * j as f64 / (search.n_im - 1) as f64;
    let mut mag = vec![vec![0.0; search.n_im]; search.n_re];
    for (i, row) in mag.iter_mut().enumerate() {
        for (j, m) in row.iter_mut().enumerate() {
            *m = d(Complex64::new(re_at(i), im_at(j)))?.norm();
        }
    }
    let mut seeds = Vec::new();
    for i in 0..search.n_re {
        for j in 0..search.n_im {
            let here = mag[i][j];
            let lower = (i.saturating_sub(1)..=(i + 1).min(search.n_re - 1))
                .flat_map(|a| (j.saturating_sub(1)..=(j + 1).min(search.n_im - 1)).map(move |b| (a, b)))
                .all(|(a, b)| mag[a][b] >= here);
            if lower {
                seeds.push(Complex64::new(re_at(i), im_at(j)));
            }
        }
    }
    for seed in seeds {
        match newton(&d, seed, scale)? {
            Some(r) if r.re > -1e-9 * params.kappa => {
                let r = if r.im < 0.0 { r.conj() } else { r };
                if !roots.iter().any(|x| (x - r).norm() < 1e-6 * params.kappa) {
                    roots.push(r);
                }
            }
            _ => {}
        }
    }

    // Nothing found: make sure that is because there is nothing to find.
    if roots.is_empty() {
        let zeros = winding_number(&d, search, params.kappa)?;
        if zeros != 0 {
            return Err(Error::SearchExhausted { zeros });
        }
    }
    Ok(roots
        .into_iter()
        .map(|r| Complex64::new(r.re.max(0.0), r.im))
        .max_by(|a, b| a.re.total_cmp(&b.re)))
}

/// Damped Newton with a centred-difference derivative, kept in the closed
/// right half plane. `None` when it stalls away from a zero.
fn newton(d: &impl Fn(Complex64) -> Result<Complex64>, seed: Complex64, scale: f64) -> Result<Option<Complex64>> {
    let mut s = seed;
    let mut ds = d(s)?;
    for _ in 0..100 {
        if ds.norm() < 1e-12 * scale {
            return Ok(Some(s));
        }
        let h = 1e-6 * (s.norm() + scale.sqrt());
        if s.re < h {
            // one-sided near the axis to stay in the domain
            let deriv = (d(s + h)? - ds) / h;
            let step = ds / deriv;
            match damped(d, s, ds, step)? {
                Some((next, dn)) => {
                    if (next - s).norm() < 1e-13 * (s.norm() + 1.0) {
                        return Ok((dn.norm() < 1e-9 * scale).then_some(next));
                    }
                    s = next;
                    ds = dn;
                }
                None => return Ok(None),
            }
            continue;
        }
        let deriv = (d(s + h)? - d(s - h)?) / (2.0 * h);
        let step = ds / deriv;
        match damped(d, s, ds, step)? {
            Some((next, dn)) => {
                if (next - s).norm() < 1e-13 * (s.norm() + 1.0) {
                    return Ok((dn.norm() < 1e-9 * scale).then_some(next));
                }
                s = next;
                ds = dn;
            }
            None => return Ok(None),
        }
    }
    Ok((ds.norm() < 1e-9 * scale).then_some(s))
}

fn damped(
    d: &impl Fn(Complex64) -> Result<Complex64>,
    s: Complex64,
    ds: Complex64,
    step: Complex64,
) -> Result<Option<(Complex64, Complex64)>> {
    if !(step.re.is_finite() && step.im.is_finite()) {
        return Ok(None);
    }
    let mut lambda = 1.0;
    for _ in 0..30 {
        let mut next = s - step * lambda;
        if next.re < 0.0 {
            // reflect onto the axis; a root there is reported as marginal
            next.re = 0.0;
        }
        let dn = d(next)?;
        if dn.norm() < ds.norm() {
            return Ok(Some((next, dn)));
        }
        lambda *= 0.5;
    }
    Ok(None)
}

/// Zeros of `D` inside the search rectangle (just right of the imaginary
/// axis), counted by the argument principle.
pub(crate) fn winding_number(
    d: &impl Fn(Complex64) -> Result<Complex64>,
    search: RootSearch,
    kappa: f64,
) -> Result<i64> {
    let w = WAVENUMBER * search.v_max;
    let eps = 1e-6 * kappa;
    let corners = [
        Complex64::new(eps, -w),
        Complex64::new(search.s_max, -w),
        Complex64::new(search.s_max, w),
        Complex64::new(eps, w),
    ];
    let mut total = 0.0;
    for k in 0..4 {
        let (a, b) = (corners[k], corners[(k + 1) % 4]);
        total += arg_change(d, a, b, 0)?;
    }
    Ok((total / std::f64::consts::TAU).round() as i64)
}

fn arg_change(d: &impl Fn(Complex64) -> Result<Complex64>, a: Complex64, b: Complex64, depth: u32) -> Result<f64> {
    const PIECES: usize = 64;
    let mut total = 0.0;
    let mut prev_s = a;
    let mut prev = d(a)?;
    for i in 1..=PIECES {
        let s = a + (b - a) * (i as f64 / PIECES as f64);
        let cur = d(s)?;
        let change = (cur / prev).arg();
        if change.abs() > 0.5 && depth < 6 {
            total += arg_change(d, prev_s, s, depth + 1)?;
        } else {
            total += change;
        }
        prev_s = s;
        prev = cur;
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::critical_pump_q_gaussian;

    fn at_ratio(ratio: f64) -> (ModelParams, VelocityDistribution) {
        // δ = −κ with negligible NU₀, Gaussian at T = ħκ/2
        let kappa = 100.0;
        let eta_c = critical_pump_q_gaussian(kappa, -kappa, 1.0).unwrap();
        let p = ModelParams::from_collective(100, -1e-6, kappa, -kappa - 0.5e-6, ratio * eta_c);
        (p, VelocityDistribution::gaussian(kappa / 2.0).unwrap())
    }

    #[test]
    fn below_threshold_has_no_root() {
        let (p, f) = at_ratio(0.5);
        assert_eq!(growth_rate(&p, &f).unwrap(), None);
    }

    #[test]
    fn above_threshold_grows() {
        let (p, f) = at_ratio(2.0);
        let s = growth_rate(&p, &f).unwrap().unwrap();
        assert!(s.re > 0.0);
        assert!(dispersion(s, &f, &p).unwrap().norm() < 1e-8 * 2e4);
    }

    #[test]
    fn marginal_root_at_origin() {
        let (p, f) = at_ratio(1.0);
        let s = growth_rate(&p, &f).unwrap().unwrap();
        assert!(s.norm() < 1e-6 * p.kappa, "{s}");
    }

    #[test]
    fn winding_counts_the_growing_mode() {
        let (p, f) = at_ratio(2.0);
        let d = |s: Complex64| dispersion(s, &f, &p);
        let n = winding_number(&d, RootSearch::for_problem(&p, &f), p.kappa).unwrap();
        assert_eq!(n, 1);
        let (p, f) = at_ratio(0.5);
        let d = |s: Complex64| dispersion(s, &f, &p);
        assert_eq!(winding_number(&d, RootSearch::for_problem(&p, &f), p.kappa).unwrap(), 0);
    }
}
