use num_complex::Complex64;
use std::f64::consts::PI;

use super::coefficients::{coefficients_from, drift_exponent, DispersionModel};
use crate::error::{invalid, Error, Result};
use crate::kinetic::{bare_dispersion, collective_coupling, VelocityDistribution};
use crate::model::{ModelParams, MASS, WAVENUMBER};
use crate::quad::{integrate_to_infinity, Tolerance};

/// Uniform cell-centred velocity grid on `[−v_max, v_max]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FpeGrid {
    pub v_max: f64,
    pub n_cells: usize,
}

impl FpeGrid {
    pub fn new(v_max: f64, n_cells: usize) -> Result<Self> {
        if !(v_max > 0.0 && v_max.is_finite()) {
            return Err(invalid("v_max", "must be positive"));
        }
        if n_cells < 8 || !n_cells.is_multiple_of(2) {
            return Err(invalid("n_cells", "need an even number of at least 8 cells"));
        }
        Ok(Self { v_max, n_cells })
    }

    pub fn spacing(&self) -> f64 {
        2.0 * self.v_max / self.n_cells as f64
    }

    pub fn centres(&self) -> Vec<f64> {
        let h = self.spacing();
        (0..self.n_cells).map(|i| -self.v_max + (i as f64 + 0.5) * h).collect()
    }

    /// Interior faces, `n_cells − 1` of them.
    pub fn faces(&self) -> Vec<f64> {
        let h = self.spacing();
        (1..self.n_cells).map(|i| -self.v_max + i as f64 * h).collect()
    }

    /// Cell values of `f`, rescaled to unit discrete mass.
    pub fn project(&self, f: &VelocityDistribution) -> Vec<f64> {
        let mut values: Vec<f64> = self.centres().iter().map(|&v| f.density(v)).collect();
        let mass = self.mass(&values);
        values.iter_mut().for_each(|x| *x /= mass);
        values
    }

    pub fn mass(&self, f: &[f64]) -> f64 {
        f.iter().sum::<f64>() * self.spacing()
    }

    /// `m Σ v² F h`.
    pub fn kinetic_temperature(&self, f: &[f64]) -> f64 {
        let h = self.spacing();
        MASS * self.centres().iter().zip(f).map(|(v, x)| v * v * x).sum::<f64>() * h
    }

    /// `∫|F − F_ref| dv`, counting the reference mass outside the grid.
    pub fn l1_distance(&self, f: &[f64], reference: &VelocityDistribution) -> Result<f64> {
        let h = self.spacing();
        let inside: f64 = self
            .centres()
            .iter()
            .zip(f)
            .map(|(&v, &x)| (x - reference.density(v)).abs())
            .sum::<f64>()
            * h;
        Ok(inside + outside_mass(reference, self.v_max)?)
    }
}

/// Mass of `f` beyond `|v| > v_max`.
pub fn outside_mass(f: &VelocityDistribution, v_max: f64) -> Result<f64> {
    let tail = integrate_to_infinity(|v| f.density(v), v_max, f.scale(), Tolerance::new(1e-300, 1e-10))?;
    Ok(2.0 * tail.value)
}

/// Grid extent and the mass it leaves out.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridExtent {
    pub v_max: f64,
    pub truncated_mass: f64,
}

/// `max(8 v_T, v where the tail mass drops below 10⁻⁶)`, capped at
/// `cap · v_T` for very heavy tails.
pub fn grid_extent(f: &VelocityDistribution, cap: f64) -> Result<GridExtent> {
    const TAIL: f64 = 1e-6;
    let vt = f.scale();
    let mut v = 8.0 * vt;
    let limit = cap.max(8.0) * vt;
    if outside_mass(f, v)? > TAIL {
        let mut lo = v;
        let mut hi = v;
        while outside_mass(f, hi)? > TAIL && hi < limit {
            lo = hi;
            hi = (hi * 2.0).min(limit);
        }
        if outside_mass(f, hi)? > TAIL {
            v = limit;
        } else {
            for _ in 0..50 {
                let mid = 0.5 * (lo + hi);
                if outside_mass(f, mid)? > TAIL {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            v = hi;
        }
    }
    Ok(GridExtent {
        v_max: v,
        truncated_mass: outside_mass(f, v)?,
    })
}

/// Supplies the face coefficients of `∂_t F = ∂_v(B ∂_vF − A F)`.
pub trait TransportModel {
    /// Fills, for every interior face, the diffusion `B` and the drift
    /// exponent `∫ A/B dv` between the two neighbouring cell centres.
    fn faces(&mut self, grid: &FpeGrid, f: &[f64], diffusion: &mut [f64], exponent: &mut [f64]) -> Result<()>;

    /// Whether `faces` depends on `f` (and must be refreshed).
    fn depends_on_state(&self) -> bool {
        true
    }
}

/// Constant drift and diffusion.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstantTransport {
    pub drift: f64,
    pub diffusion: f64,
}

impl TransportModel for ConstantTransport {
    fn faces(&mut self, grid: &FpeGrid, _f: &[f64], diffusion: &mut [f64], exponent: &mut [f64]) -> Result<()> {
        let p = grid.spacing() * self.drift / self.diffusion;
        diffusion.fill(self.diffusion);
        exponent.fill(p);
        Ok(())
    }

    fn depends_on_state(&self) -> bool {
        false
    }
}

/// Cavity-mediated friction and diffusion, with `D(ikv)` evaluated against
/// the current grid density by a discrete Hilbert transform.
#[derive(Debug, Clone, PartialEq)]
pub struct CavityTransport {
    pub params: ModelParams,
    pub model: DispersionModel,
}

impl CavityTransport {
    pub fn new(params: ModelParams, model: DispersionModel) -> Self {
        Self { params, model }
    }
}

impl TransportModel for CavityTransport {
    fn faces(&mut self, grid: &FpeGrid, f: &[f64], diffusion: &mut [f64], exponent: &mut [f64]) -> Result<()> {
        let h = grid.spacing();
        let centres = grid.centres();
        let faces = grid.faces();
        let n = f.len();
        let k = WAVENUMBER;
        for j in 0..faces.len() {
            exponent[j] = drift_exponent(centres[j], centres[j + 1], &self.params);
        }
        let slope: Vec<f64> = (0..n)
            .map(|i| match i {
                0 => (f[1] - f[0]) / h,
                _ if i == n - 1 => (f[n - 1] - f[n - 2]) / h,
                _ => (f[i + 1] - f[i - 1]) / (2.0 * h),
            })
            .collect();
        let coupling = collective_coupling(&self.params);
        for (j, &w) in faces.iter().enumerate() {
            let s = Complex64::new(0.0, k * w);
            let d = match self.model {
                DispersionModel::FarBelowThreshold => bare_dispersion(s, &self.params),
                DispersionModel::Full => {
                    // χ(ikw) = (1/k²)[vp∫ F′(u)/(u + w) du + iπ F′(−w)]; −w is
                    // face n−2−j and sits midway between cell centres, so the
                    // midpoint sum is symmetric about the pole.
                    let pv: f64 = centres.iter().zip(&slope).map(|(u, d)| d / (u + w)).sum::<f64>() * h;
                    let mirror = n - 2 - j;
                    let residue = (f[mirror + 1] - f[mirror]) / h;
                    let chi = Complex64::new(pv, PI * residue) / (k * k);
                    bare_dispersion(s, &self.params) - coupling * chi
                }
            };
            diffusion[j] = coefficients_from(w, d.norm_sqr(), &self.params).b;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FpeOptions {
    pub t_final: f64,
    pub dt: f64,
    /// Each step is this factor longer than the previous, up to `dt_max`.
    pub dt_growth: f64,
    pub dt_max: f64,
    /// 1 is backward Euler (positivity preserving), ½ is Crank–Nicolson.
    pub theta: f64,
    /// Coefficients are refreshed once this much time has passed.
    pub refresh_interval: f64,
    pub mass_tolerance: f64,
    /// Stop once a step changes `F` by less than this in L¹.
    pub steady_tolerance: Option<f64>,
    /// Keep every this many steps (the final state is always kept).
    pub snapshot_every: Option<usize>,
}

impl FpeOptions {
    /// Backward Euler with coefficients refreshed every `0.5/κ`.
    pub fn for_params(params: &ModelParams, t_final: f64, dt: f64) -> Self {
        Self {
            t_final,
            dt,
            dt_growth: 1.0,
            dt_max: dt,
            theta: 1.0,
            refresh_interval: 0.5 / params.kappa,
            mass_tolerance: 1e-9,
            steady_tolerance: None,
            snapshot_every: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FpeSolution {
    pub grid: FpeGrid,
    pub times: Vec<f64>,
    pub snapshots: Vec<Vec<f64>>,
    pub steps: usize,
    /// The steady tolerance was met before `t_final`.
    pub converged: bool,
}

impl FpeSolution {
    pub fn final_state(&self) -> (f64, &[f64]) {
        let i = self.times.len() - 1;
        (self.times[i], &self.snapshots[i])
    }
}

fn bernoulli(x: f64) -> f64 {
    if x.abs() < 1e-10 {
        1.0 - 0.5 * x
    } else {
        x / x.exp_m1()
    }
}

/// Tridiagonal generator `L` with `∂_t F = L F`, stored as `(lower, diag, upper)`.
struct Operator {
    lower: Vec<f64>,
    diag: Vec<f64>,
    upper: Vec<f64>,
}

impl Operator {
    /// Scharfetter–Gummel fluxes `J = −(B/h)[β(P) F_{i+1} − β(−P) F_i]`, zero
    /// at both walls. Columns sum to zero, so mass is conserved exactly.
    fn assemble(h: f64, diffusion: &[f64], exponent: &[f64], n: usize) -> Self {
        let mut op = Self {
            lower: vec![0.0; n],
            diag: vec![0.0; n],
            upper: vec![0.0; n],
        };
        let h2 = h * h;
        for (j, (&b, &p)) in diffusion.iter().zip(exponent).enumerate() {
            let forward = b * bernoulli(p) / h2;
            let backward = b * bernoulli(-p) / h2;
            // face j joins cells j and j+1
            op.upper[j] += forward;
            op.diag[j] -= backward;
            op.lower[j + 1] += backward;
            op.diag[j + 1] -= forward;
        }
        op
    }

    fn apply(&self, f: &[f64], out: &mut [f64]) {
        let n = f.len();
        for i in 0..n {
            let mut acc = self.diag[i] * f[i];
            if i > 0 {
                acc += self.lower[i] * f[i - 1];
            }
            if i + 1 < n {
                acc += self.upper[i] * f[i + 1];
            }
            out[i] = acc;
        }
    }

    /// Solves `(I − c L) x = rhs` by the Thomas algorithm.
    fn solve_shifted(&self, c: f64, rhs: &[f64], x: &mut [f64]) {
        let n = rhs.len();
        let mut cp = vec![0.0; n];
        let mut dp = vec![0.0; n];
        let b0 = 1.0 - c * self.diag[0];
        cp[0] = -c * self.upper[0] / b0;
        dp[0] = rhs[0] / b0;
        for i in 1..n {
            let a = -c * self.lower[i];
            let b = 1.0 - c * self.diag[i];
            let denom = b - a * cp[i - 1];
            cp[i] = if i + 1 < n { -c * self.upper[i] / denom } else { 0.0 };
            dp[i] = (rhs[i] - a * dp[i - 1]) / denom;
        }
        x[n - 1] = dp[n - 1];
        for i in (0..n - 1).rev() {
            x[i] = dp[i] - cp[i] * x[i + 1];
        }
    }
}

/// Relative zero-flux residual `Σ|J| / Σ(|B β(P) F_{i+1}| + |B β(−P) F_i|)/h`
/// of `f` under `model`.
pub fn flux_residual(model: &mut impl TransportModel, grid: &FpeGrid, f: &[f64]) -> Result<f64> {
    let m = grid.n_cells - 1;
    let (mut b, mut p) = (vec![0.0; m], vec![0.0; m]);
    model.faces(grid, f, &mut b, &mut p)?;
    let (mut net, mut gross) = (0.0, 0.0);
    for j in 0..m {
        let fwd = b[j] * bernoulli(p[j]) * f[j + 1];
        let bwd = b[j] * bernoulli(-p[j]) * f[j];
        net += (fwd - bwd).abs();
        gross += fwd.abs() + bwd.abs();
    }
    Ok(if gross > 0.0 { net / gross } else { 0.0 })
}

/// Evolves `∂_t F = ∂_v(B ∂_vF − A F)` on `grid` from `f0` with no-flux walls.
pub fn evolve_distribution(
    model: &mut impl TransportModel,
    f0: &VelocityDistribution,
    grid: FpeGrid,
    options: FpeOptions,
) -> Result<FpeSolution> {
    evolve_values(model, grid.project(f0), grid, options)
}

/// As [`evolve_distribution`], from cell values.
pub fn evolve_values(
    model: &mut impl TransportModel,
    mut f: Vec<f64>,
    grid: FpeGrid,
    options: FpeOptions,
) -> Result<FpeSolution> {
    let n = grid.n_cells;
    if f.len() != n {
        return Err(invalid("f0", format!("expected {n} cell values, got {}", f.len())));
    }
    if !(options.dt > 0.0 && options.t_final > 0.0 && options.dt_growth >= 1.0 && options.dt_max >= options.dt) {
        return Err(invalid(
            "fpe options",
            "need dt > 0, t_final > 0, dt_growth ≥ 1, dt_max ≥ dt",
        ));
    }
    if !(0.5..=1.0).contains(&options.theta) {
        return Err(invalid("theta", "must lie in [0.5, 1]"));
    }
    let peak = f.iter().cloned().fold(0.0, f64::max);
    let deviation = (0..n).map(|i| (f[i] - f[n - 1 - i]).abs()).fold(0.0, f64::max) / peak.max(1e-300);
    if deviation > 1e-6 {
        return Err(Error::AsymmetricDistribution { deviation });
    }
    let h = grid.spacing();
    let centres = grid.centres();
    let mass0 = grid.mass(&f);
    let mut b = vec![0.0; n - 1];
    let mut p = vec![0.0; n - 1];
    model.faces(&grid, &f, &mut b, &mut p)?;
    let mut op = Operator::assemble(h, &b, &p, n);
    let mut since_refresh = 0.0;

    let mut solution = FpeSolution {
        grid,
        times: vec![],
        snapshots: vec![],
        steps: 0,
        converged: false,
    };
    let mut t = 0.0;
    let mut dt = options.dt;
    let mut lf = vec![0.0; n];
    let mut rhs = vec![0.0; n];
    let mut next = vec![0.0; n];
    while t < options.t_final * (1.0 - 1e-14) {
        let step = dt.min(options.t_final - t);
        if since_refresh >= options.refresh_interval && model.depends_on_state() {
            model.faces(&grid, &f, &mut b, &mut p)?;
            op = Operator::assemble(h, &b, &p, n);
            since_refresh = 0.0;
        }
        let explicit = (1.0 - options.theta) * step;
        if explicit > 0.0 {
            op.apply(&f, &mut lf);
            for i in 0..n {
                rhs[i] = f[i] + explicit * lf[i];
            }
        } else {
            rhs.copy_from_slice(&f);
        }
        op.solve_shifted(options.theta * step, &rhs, &mut next);
        t += step;
        since_refresh += step;
        solution.steps += 1;

        let scale = next.iter().cloned().fold(0.0, f64::max);
        if let Some((i, &value)) = next.iter().enumerate().find(|(_, x)| **x < -1e-12 * scale) {
            return Err(Error::PositivityViolation {
                t,
                v: centres[i],
                value,
            });
        }
        let drift = (grid.mass(&next) - mass0).abs();
        if drift > options.mass_tolerance * (1.0 + t).max(1.0) {
            return Err(Error::MassDrift {
                t,
                drift,
                tolerance: options.mass_tolerance,
            });
        }
        let change: f64 = next.iter().zip(&f).map(|(a, b)| (a - b).abs()).sum::<f64>() * h;
        std::mem::swap(&mut f, &mut next);
        if options.snapshot_every.is_some_and(|every| solution.steps.is_multiple_of(every)) {
            solution.times.push(t);
            solution.snapshots.push(f.clone());
        }
        if options.steady_tolerance.is_some_and(|tol| change < tol) && dt >= options.dt_max {
            solution.converged = true;
            break;
        }
        dt = (dt * options.dt_growth).min(options.dt_max);
    }
    if solution.times.last() != Some(&t) {
        solution.times.push(t);
        solution.snapshots.push(f);
    }
    Ok(solution)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{equilibrium_temperature, tsallis_index};
    use approx::assert_relative_eq;

    #[test]
    fn heat_kernel_widening() {
        let d0 = 0.7;
        let t0 = 1.0;
        let grid = FpeGrid::new(20.0, 1600).unwrap();
        let f0 = VelocityDistribution::gaussian(t0).unwrap();
        let mut model = ConstantTransport {
            drift: 0.0,
            diffusion: d0,
        };
        let t_final = 2.0;
        let options = FpeOptions {
            t_final,
            dt: 2e-3,
            dt_growth: 1.0,
            dt_max: 2e-3,
            theta: 0.5,
            refresh_interval: f64::INFINITY,
            mass_tolerance: 1e-12,
            steady_tolerance: None,
            snapshot_every: None,
        };
        let sol = evolve_distribution(&mut model, &f0, grid, options).unwrap();
        // variance σ² + 2Dt, i.e. k_BT grows by m·2Dt
        let exact = VelocityDistribution::gaussian(t0 + MASS * 2.0 * d0 * t_final).unwrap();
        let (_, f) = sol.final_state();
        let err = grid.l1_distance(f, &exact).unwrap();
        assert!(err < 1e-4, "L1 = {err:e}");
    }

    #[test]
    fn mass_is_conserved_and_positive() {
        let p = ModelParams::from_collective(100, -0.01, 100.0, -20.0, 60.0);
        let f0 = VelocityDistribution::gaussian(300.0).unwrap();
        let grid = FpeGrid::new(400.0, 800).unwrap();
        let mut model = CavityTransport::new(p, DispersionModel::Full);
        let mut options = FpeOptions::for_params(&p, 50.0, 0.05);
        options.snapshot_every = Some(100);
        let sol = evolve_distribution(&mut model, &f0, grid, options).unwrap();
        for f in &sol.snapshots {
            assert!((grid.mass(f) - 1.0).abs() < 1e-9 * 50.0);
            assert!(f.iter().all(|x| *x >= 0.0));
        }
    }

    #[test]
    fn analytic_equilibrium_is_stationary() {
        for delta in [-2.0, -2.5, -20.0, -100.0] {
            let p = ModelParams::from_collective(100, -0.01, 100.0, delta, 1.0);
            let q = tsallis_index(delta).unwrap();
            let f = VelocityDistribution::q_gaussian(q, equilibrium_temperature(100.0, delta).unwrap()).unwrap();
            let ext = grid_extent(&f, 200.0).unwrap();
            let grid = FpeGrid::new(ext.v_max, 2000).unwrap();
            let values = grid.project(&f);
            let mut model = CavityTransport::new(p, DispersionModel::FarBelowThreshold);
            let residual = flux_residual(&mut model, &grid, &values).unwrap();
            assert!(residual < 1e-6, "delta = {delta}: {residual:e}");
        }
    }

    #[test]
    fn extent_covers_tails() {
        let g = VelocityDistribution::gaussian(50.0).unwrap();
        let e = grid_extent(&g, 200.0).unwrap();
        assert_relative_eq!(e.v_max, 8.0 * g.scale(), epsilon = 1e-12);
        let q = VelocityDistribution::q_gaussian(1.4, 1000.0).unwrap();
        let e = grid_extent(&q, 200.0).unwrap();
        assert!(e.v_max > 8.0 * q.scale());
        assert_relative_eq!(e.truncated_mass, 1e-6, max_relative = 1e-3);
        let heavy = VelocityDistribution::q_gaussian(1.66, 1.0).unwrap();
        let e = grid_extent(&heavy, 50.0).unwrap();
        assert_relative_eq!(e.v_max, 50.0 * heavy.scale(), epsilon = 1e-9);
        assert!(e.truncated_mass > 1e-6);
    }

    #[test]
    fn rejects_asymmetric_start() {
        let grid = FpeGrid::new(10.0, 20).unwrap();
        let mut f = vec![1.0; 20];
        f[3] = 2.0;
        let mut model = ConstantTransport {
            drift: 0.0,
            diffusion: 1.0,
        };
        let options = FpeOptions {
            t_final: 1.0,
            dt: 0.1,
            dt_growth: 1.0,
            dt_max: 0.1,
            theta: 1.0,
            refresh_interval: 1.0,
            mass_tolerance: 1e-9,
            steady_tolerance: None,
            snapshot_every: None,
        };
        assert!(matches!(
            evolve_values(&mut model, f, grid, options),
            Err(Error::AsymmetricDistribution { .. })
        ));
    }
}
