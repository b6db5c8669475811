use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use std::f64::consts::TAU;

use super::dynamics::{GuardBounds, Integrator, SimState};
use crate::analysis::ObservableRow;
use crate::error::{invalid, Error, Result, TrajectoryFailure};
use crate::model::{ModelParams, MASS, WAVENUMBER};
use crate::rng::{initial_condition_rng, NoiseStream};

/// Largest admissible `dt·√(κ² + δ²)`.
pub const STABILITY_BOUND: f64 = 0.2;

/// How an ensemble is sampled, integrated and recorded.
#[derive(Debug, Clone, PartialEq)]
pub struct EnsemblePlan {
    /// Independent initial phase-space samples.
    pub n_initial_conditions: usize,
    /// Noise realisations per initial condition.
    pub n_noise_realisations: usize,
    /// Initial kinetic temperature `k_B T₀ = m⟨v²⟩`.
    pub initial_temperature: f64,
    pub t_final: f64,
    pub dt: f64,
    /// Record observables every this many steps.
    pub output_stride: usize,
    /// Keep full `(x, v)` snapshots every this many steps, from
    /// `snapshot_after` on.
    pub snapshot_stride: Option<usize>,
    pub snapshot_after: f64,
    pub master_seed: u64,
    /// Defaults to [`GuardBounds::for_particles`].
    pub guard: Option<GuardBounds>,
}

impl EnsemblePlan {
    pub fn new(initial_temperature: f64, t_final: f64, dt: f64, master_seed: u64) -> Self {
        Self {
            n_initial_conditions: 1,
            n_noise_realisations: 1,
            initial_temperature,
            t_final,
            dt,
            output_stride: 1,
            snapshot_stride: None,
            snapshot_after: 0.0,
            master_seed,
            guard: None,
        }
    }

    pub fn n_steps(&self) -> u64 {
        (self.t_final / self.dt).round() as u64
    }

    pub fn n_trajectories(&self) -> usize {
        self.n_initial_conditions * self.n_noise_realisations
    }

    pub fn validate(&self, params: &ModelParams) -> Result<()> {
        if self.n_trajectories() < 1 {
            return Err(invalid("ensemble", "needs at least one trajectory"));
        }
        if !(self.initial_temperature > 0.0 && self.initial_temperature.is_finite()) {
            return Err(invalid("initial_temperature", "must be positive"));
        }
        if !(self.t_final > 0.0 && self.t_final.is_finite()) {
            return Err(invalid("t_final", "must be positive"));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(invalid("dt", "must be positive"));
        }
        let bound = STABILITY_BOUND / params.kappa.hypot(params.delta());
        if self.dt > bound * (1.0 + 1e-12) {
            return Err(invalid(
                "dt",
                format!("{} exceeds the stability bound {bound:.3e}", self.dt),
            ));
        }
        if self.output_stride == 0 || self.snapshot_stride == Some(0) {
            return Err(invalid("output_stride", "strides must be positive"));
        }
        Ok(())
    }
}

/// Default step: resolves the field (`dt·√(κ²+δ²) = 0.1`) and keeps the
/// per-step phase advance of a particle at eight thermal velocities below 0.1.
pub fn default_dt(params: &ModelParams, initial_temperature: f64) -> f64 {
    let field = 0.1 / params.kappa.hypot(params.delta());
    let v_thermal = (2.0 * initial_temperature / MASS).sqrt();
    let doppler = 0.1 / (WAVENUMBER * 8.0 * v_thermal);
    field.min(doppler)
}

/// Uniform positions, Gaussian velocities with `m⟨v²⟩ = k_B T₀`, empty cavity.
pub fn sample_initial<R: Rng + ?Sized>(params: &ModelParams, t0: f64, rng: &mut R) -> SimState {
    let sigma = (t0 / MASS).sqrt();
    let x = (0..params.n).map(|_| rng.gen::<f64>() * TAU / WAVENUMBER).collect();
    let v = (0..params.n)
        .map(|_| {
            let z: f64 = StandardNormal.sample(rng);
            sigma * z
        })
        .collect::<Vec<f64>>();
    SimState {
        t: 0.0,
        x,
        v,
        alpha: Complex64::new(0.0, 0.0),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct TrajectoryId {
    pub initial_condition: usize,
    pub realisation: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub t: f64,
    pub x: Vec<f64>,
    pub v: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryRecord {
    pub id: TrajectoryId,
    pub rows: Vec<ObservableRow>,
    pub snapshots: Vec<Snapshot>,
}

/// Mean and standard error across trajectories, one entry per output time.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SeriesStat {
    pub mean: Vec<f64>,
    pub stderr: Vec<f64>,
}

impl SeriesStat {
    fn from_columns(columns: &[Vec<f64>]) -> Self {
        let m = columns.len() as f64;
        let len = columns.first().map_or(0, Vec::len);
        let mut out = SeriesStat {
            mean: Vec::with_capacity(len),
            stderr: Vec::with_capacity(len),
        };
        for i in 0..len {
            let mean = columns.iter().map(|c| c[i]).sum::<f64>() / m;
            let stderr = if columns.len() > 1 {
                let var = columns.iter().map(|c| (c[i] - mean).powi(2)).sum::<f64>() / (m - 1.0);
                (var / m).sqrt()
            } else {
                0.0
            };
            out.mean.push(mean);
            out.stderr.push(stderr);
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleRecord {
    pub times: Vec<f64>,
    pub t_kin: SeriesStat,
    pub theta: SeriesStat,
    /// `|Θ̂|` per trajectory, averaged; both signs of the ordered phase are physical.
    pub abs_theta: SeriesStat,
    pub n_photon: SeriesStat,
    pub re_alpha: SeriesStat,
    pub im_alpha: SeriesStat,
    /// Ordered by `(initial condition, realisation)`.
    pub trajectories: Vec<TrajectoryRecord>,
}

impl EnsembleRecord {
    pub fn from_trajectories(trajectories: Vec<TrajectoryRecord>) -> Self {
        let times = trajectories
            .first()
            .map(|t| t.rows.iter().map(|r| r.t).collect())
            .unwrap_or_default();
        let column = |f: fn(&ObservableRow) -> f64| -> SeriesStat {
            let cols: Vec<Vec<f64>> = trajectories.iter().map(|t| t.rows.iter().map(f).collect()).collect();
            SeriesStat::from_columns(&cols)
        };
        Self {
            times,
            t_kin: column(|r| r.t_kin),
            theta: column(|r| r.theta),
            abs_theta: column(|r| r.theta.abs()),
            n_photon: column(|r| r.n_photon),
            re_alpha: column(|r| r.re_alpha),
            im_alpha: column(|r| r.im_alpha),
            trajectories,
        }
    }
}

fn observe(it: &Integrator) -> ObservableRow {
    let alpha = it.alpha();
    ObservableRow {
        t: it.time(),
        t_kin: it.kinetic_temperature(),
        theta: it.order_parameter(),
        n_photon: alpha.norm_sqr(),
        re_alpha: alpha.re,
        im_alpha: alpha.im,
    }
}

/// Integrates one trajectory from `init` to `plan.t_final`.
///
/// The result depends only on the inputs and `(plan.master_seed, id)`.
pub fn run_trajectory(
    params: &ModelParams,
    init: SimState,
    plan: &EnsemblePlan,
    id: TrajectoryId,
) -> Result<TrajectoryRecord> {
    plan.validate(params)?;
    let guard = plan.guard.unwrap_or_else(|| GuardBounds::for_particles(params.n));
    let t_start = init.t;
    let mut it = Integrator::new(params, init, plan.dt, guard)?;
    let mut noise = NoiseStream::new(plan.master_seed, id.initial_condition, id.realisation);
    let n_steps = plan.n_steps();
    let stride = plan.output_stride as u64;
    let mut rows = Vec::with_capacity((n_steps / stride) as usize);
    let mut snapshots = Vec::new();
    for k in 0..n_steps {
        let (a, b) = noise.standard_normals(k);
        it.advance(a, b)?;
        let step = k + 1;
        // t from the step count, not by accumulation
        it.set_time(t_start + step as f64 * plan.dt);
        if step % stride == 0 {
            rows.push(observe(&it));
        }
        if let Some(s) = plan.snapshot_stride {
            if step % s as u64 == 0 && it.time() >= plan.snapshot_after {
                snapshots.push(Snapshot {
                    t: it.time(),
                    x: it.positions().to_vec(),
                    v: it.velocities().to_vec(),
                });
            }
        }
    }
    Ok(TrajectoryRecord { id, rows, snapshots })
}

/// Runs `I × R` trajectories on the current rayon pool and averages them.
///
/// Each initial condition is sampled from its own stream; each
/// `(initial condition, realisation)` pair has its own noise stream. Results
/// are merged by index, so the worker count never changes the output.
pub fn run_ensemble(params: &ModelParams, plan: &EnsemblePlan) -> Result<EnsembleRecord> {
    plan.validate(params)?;
    let ids: Vec<TrajectoryId> = (0..plan.n_initial_conditions)
        .flat_map(|ic| {
            (0..plan.n_noise_realisations).map(move |r| TrajectoryId {
                initial_condition: ic,
                realisation: r,
            })
        })
        .collect();
    let results: Vec<Result<TrajectoryRecord>> = ids
        .par_iter()
        .map(|&id| {
            let mut rng = initial_condition_rng(plan.master_seed, id.initial_condition);
            let init = sample_initial(params, plan.initial_temperature, &mut rng);
            run_trajectory(params, init, plan, id)
        })
        .collect();

    let total = results.len();
    let mut trajectories = Vec::with_capacity(total);
    let mut failures = Vec::new();
    for (id, result) in ids.into_iter().zip(results) {
        match result {
            Ok(record) => trajectories.push(record),
            Err(e) => failures.push(TrajectoryFailure {
                initial_condition: id.initial_condition,
                realisation: id.realisation,
                error: Box::new(e),
            }),
        }
    }
    if !failures.is_empty() {
        return Err(Error::EnsembleFailed { total, failures });
    }
    Ok(EnsembleRecord::from_trajectories(trajectories))
}
