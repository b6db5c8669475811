//! The five run modes. Each writes its tables and a `manifest.toml` through a
//! [`Staging`] directory.

use rayon::prelude::*;
use std::path::{Path, PathBuf};

use cavkin::analysis::{
    fit_q_gaussian, q_gaussian_log_density, sweep_statistics, window_average, SweepPoint, LONG_TIME_BLOCKS,
    LONG_TIME_FRACTION,
};
use cavkin::fpe::{
    closure_fixed_point, evolve_distribution, evolve_temperature, grid_extent, CavityTransport, ClosureOptions,
    FpeGrid, FpeOptions,
};
use cavkin::kinetic::{gaussian_threshold, organised_equilibrium, q_gaussian, KineticPrediction, VelocityDistribution};
use cavkin::model::{validate_and_derive, MASS};
use cavkin::sim::{default_dt, run_ensemble, EnsemblePlan, EnsembleRecord};
use cavkin::{DerivedParams, ModelParams};

use crate::config::{CollapseSpec, EnsembleSpec, ExperimentConfig, FpeInitial, Mode, SweepAxis};
use crate::error::CliError;
use crate::output::{flag, Staging, Table};

/// Output rows of a trajectory table when no stride is configured.
pub const DEFAULT_ROWS: u64 = 1000;
/// FPE grids reach at most this many thermal velocities of the reference state.
const FPE_EXTENT_CAP: f64 = 40.0;
const HISTOGRAM_BINS: usize = 200;

/// Files written by a successful run, plus anything worth a warning.
#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub files: Vec<PathBuf>,
    pub warnings: Vec<String>,
}

/// Runs `config` and places the artifacts in `out`. Nothing is left behind
/// on failure.
pub fn run(config: &ExperimentConfig, out: &Path) -> Result<Report, CliError> {
    let mut staging = Staging::new(out)?;
    let mut manifest = Manifest::new(config);
    match config.mode {
        Mode::Simulate => simulate(config, &mut staging, &mut manifest)?,
        Mode::Sweep => sweep(config, &mut staging, &mut manifest)?,
        Mode::Kinetic => kinetic(config, &mut staging, &mut manifest)?,
        Mode::Fpe => fpe(config, &mut staging, &mut manifest)?,
        Mode::Collapse => collapse(config, &mut staging, &mut manifest)?,
    }
    let warnings = manifest.warnings.clone();
    let text = manifest.render(staging.files());
    staging.write_text("manifest.toml", &text)?;
    let files = staging.commit()?;
    Ok(Report { files, warnings })
}

struct Manifest {
    root: toml::Table,
    warnings: Vec<String>,
}

impl Manifest {
    fn new(config: &ExperimentConfig) -> Self {
        let mut root = toml::Table::new();
        root.insert("tool".into(), "cavkin".into());
        root.insert("version".into(), env!("CARGO_PKG_VERSION").into());
        root.insert("mode".into(), config.mode.name().into());
        if let Some(seed) = config.seed {
            // TOML integers are signed 64-bit
            match i64::try_from(seed) {
                Ok(s) => root.insert("seed".into(), s.into()),
                Err(_) => root.insert("seed".into(), seed.to_string().into()),
            };
        }
        Self {
            root,
            warnings: Vec::new(),
        }
    }

    /// Nested table at a dotted path, created on first use.
    fn section(&mut self, path: &str) -> &mut toml::Table {
        path.split('.').fold(&mut self.root, |table, name| {
            table
                .entry(name.to_string())
                .or_insert_with(|| toml::Value::Table(toml::Table::new()))
                .as_table_mut()
                .expect("manifest sections are tables")
        })
    }

    fn set(&mut self, section: &str, key: &str, value: impl Into<toml::Value>) {
        self.section(section).insert(key.to_string(), value.into());
    }

    fn set_opt(&mut self, section: &str, key: &str, value: Option<f64>) {
        if let Some(v) = value {
            self.set(section, key, v);
        }
    }

    fn warn(&mut self, message: String) {
        self.warnings.push(message);
    }

    fn model(&mut self, section: &str, params: &ModelParams, derived: &DerivedParams) {
        let p = self.section(section);
        p.insert("n".into(), (params.n as i64).into());
        p.insert("u0".into(), params.u0.into());
        p.insert("n_u0".into(), (params.n as f64 * params.u0).into());
        p.insert("kappa".into(), params.kappa.into());
        p.insert("delta_c".into(), params.delta_c.into());
        p.insert("eta".into(), params.eta.into());
        p.insert("sqrt_n_eta".into(), params.sqrt_n_eta().into());
        let d = self.section(&format!("{section}.derived"));
        d.insert("delta".into(), derived.delta.into());
        if let Some(q) = derived.q {
            d.insert("q".into(), q.into());
        }
        if let Some(t) = derived.t_eq {
            d.insert("t_eq".into(), t.into());
        }
        if let Some(c) = derived.eta_c_scaled {
            d.insert("eta_c_scaled".into(), c.into());
        }
        d.insert("domain_length".into(), derived.domain_length.into());
        let norm = match derived.normalisability {
            cavkin::Normalisability::None => "none",
            cavkin::Normalisability::HeavyTailNoVariance => "heavy-tail-no-variance",
            cavkin::Normalisability::FiniteVariance => "finite-variance",
        };
        d.insert("normalisability".into(), norm.into());
        d.insert("weak_coupling".into(), derived.weak_coupling.into());
        if !derived.weak_coupling {
            self.warn(format!(
                "N|U0| = {} is not small against |Delta_c| and kappa; the kinetic predictions assume weak coupling",
                (params.n as f64 * params.u0).abs()
            ));
        }
    }

    fn plan(&mut self, section: &str, plan: &EnsemblePlan) {
        let s = self.section(section);
        s.insert("initial_conditions".into(), (plan.n_initial_conditions as i64).into());
        s.insert("realisations".into(), (plan.n_noise_realisations as i64).into());
        s.insert("t0".into(), plan.initial_temperature.into());
        s.insert("t_final".into(), plan.t_final.into());
        s.insert("dt".into(), plan.dt.into());
        s.insert("steps".into(), (plan.n_steps() as i64).into());
        s.insert("output_stride".into(), (plan.output_stride as i64).into());
        if let Some(stride) = plan.snapshot_stride {
            s.insert("snapshot_stride".into(), (stride as i64).into());
            s.insert("snapshot_after".into(), plan.snapshot_after.into());
        }
    }

    fn render(mut self, files: &[String]) -> String {
        if !self.warnings.is_empty() {
            let w = self.warnings.iter().cloned().map(toml::Value::from).collect::<Vec<_>>();
            self.root.insert("warnings".into(), w.into());
        }
        let mut names: Vec<toml::Value> = files.iter().cloned().map(toml::Value::from).collect();
        names.push("manifest.toml".into());
        self.root.insert("files".into(), names.into());
        toml::to_string(&self.root).expect("manifest values are representable")
    }
}

fn derive(params: &ModelParams) -> Result<DerivedParams, CliError> {
    Ok(validate_and_derive(params)?)
}

fn require_seed(config: &ExperimentConfig) -> Result<u64, CliError> {
    config.seed.ok_or_else(|| CliError::Config {
        key: "seed".into(),
        message: "missing required field".into(),
    })
}

fn require_ensemble(config: &ExperimentConfig) -> Result<&EnsembleSpec, CliError> {
    config.ensemble.as_ref().ok_or_else(|| CliError::Config {
        key: "ensemble".into(),
        message: "missing required field".into(),
    })
}

/// Plan for `t_final`; a default step is shortened so it divides `t_final`.
fn ensemble_plan(spec: &EnsembleSpec, params: &ModelParams, seed: u64, t_final: f64) -> EnsemblePlan {
    let dt = spec.dt.unwrap_or_else(|| {
        let dt0 = default_dt(params, spec.t0);
        t_final / (t_final / dt0).ceil()
    });
    let mut plan = EnsemblePlan::new(spec.t0, t_final, dt, seed);
    plan.n_initial_conditions = spec.initial_conditions;
    plan.n_noise_realisations = spec.realisations;
    plan.output_stride = spec
        .output_stride
        .unwrap_or_else(|| (plan.n_steps() / DEFAULT_ROWS).max(1) as usize);
    plan.snapshot_stride = spec.snapshot_stride;
    plan.snapshot_after = spec.snapshot_after.unwrap_or((1.0 - LONG_TIME_FRACTION) * t_final);
    plan
}

const SERIES_COLUMNS: [&str; 13] = [
    "t",
    "T_kin",
    "T_kin_stderr",
    "theta",
    "theta_stderr",
    "n_photon",
    "re_alpha",
    "im_alpha",
    "theta_signed",
    "theta_signed_stderr",
    "n_photon_stderr",
    "re_alpha_stderr",
    "im_alpha_stderr",
];

/// Ensemble means; `theta` is the mean of `|Θ̂|`, the signed mean follows.
fn series_table(record: &EnsembleRecord, n: Option<usize>) -> Table {
    let mut header: Vec<&str> = SERIES_COLUMNS.to_vec();
    if n.is_some() {
        header.insert(1, "t_over_n");
    }
    let mut table = Table::new(header);
    for (i, &t) in record.times.iter().enumerate() {
        let mut row = vec![
            t,
            record.t_kin.mean[i],
            record.t_kin.stderr[i],
            record.abs_theta.mean[i],
            record.abs_theta.stderr[i],
            record.n_photon.mean[i],
            record.re_alpha.mean[i],
            record.im_alpha.mean[i],
            record.theta.mean[i],
            record.theta.stderr[i],
            record.n_photon.stderr[i],
            record.re_alpha.stderr[i],
            record.im_alpha.stderr[i],
        ];
        if let Some(n) = n {
            row.insert(1, t / n as f64);
        }
        table.push(row);
    }
    table
}

fn trajectory_table(record: &EnsembleRecord) -> Table {
    let mut table = Table::new([
        "initial_condition",
        "realisation",
        "t",
        "T_kin",
        "theta",
        "n_photon",
        "re_alpha",
        "im_alpha",
    ]);
    for traj in &record.trajectories {
        for r in &traj.rows {
            table.push(vec![
                traj.id.initial_condition as f64,
                traj.id.realisation as f64,
                r.t,
                r.t_kin,
                r.theta,
                r.n_photon,
                r.re_alpha,
                r.im_alpha,
            ]);
        }
    }
    table
}

/// Final-quarter block averages of the ensemble means.
fn long_time(manifest: &mut Manifest, section: &str, record: &EnsembleRecord) {
    let series: [(&str, &[f64]); 6] = [
        ("t_kin", &record.t_kin.mean),
        ("abs_theta", &record.abs_theta.mean),
        ("theta", &record.theta.mean),
        ("n_photon", &record.n_photon.mean),
        ("re_alpha", &record.re_alpha.mean),
        ("im_alpha", &record.im_alpha.mean),
    ];
    let mut any = false;
    for (name, values) in series {
        if let Some(m) = window_average(values, LONG_TIME_FRACTION, LONG_TIME_BLOCKS) {
            manifest.set(section, name, m.value);
            manifest.set(section, &format!("{name}_stderr"), m.stderr);
            any = true;
        }
    }
    if !any {
        manifest.warn(format!(
            "{} output rows are too few for the long-time window of {LONG_TIME_BLOCKS} blocks",
            record.times.len()
        ));
    }
}

fn prediction(manifest: &mut Manifest, section: &str, params: &ModelParams, t0: Option<f64>) {
    let Ok(k) = KineticPrediction::compute(params, t0) else {
        return;
    };
    manifest.set_opt(section, "q", k.q);
    manifest.set_opt(section, "t_eq", k.t_eq);
    manifest.set_opt(section, "t_kin_homogeneous", k.t_kin_homogeneous);
    manifest.set_opt(section, "eta_c_scaled", k.eta_c_scaled);
    if let Some(stable) = k.stable {
        manifest.set(section, "stable", stable);
    }
    if let Some(o) = k.organised {
        manifest.set(section, "t_kin_organised", o.t_kin);
        manifest.set(section, "theta_organised", o.theta);
        manifest.set(section, "omega0", o.omega0);
    }
}

fn simulate(config: &ExperimentConfig, staging: &mut Staging, manifest: &mut Manifest) -> Result<(), CliError> {
    let spec = require_ensemble(config)?;
    let seed = require_seed(config)?;
    let params = config.model.params();
    let derived = derive(&params)?;
    manifest.model("params", &params, &derived);
    let t_final = spec.t_final.ok_or_else(|| CliError::Config {
        key: "ensemble.t_final".into(),
        message: "missing required field".into(),
    })?;
    let plan = ensemble_plan(spec, &params, seed, t_final);
    plan.validate(&params)?;
    manifest.plan("ensemble", &plan);

    let record = run_ensemble(&params, &plan)?;
    staging.write_table("timeseries.tsv", &series_table(&record, None))?;
    if spec.trajectories {
        staging.write_table("trajectories.tsv", &trajectory_table(&record))?;
    }
    long_time(manifest, "results", &record);
    if let (Some(t), Some(teq)) = (manifest_get(manifest, "results", "t_kin"), derived.t_eq) {
        manifest.set("results", "t_kin_over_t_eq", t / teq);
    }
    prediction(manifest, "prediction", &params, Some(spec.t0));

    if spec.fit_q {
        let velocities: Vec<f64> = record
            .trajectories
            .iter()
            .flat_map(|t| t.snapshots.iter().flat_map(|s| s.v.iter().copied()))
            .collect();
        let fit = fit_q_gaussian(&velocities)?;
        manifest.set("fit", "q", fit.q);
        manifest.set("fit", "q_ci_low", fit.q_ci.0);
        manifest.set("fit", "q_ci_high", fit.q_ci.1);
        manifest.set("fit", "temperature", fit.temperature);
        manifest.set("fit", "temperature_ci_low", fit.temperature_ci.0);
        manifest.set("fit", "temperature_ci_high", fit.temperature_ci.1);
        manifest.set("fit", "samples", fit.n as i64);
        manifest.set("fit", "gaussian_limit", fit.gaussian_limit);
        let m2 = velocities.iter().map(|v| v * v).sum::<f64>() / velocities.len() as f64;
        manifest.set("fit", "sample_t_kin", MASS * m2);
        let reference = derived.q.zip(derived.t_eq);
        staging.write_table(
            "velocity_histogram.tsv",
            &histogram(&velocities, m2, (fit.q, fit.temperature), reference),
        )?;
    }
    Ok(())
}

fn manifest_get(manifest: &Manifest, section: &str, key: &str) -> Option<f64> {
    manifest.root.get(section)?.get(key)?.as_float()
}

/// Sample density against the fitted and the predicted q-Gaussian.
fn histogram(v: &[f64], second_moment: f64, fit: (f64, f64), reference: Option<(f64, f64)>) -> Table {
    let range = 6.0 * (2.0 * second_moment).sqrt();
    let h = 2.0 * range / HISTOGRAM_BINS as f64;
    let mut counts = vec![0u64; HISTOGRAM_BINS];
    for &x in v {
        let k = ((x + range) / h).floor();
        if k >= 0.0 && (k as usize) < HISTOGRAM_BINS {
            counts[k as usize] += 1;
        }
    }
    let total = v.len() as f64;
    let mut table = Table::new(["v", "density", "fit_density", "equilibrium_density"]);
    for (k, &c) in counts.iter().enumerate() {
        let centre = -range + (k as f64 + 0.5) * h;
        let predicted = reference
            .and_then(|(q, t)| q_gaussian(centre, q, t).ok())
            .unwrap_or(f64::NAN);
        table.push(vec![
            centre,
            c as f64 / (total * h),
            q_gaussian_log_density(centre, fit.0, fit.1).exp(),
            predicted,
        ]);
    }
    table
}

fn sweep(config: &ExperimentConfig, staging: &mut Staging, manifest: &mut Manifest) -> Result<(), CliError> {
    let spec = require_ensemble(config)?;
    let seed = require_seed(config)?;
    let axis = config.sweep.as_ref().ok_or_else(|| CliError::Config {
        key: "sweep".into(),
        message: "missing required field".into(),
    })?;
    let t_final = spec.t_final.ok_or_else(|| CliError::Config {
        key: "ensemble.t_final".into(),
        message: "missing required field".into(),
    })?;
    let base = config.model.params();
    let derived = derive(&base)?;
    manifest.model("params", &base, &derived);
    manifest.set("sweep", "parameter", axis.axis.name());
    manifest.set(
        "sweep",
        "values",
        axis.values.iter().map(|&v| toml::Value::from(v)).collect::<Vec<_>>(),
    );

    let models: Vec<ModelParams> = axis
        .values
        .iter()
        .map(|&v| match axis.axis {
            SweepAxis::SqrtNEta => config.model.with_sqrt_n_eta(v).params(),
            SweepAxis::Eta => config.model.with_eta(v).params(),
        })
        .collect();
    let plans: Vec<EnsemblePlan> = models.iter().map(|p| ensemble_plan(spec, p, seed, t_final)).collect();
    for (p, plan) in models.iter().zip(&plans) {
        plan.validate(p)?;
    }
    // the step is shared so every pump sees the same noise increments
    let dt = plans.iter().map(|p| p.dt).fold(f64::INFINITY, f64::min);
    let plans: Vec<EnsemblePlan> = plans
        .into_iter()
        .map(|mut p| {
            if spec.dt.is_none() {
                p.dt = dt;
                p.output_stride = spec
                    .output_stride
                    .unwrap_or_else(|| (p.n_steps() / DEFAULT_ROWS).max(1) as usize);
            }
            p
        })
        .collect();
    manifest.plan("ensemble", &plans[0]);

    let records: Vec<EnsembleRecord> = models
        .par_iter()
        .zip(plans.par_iter())
        .map(|(p, plan)| run_ensemble(p, plan))
        .collect::<Result<_, _>>()?;

    let width = (records.len().max(1) - 1).to_string().len().max(3);
    let mut points = Vec::with_capacity(records.len());
    let mut branch = Table::new([
        "sqrt_n_eta",
        "eta",
        "eta_ratio",
        "abs_theta",
        "abs_theta_stderr",
        "T_kin",
        "T_kin_stderr",
        "n_photon",
        "n_photon_stderr",
        "theta_near",
        "theta_organised",
    ]);
    let eta_c = derived.eta_c_scaled;
    for (i, (p, record)) in models.iter().zip(&records).enumerate() {
        staging.write_table(&format!("points/point_{i:0width$}.tsv"), &series_table(record, None))?;
        let point = SweepPoint::from_record(p.sqrt_n_eta(), record)?;
        let ratio = eta_c.map_or(f64::NAN, |c| p.sqrt_n_eta() / c);
        let near = cavkin::kinetic::theta_near_threshold(ratio).unwrap_or(f64::NAN);
        let organised = organised_equilibrium(p).map_or(f64::NAN, |o| o.theta);
        branch.push(vec![
            p.sqrt_n_eta(),
            p.eta,
            ratio,
            point.abs_theta.value,
            point.abs_theta.stderr,
            point.t_kin.value,
            point.t_kin.stderr,
            point.n_photon.value,
            point.n_photon.stderr,
            near,
            organised,
        ]);
        points.push(point);
    }
    staging.write_table("branch.tsv", &branch)?;

    if let Some(eta_c) = eta_c {
        manifest.set("results", "eta_c_scaled", eta_c);
        if points.len() >= 5 {
            let summary = sweep_statistics(points, base.n, eta_c)?;
            manifest.set("results", "noise_floor", summary.noise_floor);
            manifest.set_opt("results", "branch_point", summary.branch_point);
            if let Some(b) = summary.branch_point {
                manifest.set("results", "branch_point_over_eta_c", b / eta_c);
            }
            if let Some(fit) = summary.exponent {
                manifest.set("results", "exponent", fit.exponent);
                manifest.set("results", "exponent_stderr", fit.exponent_stderr);
                manifest.set("results", "exponent_amplitude", fit.amplitude);
                manifest.set("results", "exponent_points", fit.points as i64);
            }
        } else {
            manifest.warn(format!(
                "branch statistics need at least 5 pump values, got {}",
                points.len()
            ));
        }
    }
    if derived.delta < 0.0 {
        manifest.set(
            "results",
            "eta_c_gaussian",
            gaussian_threshold(base.kappa, derived.delta),
        );
    }
    Ok(())
}

fn kinetic(config: &ExperimentConfig, staging: &mut Staging, manifest: &mut Manifest) -> Result<(), CliError> {
    let params = config.model.params();
    let derived = derive(&params)?;
    manifest.model("params", &params, &derived);
    let spec = &config.kinetic;
    let k = KineticPrediction::compute(&params, spec.t0)?;

    let nan = f64::NAN;
    let eta_c = k.eta_c_scaled.unwrap_or(nan);
    let organised = k.organised;
    let t_kin = organised.map(|o| o.t_kin).or(k.t_kin_homogeneous).unwrap_or(nan);
    let mut table = Table::new([
        "sqrt_n_eta",
        "eta_c",
        "eta_ratio",
        "stable",
        "margin",
        "growth_re",
        "growth_im",
        "q",
        "T_eq",
        "T_kin",
        "T_kin_homogeneous",
        "omega0",
        "theta",
        "theta_near",
        "alpha_ss",
        "N_c",
        "tau_opt",
    ]);
    table.push(vec![
        params.sqrt_n_eta(),
        eta_c,
        params.sqrt_n_eta() / eta_c,
        k.stable.map_or(nan, flag),
        k.margin.unwrap_or(nan),
        k.growth_rate.map_or(nan, |s| s.re),
        k.growth_rate.map_or(nan, |s| s.im),
        k.q.unwrap_or(nan),
        k.t_eq.unwrap_or(nan),
        t_kin,
        k.t_kin_homogeneous.unwrap_or(nan),
        organised.map_or(nan, |o| o.omega0),
        organised.map_or(nan, |o| o.theta),
        k.theta_near.unwrap_or(nan),
        organised.map_or(nan, |o| o.alpha_ss),
        k.n_c.map_or(nan, |n| n as f64),
        k.cooling.map_or(nan, |c| c.tau_opt),
    ]);
    staging.write_table("prediction.tsv", &table)?;
    manifest.set("results", "t_kin_over_kappa", t_kin / params.kappa);
    if let Some(c) = k.cooling {
        manifest.set("results", "cooling_time_valid", c.valid);
        if !c.valid {
            manifest.warn(format!(
                "k v_T0 = {} does not exceed kappa; the cooling-time estimate is outside its range",
                c.doppler_width
            ));
        }
    }

    if let Some(t_end) = spec.closure_t_final {
        let t0 = spec.t0.ok_or_else(|| CliError::Config {
            key: "kinetic.t0".into(),
            message: "closure integration needs an initial temperature".into(),
        })?;
        let times = output_times(t_end, spec.closure_points);
        let options = ClosureOptions {
            model: spec.model,
            ..ClosureOptions::default()
        };
        let traj = evolve_temperature(&params, t0, &times, options)?;
        let mut closure = Table::new(["t", "T_kin"]);
        for (t, v) in traj.times.iter().zip(&traj.t_kin) {
            closure.push(vec![*t, *v]);
        }
        staging.write_table("closure.tsv", &closure)?;
        manifest.set_opt("results", "closure_unstable_at", traj.unstable_at);
        manifest.set_opt(
            "results",
            "closure_fixed_point",
            closure_fixed_point(&params, spec.model)?,
        );
    }
    Ok(())
}

/// `points` equally spaced times ending at `t_end`.
fn output_times(t_end: f64, points: usize) -> Vec<f64> {
    (1..=points).map(|i| t_end * i as f64 / points as f64).collect()
}

fn fpe(config: &ExperimentConfig, staging: &mut Staging, manifest: &mut Manifest) -> Result<(), CliError> {
    let spec = config.fpe.as_ref().ok_or_else(|| CliError::Config {
        key: "fpe".into(),
        message: "missing required field".into(),
    })?;
    let params = config.model.params();
    let derived = derive(&params)?;
    manifest.model("params", &params, &derived);

    let equilibrium = match (derived.q, derived.t_eq) {
        (Some(q), Some(t)) if q < 3.0 => Some(VelocityDistribution::q_gaussian(q, t)?),
        _ => None,
    };
    let initial = match spec.initial {
        FpeInitial::Gaussian(t0) => VelocityDistribution::gaussian(t0)?,
        FpeInitial::Equilibrium => equilibrium.clone().ok_or_else(|| CliError::Config {
            key: "fpe.initial".into(),
            message: "no normalisable equilibrium at this detuning".into(),
        })?,
    };
    let v_max = match spec.v_max {
        Some(v) => v,
        None => {
            let mut v = grid_extent(&initial, FPE_EXTENT_CAP)?.v_max;
            if let Some(eq) = &equilibrium {
                v = v.max(grid_extent(eq, FPE_EXTENT_CAP)?.v_max);
            }
            v
        }
    };
    let grid = FpeGrid::new(v_max, spec.cells)?;
    let steps = schedule_steps(spec.t_final, spec.dt, spec.dt_growth, spec.dt_max);
    let mut options = FpeOptions::for_params(&params, spec.t_final, spec.dt);
    options.dt_growth = spec.dt_growth;
    options.dt_max = spec.dt_max;
    options.theta = spec.theta;
    options.steady_tolerance = spec.steady_tolerance;
    options.snapshot_every = Some((steps / spec.snapshots).max(1));
    manifest.set("grid", "v_max", v_max);
    manifest.set("grid", "cells", spec.cells as i64);
    manifest.set("grid", "scheduled_steps", steps as i64);

    let mut model = CavityTransport::new(params, spec.model);
    let solution = evolve_distribution(&mut model, &initial, grid, options)?;

    let mut moments = Table::new(["t", "T_kin", "mass", "l1_equilibrium"]);
    for (t, f) in solution.times.iter().zip(&solution.snapshots) {
        let l1 = match &equilibrium {
            Some(eq) => grid.l1_distance(f, eq)?,
            None => f64::NAN,
        };
        moments.push(vec![*t, grid.kinetic_temperature(f), grid.mass(f), l1]);
    }
    staging.write_table("fpe_moments.tsv", &moments)?;

    let (t_end, f_end) = solution.final_state();
    let f_start = grid.project(&initial);
    let f_eq = equilibrium.as_ref().map(|eq| grid.project(eq));
    let mut dist = Table::new(["v", "F_initial", "F_final", "F_equilibrium"]);
    for (i, v) in grid.centres().into_iter().enumerate() {
        dist.push(vec![v, f_start[i], f_end[i], f_eq.as_ref().map_or(f64::NAN, |f| f[i])]);
    }
    staging.write_table("distribution.tsv", &dist)?;

    manifest.set("results", "t_end", t_end);
    manifest.set("results", "steps", solution.steps as i64);
    manifest.set("results", "converged", solution.converged);
    manifest.set("results", "t_kin", grid.kinetic_temperature(f_end));
    if let Some(eq) = &equilibrium {
        manifest.set("results", "l1_equilibrium", grid.l1_distance(f_end, eq)?);
    }

    if let FpeInitial::Gaussian(t0) = spec.initial {
        let times: Vec<f64> = solution.times.iter().copied().filter(|&t| t > 0.0).collect();
        let options = ClosureOptions {
            model: spec.model,
            ..ClosureOptions::default()
        };
        match evolve_temperature(&params, t0, &times, options) {
            Ok(traj) => {
                let mut closure = Table::new(["t", "T_kin"]);
                for (t, v) in traj.times.iter().zip(&traj.t_kin) {
                    closure.push(vec![*t, *v]);
                }
                staging.write_table("closure.tsv", &closure)?;
                manifest.set_opt("results", "closure_unstable_at", traj.unstable_at);
            }
            Err(e) => manifest.warn(format!("Gaussian closure not available: {e}")),
        }
    }
    Ok(())
}

/// Number of steps the geometric schedule takes to reach `t_final`.
fn schedule_steps(t_final: f64, dt: f64, growth: f64, dt_max: f64) -> usize {
    let (mut t, mut h, mut steps) = (0.0, dt, 0usize);
    while t < t_final * (1.0 - 1e-12) {
        t += h.min(t_final - t);
        h = (h * growth).min(dt_max);
        steps += 1;
    }
    steps
}

fn collapse(config: &ExperimentConfig, staging: &mut Staging, manifest: &mut Manifest) -> Result<(), CliError> {
    let spec = require_ensemble(config)?;
    let seed = require_seed(config)?;
    let collapse = config.collapse.as_ref().ok_or_else(|| CliError::Config {
        key: "collapse".into(),
        message: "missing required field".into(),
    })?;
    let runs: Vec<(ModelParams, EnsemblePlan)> = collapse
        .n_values
        .iter()
        .enumerate()
        .map(|(i, &n)| {
            let p = config.model.params_for(n);
            let mut plan = collapse_plan(spec, collapse, &p, seed);
            if let Some(ic) = &collapse.initial_conditions {
                plan.n_initial_conditions = ic[i];
            }
            (p, plan)
        })
        .collect();
    for (p, plan) in &runs {
        let derived = derive(p)?;
        plan.validate(p)?;
        manifest.model(&format!("runs.n{}", p.n), p, &derived);
        manifest.plan(&format!("runs.n{}.ensemble", p.n), plan);
    }

    let records: Vec<EnsembleRecord> = runs
        .par_iter()
        .map(|(p, plan)| run_ensemble(p, plan))
        .collect::<Result<_, _>>()?;
    for ((p, _), record) in runs.iter().zip(&records) {
        staging.write_table(&format!("collapse_n{}.tsv", p.n), &series_table(record, Some(p.n)))?;
    }

    // shared grid in t/N
    let rows = records.iter().map(|r| r.times.len()).min().unwrap_or(0);
    let mut header = vec!["t_over_n".to_string()];
    for (p, _) in &runs {
        header.push(format!("T_kin_n{}", p.n));
        header.push(format!("T_kin_stderr_n{}", p.n));
    }
    header.push("T_closure".into());
    let mut table = Table::new(header);

    let (p0, _) = &runs[0];
    let times_over_n: Vec<f64> = (1..=rows).map(|i| i as f64 * collapse.output_interval_over_n).collect();
    let closure_times: Vec<f64> = times_over_n.iter().map(|x| x * p0.n as f64).collect();
    let closure = evolve_temperature(p0, spec.t0, &closure_times, ClosureOptions::default())?;
    manifest.set_opt(
        "results",
        "closure_unstable_at_over_n",
        closure.unstable_at.map(|t| t / p0.n as f64),
    );

    let mut worst_z: f64 = 0.0;
    let mut worst_closure: f64 = 0.0;
    for (i, &t_over_n) in times_over_n.iter().enumerate().take(rows) {
        let mut row = vec![t_over_n];
        for record in &records {
            row.push(record.t_kin.mean[i]);
            row.push(record.t_kin.stderr[i]);
        }
        let tc = closure.t_kin.get(i).copied().unwrap_or(f64::NAN);
        row.push(tc);
        for a in 0..records.len() {
            for b in a + 1..records.len() {
                let d = (records[a].t_kin.mean[i] - records[b].t_kin.mean[i]).abs();
                let s = records[a].t_kin.stderr[i].hypot(records[b].t_kin.stderr[i]);
                if s > 0.0 {
                    worst_z = worst_z.max(d / s);
                }
            }
        }
        if tc.is_finite() {
            for record in &records {
                worst_closure = worst_closure.max((tc - record.t_kin.mean[i]).abs() / record.t_kin.mean[i]);
            }
        }
        table.push(row);
    }
    staging.write_table("collapse.tsv", &table)?;
    manifest.set("results", "max_pairwise_z", worst_z);
    manifest.set("results", "max_closure_relative_deviation", worst_closure);
    Ok(())
}

/// Step chosen so the output interval `ω_R t/N` is a whole number of steps.
fn collapse_plan(spec: &EnsembleSpec, collapse: &CollapseSpec, params: &ModelParams, seed: u64) -> EnsemblePlan {
    let n = params.n as f64;
    let interval = collapse.output_interval_over_n * n;
    let dt0 = spec.dt.unwrap_or_else(|| default_dt(params, spec.t0));
    let stride = (interval / dt0).ceil().max(1.0);
    let dt = interval / stride;
    let outputs = (collapse.t_final_over_n / collapse.output_interval_over_n)
        .round()
        .max(1.0);
    let mut plan = EnsemblePlan::new(spec.t0, outputs * interval, dt, seed);
    plan.n_initial_conditions = spec.initial_conditions;
    plan.n_noise_realisations = spec.realisations;
    plan.output_stride = stride as usize;
    plan.snapshot_stride = spec.snapshot_stride;
    plan.snapshot_after = spec.snapshot_after.unwrap_or(f64::INFINITY);
    plan
}
