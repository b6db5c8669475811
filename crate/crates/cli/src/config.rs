//! Experiment configuration: one TOML file plus `--set` overrides.

use serde::Deserialize;
use std::path::{Path, PathBuf};

use cavkin::fpe::DispersionModel;
use cavkin::ModelParams;

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Simulate,
    Sweep,
    Kinetic,
    Fpe,
    Collapse,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::Simulate => "simulate",
            Mode::Sweep => "sweep",
            Mode::Kinetic => "kinetic",
            Mode::Fpe => "fpe",
            Mode::Collapse => "collapse",
        }
    }

    fn is_stochastic(self) -> bool {
        matches!(self, Mode::Simulate | Mode::Sweep | Mode::Collapse)
    }
}

/// File layout, before validation. Every field is optional so that missing
/// values can be reported by their dotted key.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    mode: Option<Mode>,
    seed: Option<i64>,
    output_dir: Option<PathBuf>,
    model: Option<RawModel>,
    ensemble: Option<RawEnsemble>,
    sweep: Option<RawSweep>,
    kinetic: Option<RawKinetic>,
    fpe: Option<RawFpe>,
    collapse: Option<RawCollapse>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawModel {
    n: Option<i64>,
    kappa: Option<f64>,
    u0: Option<f64>,
    n_u0: Option<f64>,
    delta_c: Option<f64>,
    delta: Option<f64>,
    eta: Option<f64>,
    sqrt_n_eta: Option<f64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawEnsemble {
    initial_conditions: Option<i64>,
    realisations: Option<i64>,
    t0: Option<f64>,
    t_final: Option<f64>,
    dt: Option<f64>,
    output_stride: Option<i64>,
    snapshot_stride: Option<i64>,
    snapshot_after: Option<f64>,
    fit_q: Option<bool>,
    trajectories: Option<bool>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSweep {
    parameter: Option<String>,
    values: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawKinetic {
    t0: Option<f64>,
    closure_t_final: Option<f64>,
    closure_points: Option<i64>,
    model: Option<String>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawFpe {
    initial: Option<String>,
    t0: Option<f64>,
    t_final: Option<f64>,
    dt: Option<f64>,
    dt_growth: Option<f64>,
    dt_max: Option<f64>,
    cells: Option<i64>,
    v_max: Option<f64>,
    model: Option<String>,
    theta: Option<f64>,
    snapshots: Option<i64>,
    steady_tolerance: Option<f64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawCollapse {
    n_values: Option<Vec<i64>>,
    initial_conditions: Option<Vec<i64>>,
    t_final_over_n: Option<f64>,
    output_interval_over_n: Option<f64>,
}

/// Model parameters as written: collective forms (`n_u0`, `delta`,
/// `sqrt_n_eta`) stay fixed when `N` changes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelSpec {
    pub n: usize,
    pub kappa: f64,
    pub light_shift: Coupling,
    pub detuning: Detuning,
    pub pump: Coupling,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Coupling {
    PerParticle(f64),
    Collective(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Detuning {
    Bare(f64),
    Effective(f64),
}

impl ModelSpec {
    pub fn params(&self) -> ModelParams {
        self.params_for(self.n)
    }

    /// Parameters at particle number `n`.
    pub fn params_for(&self, n: usize) -> ModelParams {
        let nf = n as f64;
        let u0 = match self.light_shift {
            Coupling::PerParticle(u) => u,
            Coupling::Collective(nu) => nu / nf,
        };
        let delta_c = match self.detuning {
            Detuning::Bare(d) => d,
            Detuning::Effective(d) => d + nf * u0 / 2.0,
        };
        let eta = match self.pump {
            Coupling::PerParticle(e) => e,
            Coupling::Collective(se) => se / nf.sqrt(),
        };
        ModelParams::new(n, u0, self.kappa, delta_c, eta)
    }

    /// Replaces the pump with a collective `√N η`.
    pub fn with_sqrt_n_eta(mut self, value: f64) -> Self {
        self.pump = Coupling::Collective(value);
        self
    }

    pub fn with_eta(mut self, value: f64) -> Self {
        self.pump = Coupling::PerParticle(value);
        self
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleSpec {
    pub initial_conditions: usize,
    pub realisations: usize,
    pub t0: f64,
    /// Unused by collapse runs, which scale the duration with `N`.
    pub t_final: Option<f64>,
    pub dt: Option<f64>,
    pub output_stride: Option<usize>,
    pub snapshot_stride: Option<usize>,
    pub snapshot_after: Option<f64>,
    pub fit_q: bool,
    /// Also write one table row per trajectory and output time.
    pub trajectories: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepAxis {
    SqrtNEta,
    Eta,
}

impl SweepAxis {
    pub fn name(self) -> &'static str {
        match self {
            SweepAxis::SqrtNEta => "sqrt_n_eta",
            SweepAxis::Eta => "eta",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub axis: SweepAxis,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct KineticSpec {
    pub t0: Option<f64>,
    pub closure_t_final: Option<f64>,
    pub closure_points: usize,
    pub model: DispersionModel,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FpeInitial {
    Gaussian(f64),
    Equilibrium,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FpeSpec {
    pub initial: FpeInitial,
    pub t_final: f64,
    pub dt: f64,
    pub dt_growth: f64,
    pub dt_max: f64,
    pub cells: usize,
    pub v_max: Option<f64>,
    pub model: DispersionModel,
    pub theta: f64,
    pub snapshots: usize,
    pub steady_tolerance: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CollapseSpec {
    pub n_values: Vec<usize>,
    /// Per-`N` initial conditions, replacing `ensemble.initial_conditions`.
    pub initial_conditions: Option<Vec<usize>>,
    pub t_final_over_n: f64,
    pub output_interval_over_n: f64,
}

/// A validated experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub mode: Mode,
    pub seed: Option<u64>,
    pub output_dir: Option<PathBuf>,
    pub model: ModelSpec,
    pub ensemble: Option<EnsembleSpec>,
    pub sweep: Option<SweepSpec>,
    pub kinetic: KineticSpec,
    pub fpe: Option<FpeSpec>,
    pub collapse: Option<CollapseSpec>,
}

impl ExperimentConfig {
    /// Reads `path`, applies `overrides` (`dotted.key=value`) and validates
    /// for `mode`. A `mode` key in the file must agree with the subcommand.
    pub fn load(path: &Path, mode: Mode, overrides: &[String]) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::parse(&text, mode, overrides)
    }

    pub fn parse(text: &str, mode: Mode, overrides: &[String]) -> Result<Self, CliError> {
        let mut table: toml::Table = text.parse().map_err(|e: toml::de::Error| CliError::Config {
            key: "file".into(),
            message: e.message().to_string(),
        })?;
        for item in overrides {
            apply_override(&mut table, item)?;
        }
        let raw = RawConfig::deserialize(toml::Value::Table(table)).map_err(|e| CliError::Config {
            key: "file".into(),
            message: e.message().to_string(),
        })?;
        resolve(raw, mode)
    }
}

/// `a.b.c=value`; the value is read as TOML and falls back to a bare string.
fn apply_override(table: &mut toml::Table, item: &str) -> Result<(), CliError> {
    let (key, value) = item
        .split_once('=')
        .ok_or_else(|| CliError::Usage(format!("--set expects KEY=VALUE, got `{item}`")))?;
    let key = key.trim();
    let parts: Vec<&str> = key.split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(CliError::Usage(format!("--set has an empty key segment in `{key}`")));
    }
    let value = parse_value(value.trim());
    let (last, parents) = parts.split_last().expect("split yields at least one part");
    let mut node = table;
    for part in parents {
        let entry = node
            .entry(part.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        node = entry.as_table_mut().ok_or_else(|| CliError::Config {
            key: key.to_string(),
            message: format!("`{part}` is not a section"),
        })?;
    }
    node.insert(last.to_string(), value);
    Ok(())
}

fn parse_value(text: &str) -> toml::Value {
    format!("v = {text}")
        .parse::<toml::Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(text.to_string()))
}

fn missing(key: &str) -> CliError {
    CliError::Config {
        key: key.into(),
        message: "missing required field".into(),
    }
}

fn bad(key: &str, message: impl Into<String>) -> CliError {
    CliError::Config {
        key: key.into(),
        message: message.into(),
    }
}

fn finite(key: &str, v: f64) -> Result<f64, CliError> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(bad(key, "must be finite"))
    }
}

fn positive(key: &str, v: f64) -> Result<f64, CliError> {
    if v.is_finite() && v > 0.0 {
        Ok(v)
    } else {
        Err(bad(key, "must be positive and finite"))
    }
}

fn count(key: &str, v: i64) -> Result<usize, CliError> {
    usize::try_from(v)
        .ok()
        .filter(|&c| c > 0)
        .ok_or_else(|| bad(key, "must be a positive integer"))
}

fn exclusive(key_a: &str, a: Option<f64>, key_b: &str, b: Option<f64>) -> Result<Option<(bool, f64)>, CliError> {
    match (a, b) {
        (Some(_), Some(_)) => Err(bad(key_b, format!("conflicts with {key_a}; give only one"))),
        (Some(x), None) => Ok(Some((true, finite(key_a, x)?))),
        (None, Some(x)) => Ok(Some((false, finite(key_b, x)?))),
        (None, None) => Ok(None),
    }
}

fn dispersion_model(key: &str, name: Option<String>) -> Result<DispersionModel, CliError> {
    match name.as_deref() {
        None | Some("full") => Ok(DispersionModel::Full),
        Some("far_below") => Ok(DispersionModel::FarBelowThreshold),
        Some(other) => Err(bad(
            key,
            format!("unknown model `{other}` (expected full or far_below)"),
        )),
    }
}

fn resolve(raw: RawConfig, mode: Mode) -> Result<ExperimentConfig, CliError> {
    if let Some(m) = raw.mode {
        if m != mode {
            return Err(bad(
                "mode",
                format!("file is for `{}` but the subcommand is `{}`", m.name(), mode.name()),
            ));
        }
    }
    let seed = raw
        .seed
        .map(|s| u64::try_from(s).map_err(|_| bad("seed", "must be a non-negative integer")))
        .transpose()?;
    let model = resolve_model(raw.model.ok_or_else(|| missing("model"))?, mode)?;

    let needs_ensemble = mode.is_stochastic();
    let ensemble = match raw.ensemble {
        Some(e) => Some(resolve_ensemble(e, mode)?),
        None if needs_ensemble => return Err(missing("ensemble")),
        None => None,
    };

    let sweep = match (mode, raw.sweep) {
        (Mode::Sweep, None) => return Err(missing("sweep")),
        (_, Some(s)) => Some(resolve_sweep(s)?),
        (_, None) => None,
    };

    let raw_kinetic = raw.kinetic.unwrap_or_default();
    let kinetic = KineticSpec {
        t0: raw_kinetic.t0.map(|t| positive("kinetic.t0", t)).transpose()?,
        closure_t_final: raw_kinetic
            .closure_t_final
            .map(|t| positive("kinetic.closure_t_final", t))
            .transpose()?,
        closure_points: raw_kinetic
            .closure_points
            .map(|c| count("kinetic.closure_points", c))
            .transpose()?
            .unwrap_or(200),
        model: dispersion_model("kinetic.model", raw_kinetic.model)?,
    };

    let fpe = match (mode, raw.fpe) {
        (Mode::Fpe, None) => return Err(missing("fpe")),
        (_, Some(f)) => Some(resolve_fpe(f)?),
        (_, None) => None,
    };

    let collapse = match (mode, raw.collapse) {
        (Mode::Collapse, None) => return Err(missing("collapse")),
        (_, Some(c)) => Some(resolve_collapse(c)?),
        (_, None) => None,
    };

    if mode.is_stochastic() && seed.is_none() {
        return Err(missing("seed"));
    }
    Ok(ExperimentConfig {
        mode,
        seed,
        output_dir: raw.output_dir,
        model,
        ensemble,
        sweep,
        kinetic,
        fpe,
        collapse,
    })
}

fn resolve_model(raw: RawModel, mode: Mode) -> Result<ModelSpec, CliError> {
    let n = match (raw.n, mode) {
        (Some(n), _) => count("model.n", n)?,
        // collapse sets N itself
        (None, Mode::Collapse) => 1,
        (None, _) => return Err(missing("model.n")),
    };
    let kappa = positive("model.kappa", raw.kappa.ok_or_else(|| missing("model.kappa"))?)?;
    let light_shift = match exclusive("model.u0", raw.u0, "model.n_u0", raw.n_u0)? {
        Some((true, v)) => Coupling::PerParticle(v),
        Some((false, v)) => Coupling::Collective(v),
        None => return Err(missing("model.u0")),
    };
    let detuning = match exclusive("model.delta_c", raw.delta_c, "model.delta", raw.delta)? {
        Some((true, v)) => Detuning::Bare(v),
        Some((false, v)) => Detuning::Effective(v),
        None => return Err(missing("model.delta")),
    };
    let pump = match exclusive("model.eta", raw.eta, "model.sqrt_n_eta", raw.sqrt_n_eta)? {
        Some((true, v)) => Coupling::PerParticle(v),
        Some((false, v)) => Coupling::Collective(v),
        None => return Err(missing("model.sqrt_n_eta")),
    };
    if mode == Mode::Collapse && !matches!(pump, Coupling::Collective(_)) {
        return Err(bad("model.sqrt_n_eta", "collapse runs hold the collective pump fixed"));
    }
    Ok(ModelSpec {
        n,
        kappa,
        light_shift,
        detuning,
        pump,
    })
}

fn resolve_ensemble(raw: RawEnsemble, mode: Mode) -> Result<EnsembleSpec, CliError> {
    let t_final = match (raw.t_final, mode) {
        (Some(t), _) => Some(positive("ensemble.t_final", t)?),
        (None, Mode::Simulate | Mode::Sweep) => return Err(missing("ensemble.t_final")),
        (None, _) => None,
    };
    let opt_count = |key: &str, v: Option<i64>| v.map(|c| count(key, c)).transpose();
    let spec = EnsembleSpec {
        initial_conditions: opt_count("ensemble.initial_conditions", raw.initial_conditions)?.unwrap_or(1),
        realisations: opt_count("ensemble.realisations", raw.realisations)?.unwrap_or(1),
        t0: positive("ensemble.t0", raw.t0.ok_or_else(|| missing("ensemble.t0"))?)?,
        t_final,
        dt: raw.dt.map(|d| positive("ensemble.dt", d)).transpose()?,
        output_stride: opt_count("ensemble.output_stride", raw.output_stride)?,
        snapshot_stride: opt_count("ensemble.snapshot_stride", raw.snapshot_stride)?,
        snapshot_after: raw
            .snapshot_after
            .map(|t| finite("ensemble.snapshot_after", t))
            .transpose()?,
        fit_q: raw.fit_q.unwrap_or(false),
        trajectories: raw.trajectories.unwrap_or(false),
    };
    if spec.fit_q && spec.snapshot_stride.is_none() {
        return Err(bad("ensemble.snapshot_stride", "fit_q needs velocity snapshots"));
    }
    Ok(spec)
}

fn resolve_sweep(raw: RawSweep) -> Result<SweepSpec, CliError> {
    let axis = match raw.parameter.as_deref() {
        None | Some("sqrt_n_eta") => SweepAxis::SqrtNEta,
        Some("eta") => SweepAxis::Eta,
        Some(other) => {
            return Err(bad(
                "sweep.parameter",
                format!("cannot sweep `{other}` (expected sqrt_n_eta or eta)"),
            ))
        }
    };
    let values = raw.values.ok_or_else(|| missing("sweep.values"))?;
    if values.is_empty() {
        return Err(bad("sweep.values", "needs at least one value"));
    }
    for &v in &values {
        if !(v.is_finite() && v >= 0.0) {
            return Err(bad("sweep.values", "pump values must be finite and non-negative"));
        }
    }
    Ok(SweepSpec { axis, values })
}

fn resolve_fpe(raw: RawFpe) -> Result<FpeSpec, CliError> {
    let initial = match raw.initial.as_deref() {
        None | Some("gaussian") => FpeInitial::Gaussian(positive("fpe.t0", raw.t0.ok_or_else(|| missing("fpe.t0"))?)?),
        Some("equilibrium") => FpeInitial::Equilibrium,
        Some(other) => {
            return Err(bad(
                "fpe.initial",
                format!("unknown initial state `{other}` (expected gaussian or equilibrium)"),
            ))
        }
    };
    let dt = positive("fpe.dt", raw.dt.ok_or_else(|| missing("fpe.dt"))?)?;
    let dt_growth = raw
        .dt_growth
        .map(|g| positive("fpe.dt_growth", g))
        .transpose()?
        .unwrap_or(1.0);
    if dt_growth < 1.0 {
        return Err(bad("fpe.dt_growth", "must be at least 1"));
    }
    let dt_max = raw.dt_max.map(|d| positive("fpe.dt_max", d)).transpose()?.unwrap_or(dt);
    if dt_max < dt {
        return Err(bad("fpe.dt_max", "must be at least fpe.dt"));
    }
    let cells = raw.cells.map(|c| count("fpe.cells", c)).transpose()?.unwrap_or(800);
    if cells < 8 || cells % 2 != 0 {
        return Err(bad("fpe.cells", "must be an even number of at least 8"));
    }
    let theta = raw.theta.unwrap_or(1.0);
    if !(0.5..=1.0).contains(&theta) {
        return Err(bad("fpe.theta", "must lie in [0.5, 1]"));
    }
    Ok(FpeSpec {
        initial,
        t_final: positive("fpe.t_final", raw.t_final.ok_or_else(|| missing("fpe.t_final"))?)?,
        dt,
        dt_growth,
        dt_max,
        cells,
        v_max: raw.v_max.map(|v| positive("fpe.v_max", v)).transpose()?,
        model: dispersion_model("fpe.model", raw.model)?,
        theta,
        snapshots: raw
            .snapshots
            .map(|s| count("fpe.snapshots", s))
            .transpose()?
            .unwrap_or(50),
        steady_tolerance: raw
            .steady_tolerance
            .map(|s| positive("fpe.steady_tolerance", s))
            .transpose()?,
    })
}

fn resolve_collapse(raw: RawCollapse) -> Result<CollapseSpec, CliError> {
    let n_values = raw
        .n_values
        .ok_or_else(|| missing("collapse.n_values"))?
        .into_iter()
        .map(|n| count("collapse.n_values", n))
        .collect::<Result<Vec<_>, _>>()?;
    if n_values.is_empty() {
        return Err(bad("collapse.n_values", "needs at least one particle number"));
    }
    let initial_conditions = raw
        .initial_conditions
        .map(|v| {
            v.into_iter()
                .map(|c| count("collapse.initial_conditions", c))
                .collect::<Result<Vec<_>, _>>()
        })
        .transpose()?;
    if initial_conditions.as_ref().is_some_and(|ic| ic.len() != n_values.len()) {
        return Err(bad(
            "collapse.initial_conditions",
            "needs one entry per particle number",
        ));
    }
    Ok(CollapseSpec {
        n_values,
        initial_conditions,
        t_final_over_n: positive(
            "collapse.t_final_over_n",
            raw.t_final_over_n.ok_or_else(|| missing("collapse.t_final_over_n"))?,
        )?,
        output_interval_over_n: positive(
            "collapse.output_interval_over_n",
            raw.output_interval_over_n
                .ok_or_else(|| missing("collapse.output_interval_over_n"))?,
        )?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const FIG6: &str = r#"
seed = 7
[model]
n = 250
n_u0 = -1.0
kappa = 100.0
delta = -100.0
sqrt_n_eta = 200.0
[ensemble]
t0 = 300.0
t_final = 1.0
"#;

    fn key_of(e: CliError) -> String {
        match e {
            CliError::Config { key, .. } => key,
            other => panic!("expected a config error, got {other:?}"),
        }
    }

    #[test]
    fn collective_parameters_resolve() {
        let c = ExperimentConfig::parse(FIG6, Mode::Simulate, &[]).unwrap();
        let p = c.model.params();
        assert_eq!(p.n, 250);
        assert!((p.delta() + 100.0).abs() < 1e-12);
        assert!((p.sqrt_n_eta() - 200.0).abs() < 1e-12);
        assert!((p.u0 * 250.0 + 1.0).abs() < 1e-12);
    }

    #[test]
    fn collective_parameters_follow_n() {
        let c = ExperimentConfig::parse(FIG6, Mode::Simulate, &[]).unwrap();
        let p = c.model.params_for(1000);
        assert!((p.delta() + 100.0).abs() < 1e-12);
        assert!((p.sqrt_n_eta() - 200.0).abs() < 1e-12);
    }

    #[test]
    fn missing_kappa_is_named() {
        let text = FIG6.replace("kappa = 100.0\n", "");
        let e = ExperimentConfig::parse(&text, Mode::Simulate, &[]).unwrap_err();
        assert_eq!(key_of(e), "model.kappa");
    }

    #[test]
    fn overrides_replace_and_insert() {
        let c = ExperimentConfig::parse(
            FIG6,
            Mode::Simulate,
            &["model.kappa=50".into(), "ensemble.dt=1e-3".into(), "seed=9".into()],
        )
        .unwrap();
        assert_eq!(c.model.kappa, 50.0);
        assert_eq!(c.ensemble.unwrap().dt, Some(1e-3));
        assert_eq!(c.seed, Some(9));
    }

    #[test]
    fn conflicting_forms_are_rejected() {
        let e = ExperimentConfig::parse(FIG6, Mode::Simulate, &["model.eta=3".into()]).unwrap_err();
        assert_eq!(key_of(e), "model.sqrt_n_eta");
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let e = ExperimentConfig::parse(FIG6, Mode::Simulate, &["model.kapa=3".into()]).unwrap_err();
        assert_eq!(key_of(e), "file");
    }

    #[test]
    fn stochastic_modes_need_a_seed() {
        let text = FIG6.replace("seed = 7\n", "");
        let e = ExperimentConfig::parse(&text, Mode::Simulate, &[]).unwrap_err();
        assert_eq!(key_of(e), "seed");
        assert!(ExperimentConfig::parse(&text, Mode::Kinetic, &[]).is_ok());
    }

    #[test]
    fn non_finite_values_are_rejected() {
        let e = ExperimentConfig::parse(FIG6, Mode::Simulate, &["model.delta=nan".into()]).unwrap_err();
        assert_eq!(key_of(e), "model.delta");
    }

    #[test]
    fn mode_must_match_subcommand() {
        let text = format!("mode = \"sweep\"\n{FIG6}");
        let e = ExperimentConfig::parse(&text, Mode::Simulate, &[]).unwrap_err();
        assert_eq!(key_of(e), "mode");
    }
}
