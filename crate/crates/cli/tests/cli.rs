use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn cavkin(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cavkin"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn bundled(name: &str) -> String {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("configs")
        .join(name)
        .display()
        .to_string()
}

fn write_config(dir: &Path, text: &str) -> String {
    let path = dir.join("run.toml");
    fs::write(&path, text).unwrap();
    path.display().to_string()
}

const TINY: &str = r#"
mode = "simulate"
seed = 11

[model]
n = 20
n_u0 = -1.0
kappa = 100.0
delta = -100.0
sqrt_n_eta = 150.0

[ensemble]
initial_conditions = 2
realisations = 2
t0 = 100.0
t_final = 0.01
dt = 0.001
output_stride = 1
"#;

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn manifest(dir: &Path) -> toml::Table {
    fs::read_to_string(dir.join("manifest.toml")).unwrap().parse().unwrap()
}

#[test]
fn missing_kappa_names_the_key() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), &TINY.replace("kappa = 100.0\n", ""));
    let out = dir.path().join("out");
    let o = cavkin(&["simulate", "--config", &config, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let err = stderr(&o);
    assert_eq!(err.lines().count(), 1, "{err}");
    assert!(err.starts_with("error kind=config key=model.kappa "), "{err}");
    assert!(!out.exists());
}

#[test]
fn ten_steps_give_ten_rows_and_reruns_match() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), TINY);
    let run = |name: &str| -> PathBuf {
        let out = dir.path().join(name);
        let o = cavkin(&["simulate", "--config", &config, "--out", out.to_str().unwrap()]);
        assert!(o.status.success(), "{}", stderr(&o));
        out
    };
    let (a, b) = (run("a"), run("b"));
    let table = fs::read_to_string(a.join("timeseries.tsv")).unwrap();
    let mut lines = table.lines();
    let header: Vec<_> = lines.next().unwrap().split('\t').collect();
    assert_eq!(
        &header[..8],
        [
            "t",
            "T_kin",
            "T_kin_stderr",
            "theta",
            "theta_stderr",
            "n_photon",
            "re_alpha",
            "im_alpha"
        ]
    );
    assert_eq!(lines.count(), 10);
    for file in ["timeseries.tsv", "manifest.toml"] {
        assert_eq!(
            fs::read(a.join(file)).unwrap(),
            fs::read(b.join(file)).unwrap(),
            "{file}"
        );
    }
    let m = manifest(&a);
    assert_eq!(m["seed"].as_integer(), Some(11));
    assert_eq!(m["params"]["kappa"].as_float(), Some(100.0));
    assert!(m["version"].as_str().is_some());
}

#[test]
fn seed_flag_overrides_the_file() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), TINY);
    let run = |name: &str, seed: &str| {
        let out = dir.path().join(name);
        let o = cavkin(&[
            "simulate",
            "--config",
            &config,
            "--out",
            out.to_str().unwrap(),
            "--seed",
            seed,
        ]);
        assert!(o.status.success(), "{}", stderr(&o));
        fs::read(out.join("timeseries.tsv")).unwrap()
    };
    assert_ne!(run("a", "1"), run("b", "2"));
    assert_eq!(run("c", "1"), run("d", "1"));
}

#[test]
fn organised_phase_prediction() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("k");
    let config = bundled("fig6_prediction.toml");
    let o = cavkin(&["kinetic", "--config", &config, "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let ratio = manifest(&out)["results"]["t_kin_over_kappa"].as_float().unwrap();
    assert!((ratio - 0.5746).abs() < 1e-3, "{ratio}");
    let table = fs::read_to_string(out.join("prediction.tsv")).unwrap();
    let header = table.lines().next().unwrap();
    for column in ["eta_c", "T_eq", "omega0", "theta", "T_kin", "tau_opt"] {
        assert!(header.split('\t').any(|h| h == column), "{column}");
    }
}

#[test]
fn unstable_step_fails_cleanly() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), &TINY.replace("dt = 0.001", "dt = 0.01"));
    let out = dir.path().join("out");
    let o = cavkin(&["simulate", "--config", &config, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let err = stderr(&o);
    assert!(err.starts_with("error kind=invalid-parameter"), "{err}");
    assert_eq!(err.lines().count(), 1);
    assert!(!out.exists());
}

#[test]
fn existing_output_directory_is_left_as_it_was() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), &TINY.replace("dt = 0.001", "dt = 0.01"));
    let out = dir.path().join("out");
    fs::create_dir(&out).unwrap();
    fs::write(out.join("keep.txt"), "x").unwrap();
    let o = cavkin(&["simulate", "--config", &config, "--out", out.to_str().unwrap()]);
    assert!(!o.status.success());
    let left: Vec<_> = fs::read_dir(&out).unwrap().map(|e| e.unwrap().file_name()).collect();
    assert_eq!(left, ["keep.txt"]);
}

#[test]
fn set_overrides_and_mode_checks() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), TINY);
    let out = dir.path().join("o");
    let o = cavkin(&[
        "simulate",
        "--config",
        &config,
        "--out",
        out.to_str().unwrap(),
        "--set",
        "model.n=7",
        "--set",
        "ensemble.t_final=0.005",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(manifest(&out)["params"]["n"].as_integer(), Some(7));
    let rows = fs::read_to_string(out.join("timeseries.tsv")).unwrap().lines().count();
    assert_eq!(rows, 6);

    let o = cavkin(&[
        "sweep",
        "--config",
        &config,
        "--out",
        dir.path().join("s").to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("key=mode"), "{}", stderr(&o));
}

#[test]
fn usage_errors() {
    let o = cavkin(&["simulate"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).starts_with("error kind=usage"));
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), TINY);
    let o = cavkin(&["simulate", "--config", &config, "--workers", "0"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).starts_with("error kind=usage"));
    assert!(cavkin(&["--help"]).status.success());
}

#[test]
fn unreadable_config_is_an_io_error() {
    let o = cavkin(&["fpe", "--config", "/nonexistent/run.toml"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).starts_with("error kind=io"), "{}", stderr(&o));
}
