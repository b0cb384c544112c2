use std::f64::consts::TAU;
use std::fs;
use std::process::Command;

use nvdress::config::{parse_config_str, Experiment, RunConfig};
use nvdress::model::FrequencyConvention;
use nvdress::runner::{self, execute, RunManifest, MANIFEST_FILE, RESULTS_FILE, SUMMARY_FILE};

const BIN: &str = env!("CARGO_BIN_EXE_nvdress");

fn small(experiment: Experiment, preset: &str) -> RunConfig {
    let mut c = RunConfig::minimal(experiment, preset).unwrap();
    c.ensemble.runs = Some(6);
    c.ensemble.seed = Some(11);
    c
}

fn header(csv: &str) -> Vec<String> {
    csv.lines().next().unwrap().split(',').map(String::from).collect()
}

#[test]
fn coherence_vs_time_schema() {
    let mut c = small(Experiment::CoherenceVsTime, "zero-field");
    c.sweep.t = Some(10.0);
    c.sweep.interval = Some(2.5);
    let dir = tempfile::tempdir().unwrap();
    let (manifest, _) = runner::run(&c, dir.path()).unwrap();
    let csv = fs::read_to_string(dir.path().join(RESULTS_FILE)).unwrap();
    assert_eq!(header(&csv), ["t [us]", "abs_L [1]", "stderr [1]"]);
    assert_eq!(csv.lines().count(), 1 + 5);
    assert_eq!(manifest.master_seed, 11);
    assert_eq!(manifest.n_runs, 6);
    assert_eq!(manifest.steps.len(), 1);
    assert!(manifest.steps[0].steps_per_run > 0);
    let on_disk: RunManifest = serde_json::from_str(&fs::read_to_string(dir.path().join(MANIFEST_FILE)).unwrap()).unwrap();
    assert_eq!(on_disk.config, manifest.config);
}

#[test]
fn spectrum_schema_and_summary() {
    let mut c = small(Experiment::Spectrum, "zero-field");
    c.frequency_convention = Some(FrequencyConvention::Ordinary);
    c.sweep.values = Some(vec![-0.02, 0.0, 0.02]);
    let c = c.resolve().unwrap();
    let dir = tempfile::tempdir().unwrap();
    let (_, outcome) = runner::run(&c, dir.path()).unwrap();
    let csv = fs::read_to_string(dir.path().join(RESULTS_FILE)).unwrap();
    assert_eq!(header(&csv), ["omega_s [MHz]", "detuning [MHz]", "delta_P [1]", "stderr [1]"]);
    let summary: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join(SUMMARY_FILE)).unwrap()).unwrap();
    for key in ["center", "depth", "fwhm", "resonance"] {
        assert!(summary.get(key).is_some(), "{key}");
    }
    let s = outcome.summary.unwrap();
    // the resonant point dominates a three-point grid
    assert_eq!(s.center, s.resonance);
    assert!(s.depth > 0.0);
}

#[test]
fn replay_is_byte_identical() {
    let mut c = small(Experiment::CoherenceVsDrive, "bias");
    c.sweep.values = Some(vec![0.0, 7.0]);
    c.sweep.t = Some(5.0);
    let dir = tempfile::tempdir().unwrap();
    runner::run(&c, dir.path()).unwrap();
    let r = runner::replay(&dir.path().join(MANIFEST_FILE), None).unwrap();
    assert_eq!(r.identical, Some(true));
    assert_eq!(
        fs::read(dir.path().join(RESULTS_FILE)).unwrap(),
        fs::read(dir.path().join("replay").join(RESULTS_FILE)).unwrap()
    );
}

#[test]
fn conventions_agree_when_inputs_are_scaled() {
    let ordinary = parse_config_str(
        r#"
experiment = "coherence_vs_drive"
frequency_convention = "ordinary"
[ensemble]
runs = 4
[sweep]
values = [1.0, 1.5]
t = 4.0
"#,
    )
    .unwrap();
    let mut angular = ordinary.clone();
    angular.frequency_convention = Some(FrequencyConvention::Angular);
    let nv = &mut angular.nv;
    nv.delta = nv.delta.map(|d| d * TAU);
    nv.ground_energies = nv.ground_energies.map(|g| g.map(|e| e * TAU));
    angular.drive.omega = angular.drive.omega.map(|w| w * TAU);
    angular.sweep.values = angular.sweep.values.map(|v| v.iter().map(|w| w * TAU).collect());
    let (a, o) = (execute(&angular).unwrap(), execute(&ordinary).unwrap());
    assert_eq!(a.table.columns[1].values, o.table.columns[1].values);
    assert_eq!(a.table.columns[2].values, o.table.columns[2].values);
    assert_eq!(a.table.columns[0].unit, "rad/us");
    assert_eq!(o.table.columns[0].unit, "MHz");
}

#[test]
fn filter_oracle_table() {
    let mut c = RunConfig::minimal(Experiment::FilterOracle, "zero-field").unwrap();
    c.drive.omega = Some(0.0);
    c.sweep.t = Some(2.0);
    c.sweep.interval = Some(1.0);
    let out = execute(&c).unwrap();
    let l = &out.table.column("L_second_order").unwrap().values;
    assert_eq!(out.table.columns[0].values, [1.0, 2.0]);
    // quasi-static: 1 - t^2/T2*^2 with an O(t^3 / (T2*^2 tau)) correction
    assert!((l[0] - (1.0 - 1.0 / 9.0)).abs() < 1.0 / (9.0 * 25.0), "{l:?}");
}

#[test]
fn binary_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    fs::write(
        &cfg,
        "experiment = \"coherence_vs_time\"\n[sweep]\nt = 2.0\ninterval = 1.0\n",
    )
    .unwrap();
    let out = dir.path().join("out");
    let status = Command::new(BIN)
        .args(["run", cfg.to_str().unwrap(), "--runs", "3", "--seed", "5", "--threads", "1", "--out"])
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());
    let manifest: RunManifest = serde_json::from_str(&fs::read_to_string(out.join(MANIFEST_FILE)).unwrap()).unwrap();
    assert_eq!((manifest.n_runs, manifest.master_seed), (3, 5));
    let status = Command::new(BIN).arg("replay").arg(out.join(MANIFEST_FILE)).status().unwrap();
    assert!(status.success());

    let validate = Command::new(BIN).arg("validate").arg(&cfg).output().unwrap();
    assert!(validate.status.success());
    let resolved = String::from_utf8(validate.stdout).unwrap();
    assert!(parse_config_str(&resolved).is_ok());

    let list = Command::new(BIN).arg("list-experiments").output().unwrap();
    let names = String::from_utf8(list.stdout).unwrap();
    for e in Experiment::ALL {
        assert!(names.contains(e.name()));
    }
}

#[test]
fn bad_config_exits_nonzero() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    fs::write(&cfg, "experiment = \"spectrum\"\n[nv]\ngamma_ge = -1.0\n").unwrap();
    let out = Command::new(BIN).arg("validate").arg(&cfg).output().unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("nv.gamma_ge"));
    let out = Command::new(BIN).args(["run", "does-not-exist.toml"]).output().unwrap();
    assert!(!out.status.success());
}
