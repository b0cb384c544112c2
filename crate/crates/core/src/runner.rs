//! Executes a [`RunConfig`] and writes its artifacts:
//!
//! * `results.csv`: one header row of `name [unit]` cells, then one row per
//!   point, floats in shortest round-trip form (`{:?}`);
//! * `manifest.json`: resolved config, seeds, RNG description, version,
//!   wall clock and step counts;
//! * `summary.json` for spectra and `spot_checks.csv` when spot checks ran;
//! * `plot/<column>.dat` two-column files when `output.plot_series` is set.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::config::{Experiment, RunConfig};
use crate::ensemble::{integrator_for, Scenario};
use crate::error::{Error, Result};
use crate::experiments::{self, Series, Setup, SpotCheck};
use crate::filter::{second_order_l, FilterParams};
use crate::model::FrequencyConvention;
use crate::noise::{calibrate_dephasing, RNG_DESCRIPTION};

pub const RESULTS_FILE: &str = "results.csv";
pub const MANIFEST_FILE: &str = "manifest.json";
pub const SUMMARY_FILE: &str = "summary.json";
pub const SPOT_CHECK_FILE: &str = "spot_checks.csv";

/// Environment variable naming the default output root.
pub const OUT_ENV: &str = "NVDRESS_OUT";

#[derive(Debug, Clone, PartialEq)]
pub struct Column {
    pub name: String,
    pub unit: String,
    pub values: Vec<f64>,
}

impl Column {
    fn new(name: &str, unit: &str, values: Vec<f64>) -> Self {
        Self {
            name: name.into(),
            unit: unit.into(),
            values,
        }
    }

    pub fn header(&self) -> String {
        format!("{} [{}]", self.name, self.unit)
    }
}

/// Columns of equal length; the first is the abscissa.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub columns: Vec<Column>,
}

impl Table {
    pub fn rows(&self) -> usize {
        self.columns.first().map_or(0, |c| c.values.len())
    }

    pub fn column(&self, name: &str) -> Option<&Column> {
        self.columns.iter().find(|c| c.name == name)
    }

    pub fn to_csv(&self) -> String {
        let mut out = self.columns.iter().map(Column::header).collect::<Vec<_>>().join(",");
        out.push('\n');
        for i in 0..self.rows() {
            for (j, c) in self.columns.iter().enumerate() {
                if j > 0 {
                    out.push(',');
                }
                write!(out, "{:?}", c.values[i]).unwrap();
            }
            out.push('\n');
        }
        out
    }

    /// `x y` lines for column `j` against the first column.
    pub fn plot_series(&self, j: usize) -> String {
        let (x, y) = (&self.columns[0], &self.columns[j]);
        let mut out = format!("# {} {}\n", x.header(), y.header());
        for (a, b) in x.values.iter().zip(&y.values) {
            writeln!(out, "{a:?} {b:?}").unwrap();
        }
        out
    }
}

/// Headline numbers of a spectrum, in config units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectrumSummary {
    pub resonance: f64,
    pub center: f64,
    pub depth: f64,
    pub fwhm: Option<f64>,
}

impl std::fmt::Display for SpectrumSummary {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "center={} depth={} fwhm=", self.center, self.depth)?;
        match self.fwhm {
            Some(w) => write!(f, "{w}"),
            None => f.write_str("none"),
        }
    }
}

/// Integration grid of one sweep point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepCount {
    pub x: Option<f64>,
    pub dt: f64,
    pub steps_per_run: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub table: Table,
    pub summary: Option<SpectrumSummary>,
    pub spot_checks: Vec<SpotCheck>,
    pub steps: Vec<StepCount>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub version: String,
    pub config: RunConfig,
    pub master_seed: u64,
    pub n_runs: usize,
    pub seed_rule: String,
    pub wall_clock_seconds: f64,
    pub steps: Vec<StepCount>,
    pub results: String,
}

fn frequency_unit(conv: FrequencyConvention) -> &'static str {
    match conv {
        FrequencyConvention::Angular => "rad/us",
        FrequencyConvention::Ordinary => "MHz",
    }
}

fn steps_for(x: Option<f64>, scenario: &Scenario) -> Result<StepCount> {
    let (_, cfg) = integrator_for(scenario)?;
    Ok(StepCount {
        x,
        dt: cfg.dt,
        steps_per_run: (scenario.t_end / cfg.dt).round() as usize,
    })
}

fn series_table(series: &Series, x: Column, y: &str) -> Table {
    Table {
        columns: vec![
            x,
            Column::new(y, "1", series.y.clone()),
            Column::new("stderr", "1", series.stderr.clone()),
        ],
    }
}

/// Runs the experiment without touching the file system.
pub fn execute(config: &RunConfig) -> Result<Outcome> {
    let config = config.clone().resolve()?;
    let conv = config.convention();
    let fu = frequency_unit(conv);
    let setup: Setup = config.setup()?;
    let (omega, eta0) = (config.omega(), config.eta0());
    let t = config.sweep.t.unwrap();
    let values = config.sweep.values.clone().unwrap_or_default();
    let to_conv = |v: &[f64]| v.iter().map(|&x| conv.from_internal(x)).collect::<Vec<_>>();
    let to_int = |v: &[f64]| v.iter().map(|&x| conv.to_internal(x)).collect::<Vec<_>>();

    let mut summary = None;
    let (table, spot_checks, steps) = match config.experiment {
        Experiment::CoherenceVsDrive => {
            let omegas = to_int(&values);
            let s = experiments::coherence_vs_drive(&setup, &omegas, t)?;
            let steps = omegas
                .iter()
                .zip(&values)
                .map(|(&om, &x)| steps_for(Some(x), &setup.scenario(om, t, t)?))
                .collect::<Result<_>>()?;
            let mut checks = s.spot_checks.clone();
            checks.iter_mut().for_each(|c| c.x = conv.from_internal(c.x));
            (series_table(&s, Column::new("omega", fu, values), "abs_L"), checks, steps)
        }
        Experiment::CoherenceVsTime => {
            let interval = config.sweep.interval.unwrap();
            let s = experiments::coherence_vs_time(&setup, omega, t, interval)?;
            let steps = vec![steps_for(None, &setup.scenario(omega, t, interval)?)?];
            let mut checks = s.spot_checks.clone();
            checks.iter_mut().for_each(|c| c.x = t);
            (series_table(&s, Column::new("t", "us", s.x.clone()), "abs_L"), checks, steps)
        }
        Experiment::DriveFluctuations => {
            let s = experiments::drive_fluctuations(&setup, omega, &values, t)?;
            let steps = values
                .iter()
                .map(|&d| {
                    let mut local = setup.clone();
                    if let Some(n) = &mut local.drive_noise {
                        n.delta_rel = d;
                    }
                    steps_for(Some(d), &local.scenario(omega, t, t)?)
                })
                .collect::<Result<_>>()?;
            (
                series_table(&s, Column::new("delta_omega", "1", values), "abs_L"),
                s.spot_checks.clone(),
                steps,
            )
        }
        Experiment::Spectrum => {
            let resonance = setup.resonance(omega)?;
            let grid = config
                .sweep
                .values
                .as_ref()
                .map(|v| v.iter().map(|&d| resonance + conv.to_internal(d)).collect());
            let width = conv.to_internal(config.signal.expected_width.unwrap());
            let r = experiments::spectrum(&setup, omega, eta0, t, width, grid)?;
            let steps = r
                .omega_s
                .iter()
                .map(|&ws| steps_for(Some(conv.from_internal(ws)), &setup.signal_scenario(omega, eta0, ws, t, t)?))
                .collect::<Result<_>>()?;
            summary = Some(SpectrumSummary {
                resonance: conv.from_internal(r.resonance),
                center: conv.from_internal(r.center),
                depth: r.depth,
                fwhm: r.fwhm.map(|w| conv.from_internal(w)),
            });
            let mut checks = r.spot_checks.clone();
            checks.iter_mut().for_each(|c| c.x = conv.from_internal(c.x));
            let table = Table {
                columns: vec![
                    Column::new("omega_s", fu, to_conv(&r.omega_s)),
                    Column::new("detuning", fu, to_conv(&r.detuning)),
                    Column::new("delta_P", "1", r.delta_p.clone()),
                    Column::new("stderr", "1", r.stderr.clone()),
                ],
            };
            (table, checks, steps)
        }
        Experiment::Angle => {
            let s = experiments::angle(&setup, omega, eta0, t, &values)?;
            let steps = values
                .iter()
                .map(|&theta| {
                    let mut local = setup.clone();
                    local.phi_l = experiments::matched_laser_phase(theta);
                    let ws = local.resonance(omega)?;
                    steps_for(Some(theta), &local.signal_scenario(omega, eta0, ws, t, t)?)
                })
                .collect::<Result<_>>()?;
            (
                series_table(&s, Column::new("theta", "rad", values), "delta_P"),
                s.spot_checks.clone(),
                steps,
            )
        }
        Experiment::Sensitivity => {
            let interval = config.sweep.interval.unwrap();
            let pts = experiments::sensitivity(&setup, omega, eta0, interval, t)?;
            let ws = setup.resonance(omega)?;
            let steps = vec![steps_for(None, &setup.signal_scenario(omega, eta0, ws, t, interval)?)?];
            let scale = conv.scale();
            let col = |f: fn(&experiments::SensitivityPoint) -> f64| pts.iter().map(f).collect::<Vec<_>>();
            let table = Table {
                columns: vec![
                    Column::new("t", "us", col(|p| p.t)),
                    Column::new("P_0g", "1", col(|p| p.p)),
                    Column::new("dP_deta0", &format!("1/({fu})"), col(|p| p.slope).iter().map(|s| s * scale).collect()),
                    Column::new("sensitivity", fu, col(|p| p.sensitivity).iter().map(|s| s / scale).collect()),
                    Column::new("flagged", "bool", col(|p| if p.flagged { 1.0 } else { 0.0 })),
                ],
            };
            (table, Vec::new(), steps)
        }
        Experiment::FilterOracle => {
            let interval = config.sweep.interval.unwrap();
            let ou = calibrate_dephasing(config.noise.t2_star.unwrap(), config.noise.tau_beta.unwrap())?;
            let n = (t / interval).round() as usize;
            let times: Vec<f64> = (1..=n).map(|k| k as f64 * interval).collect();
            let l = times
                .iter()
                .map(|&ti| second_order_l(&ou, &FilterParams::new(omega, ti)?))
                .collect::<Result<Vec<_>>>()?;
            let table = Table {
                columns: vec![Column::new("t", "us", times), Column::new("L_second_order", "1", l)],
            };
            (table, Vec::new(), Vec::new())
        }
    };
    Ok(Outcome {
        table,
        summary,
        spot_checks,
        steps,
    })
}

/// `output.dir`, else `$NVDRESS_OUT/<experiment>`, else
/// `nvdress-out/<experiment>`.
pub fn default_out_dir(config: &RunConfig) -> PathBuf {
    if let Some(d) = &config.output.dir {
        return d.clone();
    }
    let root = std::env::var_os(OUT_ENV).map_or_else(|| PathBuf::from("nvdress-out"), PathBuf::from);
    root.join(config.experiment.name())
}

fn spot_check_csv(x: &Column, checks: &[SpotCheck]) -> String {
    let mut out = format!("{},reduced [1],full [1],full_stderr [1]\n", x.header());
    for c in checks {
        writeln!(out, "{:?},{:?},{:?},{:?}", c.x, c.reduced, c.full, c.full_stderr).unwrap();
    }
    out
}

fn write_artifacts(config: &RunConfig, outcome: &Outcome, out: &Path, wall: f64) -> Result<RunManifest> {
    fs::create_dir_all(out)?;
    fs::write(out.join(RESULTS_FILE), outcome.table.to_csv())?;
    if let Some(s) = &outcome.summary {
        fs::write(out.join(SUMMARY_FILE), serde_json::to_string_pretty(s)?)?;
    }
    if !outcome.spot_checks.is_empty() {
        fs::write(out.join(SPOT_CHECK_FILE), spot_check_csv(&outcome.table.columns[0], &outcome.spot_checks))?;
    }
    if config.output.plot_series == Some(true) {
        let dir = out.join("plot");
        fs::create_dir_all(&dir)?;
        for j in 1..outcome.table.columns.len() {
            let name = format!("{}.dat", outcome.table.columns[j].name);
            fs::write(dir.join(name), outcome.table.plot_series(j))?;
        }
    }
    let ens = config.ensemble_config();
    let manifest = RunManifest {
        version: env!("CARGO_PKG_VERSION").into(),
        config: config.clone(),
        master_seed: ens.master_seed,
        n_runs: ens.n_runs,
        seed_rule: RNG_DESCRIPTION.into(),
        wall_clock_seconds: wall,
        steps: outcome.steps.clone(),
        results: RESULTS_FILE.into(),
    };
    fs::write(out.join(MANIFEST_FILE), serde_json::to_string_pretty(&manifest)?)?;
    Ok(manifest)
}

/// Runs `config` and writes every artifact into `out`.
pub fn run(config: &RunConfig, out: &Path) -> Result<(RunManifest, Outcome)> {
    let config = config.clone().resolve()?;
    let start = Instant::now();
    let outcome = execute(&config)?;
    let manifest = write_artifacts(&config, &outcome, out, start.elapsed().as_secs_f64())?;
    Ok((manifest, outcome))
}

pub fn read_manifest(path: &Path) -> Result<RunManifest> {
    let text = fs::read_to_string(path)?;
    Ok(serde_json::from_str(&text)?)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Replay {
    pub manifest: RunManifest,
    /// Byte equality with the original table, if that file still exists.
    pub identical: Option<bool>,
}

/// Reruns the config in a manifest, writing into `out` (default: a
/// `replay` directory next to the manifest), and compares result tables.
pub fn replay(manifest_path: &Path, out: Option<&Path>) -> Result<Replay> {
    let original = read_manifest(manifest_path)?;
    let dir = manifest_path.parent().unwrap_or(Path::new("."));
    let out = out.map_or_else(|| dir.join("replay"), Path::to_path_buf);
    if out == dir {
        return Err(Error::Config("replay output would overwrite the original run".into()));
    }
    let (manifest, _) = run(&original.config, &out)?;
    let identical = match fs::read(dir.join(&original.results)) {
        Ok(before) => Some(before == fs::read(out.join(RESULTS_FILE))?),
        Err(_) => None,
    };
    Ok(Replay { manifest, identical })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_layout() {
        let t = Table {
            columns: vec![
                Column::new("t", "us", vec![0.1, 1e-20]),
                Column::new("abs_L", "1", vec![1.0 / 3.0, -0.0]),
            ],
        };
        assert_eq!(t.to_csv(), "t [us],abs_L [1]\n0.1,0.3333333333333333\n1e-20,-0.0\n");
        assert_eq!(t.plot_series(1).lines().nth(1), Some("0.1 0.3333333333333333"));
    }

    #[test]
    fn csv_floats_round_trip() {
        let values = vec![std::f64::consts::PI, 1e-300, 123456.789e10, -2.5e-7];
        let t = Table {
            columns: vec![Column::new("x", "1", values.clone())],
        };
        let back: Vec<f64> = t.to_csv().lines().skip(1).map(|l| l.parse().unwrap()).collect();
        assert_eq!(back, values);
    }

    #[test]
    fn summary_line() {
        let s = SpectrumSummary {
            resonance: 5.0,
            center: 5.01,
            depth: 0.6,
            fwhm: None,
        };
        assert_eq!(s.to_string(), "center=5.01 depth=0.6 fwhm=none");
    }
}
