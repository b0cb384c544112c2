//! Run configuration: TOML input, defaults and validation.
//!
//! Frequencies in a config (drive, signal, level energies, sweep values of
//! frequency type) are read in the units of `frequency_convention`; times
//! are microseconds and decay rates 1/us in either convention. Conversion to
//! internal rad/us happens only in [`RunConfig::setup`] and the runner.

use std::f64::consts::PI;
use std::fmt;
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::engine::EngineModel;
use crate::ensemble::{DriveNoise, EnsembleConfig, PRODUCTION_STEPS_PER_PERIOD};
use crate::error::{Error, Result};
use crate::experiments::{
    matched_laser_phase, Setup, DEFAULT_T2_STAR, DEFAULT_TAU_BETA, DEFAULT_TAU_OMEGA,
};
use crate::model::{FieldPreset, FrequencyConvention, NVParams, SignalMode, GAMMA_GE, GAMMA_GS, GAMMA_SE};
use crate::noise::calibrate_dephasing;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Experiment {
    CoherenceVsDrive,
    CoherenceVsTime,
    DriveFluctuations,
    Spectrum,
    Angle,
    Sensitivity,
    FilterOracle,
}

impl Experiment {
    pub const ALL: [Experiment; 7] = [
        Experiment::CoherenceVsDrive,
        Experiment::CoherenceVsTime,
        Experiment::DriveFluctuations,
        Experiment::Spectrum,
        Experiment::Angle,
        Experiment::Sensitivity,
        Experiment::FilterOracle,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Experiment::CoherenceVsDrive => "coherence_vs_drive",
            Experiment::CoherenceVsTime => "coherence_vs_time",
            Experiment::DriveFluctuations => "drive_fluctuations",
            Experiment::Spectrum => "spectrum",
            Experiment::Angle => "angle",
            Experiment::Sensitivity => "sensitivity",
            Experiment::FilterOracle => "filter_oracle",
        }
    }

    pub fn description(self) -> &'static str {
        match self {
            Experiment::CoherenceVsDrive => "|L(t)| against drive strength; sweep.values are drive frequencies",
            Experiment::CoherenceVsTime => "|L(t)| on a time grid at fixed drive",
            Experiment::DriveFluctuations => "|L(t)| against relative laser-amplitude noise; sweep.values are deltas",
            Experiment::Spectrum => "population change against signal frequency; sweep.values are detunings",
            Experiment::Angle => "on-resonance population change against assumed signal direction (rad)",
            Experiment::Sensitivity => "one-trial sensitivity on a time grid at resonance",
            Experiment::FilterOracle => "second-order |L(t)| from the filter function and the dephasing spectrum",
        }
    }

    /// What `sweep.values` means, if the experiment takes a grid.
    pub fn sweep_kind(self) -> Option<SweepKind> {
        match self {
            Experiment::CoherenceVsDrive => Some(SweepKind::Frequency),
            Experiment::DriveFluctuations => Some(SweepKind::Ratio),
            Experiment::Spectrum => Some(SweepKind::Frequency),
            Experiment::Angle => Some(SweepKind::Angle),
            _ => None,
        }
    }

    /// Whether the experiment reports a time series.
    pub fn time_series(self) -> bool {
        matches!(
            self,
            Experiment::CoherenceVsTime | Experiment::Sensitivity | Experiment::FilterOracle
        )
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepKind {
    Frequency,
    Ratio,
    Angle,
}

/// Mixing coefficient: a real number or `[re, im]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Coefficient {
    Real(f64),
    Complex([f64; 2]),
}

impl Coefficient {
    pub fn value(self) -> Complex64 {
        match self {
            Coefficient::Real(r) => Complex64::new(r, 0.0),
            Coefficient::Complex([re, im]) => Complex64::new(re, im),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NvSection {
    pub delta: Option<f64>,
    pub c_plus: Option<Coefficient>,
    pub c_minus: Option<Coefficient>,
    pub ground_energies: Option<[f64; 3]>,
    pub gamma_ge: Option<f64>,
    pub gamma_se: Option<f64>,
    pub gamma_gs: Option<f64>,
    pub signal_mode: Option<SignalMode>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DriveSection {
    /// Effective Rabi frequency.
    pub omega: Option<f64>,
    /// Laser phase (rad); matched to `signal.theta_sig` when absent.
    pub phi_l: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SignalSection {
    pub eta0: Option<f64>,
    /// Signal direction (rad).
    pub theta_sig: Option<f64>,
    /// Expected controlled line width; sets the default spectrum grid.
    pub expected_width: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSection {
    pub dephasing: Option<bool>,
    pub t2_star: Option<f64>,
    pub tau_beta: Option<f64>,
    /// Relative laser-amplitude noise; 0 disables it.
    pub delta_omega: Option<f64>,
    pub tau_omega: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnsembleSection {
    pub runs: Option<usize>,
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntegratorSection {
    pub model: Option<EngineModel>,
    pub steps_per_period: Option<f64>,
    /// Runs per full six-level spot check; 0 disables them.
    pub spot_check_runs: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub values: Option<Vec<f64>>,
    /// Final time (us).
    pub t: Option<f64>,
    /// Record interval of time-series experiments (us).
    pub interval: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    pub dir: Option<PathBuf>,
    /// Also write one two-column file per result column.
    pub plot_series: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub experiment: Experiment,
    /// `zero-field`, `bias` or `custom` (all of `nv.delta`, `nv.c_plus`,
    /// `nv.c_minus`, `nv.ground_energies` required).
    #[serde(default = "default_preset")]
    pub preset: String,
    #[serde(default)]
    pub frequency_convention: Option<FrequencyConvention>,
    /// Worker threads; 0 uses every core.
    #[serde(default)]
    pub threads: Option<usize>,
    #[serde(default)]
    pub nv: NvSection,
    #[serde(default)]
    pub drive: DriveSection,
    #[serde(default)]
    pub signal: SignalSection,
    #[serde(default)]
    pub noise: NoiseSection,
    #[serde(default)]
    pub ensemble: EnsembleSection,
    #[serde(default)]
    pub integrator: IntegratorSection,
    #[serde(default)]
    pub sweep: SweepSection,
    #[serde(default)]
    pub output: OutputSection,
}

fn default_preset() -> String {
    "zero-field".into()
}

pub const DEFAULT_RUNS: usize = 500;
pub const DEFAULT_SEED: u64 = 1;

/// Parses and resolves a config file.
pub fn parse_config(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    parse_config_str(&text).map_err(|e| match e {
        Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
        other => other,
    })
}

pub fn parse_config_str(text: &str) -> Result<RunConfig> {
    let raw: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
    raw.resolve()
}

fn positive(field: &str, v: f64) -> Result<f64> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(Error::invalid(field, format!("must be positive and finite, got {v}")))
    }
}

fn non_negative(field: &str, v: f64) -> Result<f64> {
    if v >= 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(Error::invalid(field, format!("must be non-negative and finite, got {v}")))
    }
}

fn finite(field: &str, v: f64) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::invalid(field, format!("must be finite, got {v}")))
    }
}

impl RunConfig {
    /// Minimal config for `experiment` on `preset`.
    pub fn minimal(experiment: Experiment, preset: &str) -> Result<Self> {
        Self {
            experiment,
            preset: preset.into(),
            frequency_convention: None,
            threads: None,
            nv: NvSection::default(),
            drive: DriveSection::default(),
            signal: SignalSection::default(),
            noise: NoiseSection::default(),
            ensemble: EnsembleSection::default(),
            integrator: IntegratorSection::default(),
            sweep: SweepSection::default(),
            output: OutputSection::default(),
        }
        .resolve()
    }

    pub fn convention(&self) -> FrequencyConvention {
        self.frequency_convention.unwrap_or_default()
    }

    /// Field configuration in config units.
    fn preset_values(&self) -> Result<Option<FieldPreset>> {
        if self.preset == "custom" {
            return Ok(None);
        }
        FieldPreset::by_name(&self.preset)
            .map(Some)
            .ok_or_else(|| Error::invalid("preset", format!("unknown preset `{}`", self.preset)))
    }

    fn is_bias(&self) -> bool {
        self.nv.signal_mode == Some(SignalMode::Bias)
    }

    /// Fills every default and validates ranges. Idempotent.
    pub fn resolve(mut self) -> Result<Self> {
        let preset = self.preset_values()?;
        let nv = &mut self.nv;
        match &preset {
            Some(p) => {
                nv.delta.get_or_insert(p.delta);
                nv.c_plus.get_or_insert(Coefficient::Real(p.c_plus));
                nv.c_minus.get_or_insert(Coefficient::Real(p.c_minus));
                nv.ground_energies.get_or_insert(p.ground_energies);
                nv.signal_mode.get_or_insert(SignalMode::for_preset(p));
            }
            None => {
                for (name, present) in [
                    ("nv.delta", nv.delta.is_some()),
                    ("nv.c_plus", nv.c_plus.is_some()),
                    ("nv.c_minus", nv.c_minus.is_some()),
                    ("nv.ground_energies", nv.ground_energies.is_some()),
                ] {
                    if !present {
                        return Err(Error::invalid(name, "required with preset = \"custom\""));
                    }
                }
                nv.signal_mode.get_or_insert(SignalMode::ZeroField);
            }
        }
        nv.gamma_ge.get_or_insert(GAMMA_GE);
        nv.gamma_se.get_or_insert(GAMMA_SE);
        nv.gamma_gs.get_or_insert(GAMMA_GS);
        positive("nv.delta", nv.delta.unwrap())?;
        for (name, v) in [
            ("nv.gamma_ge", nv.gamma_ge),
            ("nv.gamma_se", nv.gamma_se),
            ("nv.gamma_gs", nv.gamma_gs),
        ] {
            non_negative(name, v.unwrap())?;
        }
        for (name, c) in [("nv.c_plus", nv.c_plus), ("nv.c_minus", nv.c_minus)] {
            let c = c.unwrap().value();
            finite(name, c.re)?;
            finite(name, c.im)?;
        }
        for e in nv.ground_energies.unwrap() {
            finite("nv.ground_energies", e)?;
        }

        // drive and signal defaults follow the field configuration
        let bias = self.is_bias();
        let omega = *self.drive.omega.get_or_insert(if bias { 7.0 } else { 10.0 });
        non_negative("drive.omega", omega)?;
        let theta = *self.signal.theta_sig.get_or_insert(0.0);
        finite("signal.theta_sig", theta)?;
        finite("drive.phi_l", *self.drive.phi_l.get_or_insert(matched_laser_phase(theta)))?;
        positive("signal.eta0", *self.signal.eta0.get_or_insert(if bias { 0.02 } else { 0.01 }))?;
        let width = if omega > 0.0 { 0.02 } else { 0.2 };
        positive("signal.expected_width", *self.signal.expected_width.get_or_insert(width))?;

        self.noise.dephasing.get_or_insert(true);
        positive("noise.t2_star", *self.noise.t2_star.get_or_insert(DEFAULT_T2_STAR))?;
        positive("noise.tau_beta", *self.noise.tau_beta.get_or_insert(DEFAULT_TAU_BETA))?;
        non_negative("noise.delta_omega", *self.noise.delta_omega.get_or_insert(0.0))?;
        positive("noise.tau_omega", *self.noise.tau_omega.get_or_insert(DEFAULT_TAU_OMEGA))?;

        if *self.ensemble.runs.get_or_insert(DEFAULT_RUNS) == 0 {
            return Err(Error::invalid("ensemble.runs", "must be at least 1"));
        }
        self.ensemble.seed.get_or_insert(DEFAULT_SEED);

        self.integrator.model.get_or_insert(EngineModel::default());
        positive(
            "integrator.steps_per_period",
            *self.integrator.steps_per_period.get_or_insert(PRODUCTION_STEPS_PER_PERIOD),
        )?;
        self.integrator.spot_check_runs.get_or_insert(0);

        let t = *self.sweep.t.get_or_insert(match self.experiment {
            Experiment::CoherenceVsTime | Experiment::Sensitivity | Experiment::FilterOracle => 60.0,
            _ => 50.0,
        });
        positive("sweep.t", t)?;
        if self.experiment.time_series() {
            let interval = *self.sweep.interval.get_or_insert(if self.experiment == Experiment::Sensitivity {
                5.0
            } else {
                1.0
            });
            positive("sweep.interval", interval)?;
            if interval > t {
                return Err(Error::invalid("sweep.interval", "exceeds sweep.t"));
            }
        } else if self.sweep.interval.is_some() {
            return Err(Error::invalid(
                "sweep.interval",
                format!("not used by {}", self.experiment),
            ));
        }
        match self.experiment.sweep_kind() {
            Some(kind) => {
                if self.sweep.values.is_none() {
                    self.sweep.values = self.default_values();
                }
                if let Some(v) = &self.sweep.values {
                    if v.is_empty() {
                        return Err(Error::invalid("sweep.values", "is empty"));
                    }
                    if v.iter().any(|x| !x.is_finite()) || v.windows(2).any(|w| w[1] < w[0]) {
                        return Err(Error::invalid("sweep.values", "must be finite and sorted"));
                    }
                    if kind != SweepKind::Angle && self.experiment != Experiment::Spectrum && v[0] < 0.0 {
                        return Err(Error::invalid("sweep.values", "must be non-negative"));
                    }
                }
            }
            None if self.sweep.values.is_some() => {
                return Err(Error::invalid(
                    "sweep.values",
                    format!("not used by {}", self.experiment),
                ));
            }
            None => {}
        }
        if let Some(n) = self.threads {
            if n > 4096 {
                return Err(Error::invalid("threads", "unreasonably large"));
            }
        }
        self.output.plot_series.get_or_insert(false);
        Ok(self)
    }

    /// Default grid. `None` for spectra, which build theirs around the
    /// computed resonance.
    fn default_values(&self) -> Option<Vec<f64>> {
        match self.experiment {
            Experiment::CoherenceVsDrive => Some(vec![0.0, 2.0, 5.0, 7.0, 10.0, 15.0, 25.0, 50.0]),
            Experiment::DriveFluctuations => Some(vec![0.0, 0.005, 0.01, 0.015, 0.02]),
            Experiment::Angle => {
                let theta = self.signal.theta_sig.unwrap_or(0.0);
                Some((-10..=10).map(|k| theta + 0.05 * PI * k as f64).collect())
            }
            _ => None,
        }
    }

    pub fn nv_params(&self) -> Result<NVParams> {
        let conv = self.convention();
        let nv = &self.nv;
        let (cp, cm) = (nv.c_plus.unwrap().value(), nv.c_minus.unwrap().value());
        let norm = (cp.norm_sqr() + cm.norm_sqr()).sqrt();
        if norm == 0.0 {
            return Err(Error::invalid("nv.c_plus/nv.c_minus", "both zero"));
        }
        let p = NVParams {
            delta: conv.to_internal(nv.delta.unwrap()),
            c_plus: cp / norm,
            c_minus: cm / norm,
            ground_energies: nv.ground_energies.unwrap().map(|e| conv.to_internal(e)),
            gamma_ge: nv.gamma_ge.unwrap(),
            gamma_se: nv.gamma_se.unwrap(),
            gamma_gs: nv.gamma_gs.unwrap(),
            branching: Default::default(),
        };
        p.validate()?;
        Ok(p)
    }

    /// Ensemble settings after command-line overrides.
    pub fn ensemble_config(&self) -> EnsembleConfig {
        EnsembleConfig::new(self.ensemble.runs.unwrap_or(DEFAULT_RUNS), self.ensemble.seed.unwrap_or(DEFAULT_SEED))
    }

    /// Shared sweep settings in internal units.
    pub fn setup(&self) -> Result<Setup> {
        let noise = &self.noise;
        Ok(Setup {
            nv: self.nv_params()?,
            signal_mode: self.nv.signal_mode.unwrap_or(SignalMode::ZeroField),
            model: self.integrator.model.unwrap_or_default(),
            dephasing: if noise.dephasing.unwrap_or(true) {
                Some(calibrate_dephasing(
                    noise.t2_star.unwrap_or(DEFAULT_T2_STAR),
                    noise.tau_beta.unwrap_or(DEFAULT_TAU_BETA),
                )?)
            } else {
                None
            },
            drive_noise: match noise.delta_omega.unwrap_or(0.0) {
                d if d > 0.0 || self.experiment == Experiment::DriveFluctuations => Some(DriveNoise {
                    delta_rel: d,
                    tau: noise.tau_omega.unwrap_or(DEFAULT_TAU_OMEGA),
                }),
                _ => None,
            },
            phi_l: self.drive.phi_l.unwrap_or(PI),
            theta_sig: self.signal.theta_sig.unwrap_or(0.0),
            steps_per_period: self.integrator.steps_per_period.unwrap_or(PRODUCTION_STEPS_PER_PERIOD),
            ensemble: self.ensemble_config(),
            spot_check_runs: self.integrator.spot_check_runs.unwrap_or(0),
        })
    }

    /// Drive strength in rad/us.
    pub fn omega(&self) -> f64 {
        self.convention().to_internal(self.drive.omega.unwrap_or(0.0))
    }

    pub fn eta0(&self) -> f64 {
        self.convention().to_internal(self.signal.eta0.unwrap_or(0.0))
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| Error::Config(e.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_gets_defaults() {
        let c = parse_config_str("experiment = \"coherence_vs_time\"\npreset = \"zero-field\"\n").unwrap();
        assert_eq!(c.ensemble.runs, Some(DEFAULT_RUNS));
        assert_eq!(c.drive.omega, Some(10.0));
        assert_eq!(c.sweep.interval, Some(1.0));
        assert_eq!(c.nv.delta, Some(2000.0));
        assert_eq!(c.convention(), FrequencyConvention::Angular);
        assert!(c.sweep.values.is_none());
        // resolving twice changes nothing
        assert_eq!(c.clone().resolve().unwrap(), c);
    }

    #[test]
    fn bias_defaults() {
        let c = RunConfig::minimal(Experiment::Spectrum, "bias").unwrap();
        assert_eq!(c.drive.omega, Some(7.0));
        assert_eq!(c.signal.eta0, Some(0.02));
        assert_eq!(c.nv.signal_mode, Some(SignalMode::Bias));
    }

    #[test]
    fn unknown_keys_rejected() {
        let e = parse_config_str("experiment = \"angle\"\nbogus = 1\n").unwrap_err();
        assert!(e.to_string().contains("bogus"), "{e}");
        let e = parse_config_str("experiment = \"angle\"\n[drive]\nomega = 3\nconvention = \"ordinary\"\n").unwrap_err();
        assert!(e.to_string().contains("convention"), "{e}");
    }

    #[test]
    fn parse_errors_carry_line() {
        let e = parse_config_str("experiment = \"angle\"\n\n[noise]\nt2_star = \"x\"\n").unwrap_err();
        assert!(e.to_string().contains("line 4"), "{e}");
    }

    #[test]
    fn negative_rate_names_field() {
        let e = parse_config_str("experiment = \"spectrum\"\n[nv]\ngamma_se = -1.0\n").unwrap_err();
        assert!(e.to_string().contains("nv.gamma_se"), "{e}");
    }

    #[test]
    fn custom_preset_needs_levels() {
        let e = parse_config_str("experiment = \"spectrum\"\npreset = \"custom\"\n[nv]\ndelta = 100.0\n").unwrap_err();
        assert!(e.to_string().contains("nv.c_plus"), "{e}");
        let c = parse_config_str(
            "experiment = \"spectrum\"\npreset = \"custom\"\n[nv]\ndelta = 100.0\nc_plus = [0.6, 0.0]\nc_minus = 0.8\nground_energies = [0.0, -50.0, -60.0]\n",
        )
        .unwrap();
        let p = c.nv_params().unwrap();
        assert!((p.c_plus.re - 0.6).abs() < 1e-15);
    }

    #[test]
    fn sweep_values_checked() {
        assert!(parse_config_str("experiment = \"coherence_vs_drive\"\n[sweep]\nvalues = [5.0, 2.0]\n").is_err());
        assert!(parse_config_str("experiment = \"coherence_vs_time\"\n[sweep]\nvalues = [1.0]\n").is_err());
        assert!(parse_config_str("experiment = \"spectrum\"\n[sweep]\ninterval = 1.0\n").is_err());
        let c = parse_config_str("experiment = \"spectrum\"\n[sweep]\nvalues = [-0.1, 0.0, 0.1]\n").unwrap();
        assert_eq!(c.sweep.values.unwrap().len(), 3);
    }

    #[test]
    fn ordinary_scales_frequencies_only() {
        let a = RunConfig::minimal(Experiment::CoherenceVsTime, "zero-field").unwrap();
        let mut o = a.clone();
        o.frequency_convention = Some(FrequencyConvention::Ordinary);
        let (sa, so) = (a.setup().unwrap(), o.setup().unwrap());
        assert_eq!(so.nv.delta, sa.nv.delta * std::f64::consts::TAU);
        assert_eq!(so.nv.gamma_ge, sa.nv.gamma_ge);
        assert_eq!(so.dephasing, sa.dephasing);
        assert_eq!(o.omega(), a.omega() * std::f64::consts::TAU);
    }

    #[test]
    fn toml_round_trip() {
        let c = RunConfig::minimal(Experiment::Angle, "bias").unwrap();
        let back = parse_config_str(&c.to_toml().unwrap()).unwrap();
        assert_eq!(back, c);
    }
}
