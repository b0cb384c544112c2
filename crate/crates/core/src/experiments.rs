//! Scripted sweep protocols: coherence versus drive, time and drive noise,
//! resonance spectra, signal direction and one-trial sensitivity.
//!
//! All frequencies are internal angular units (rad/us). Every sweep point
//! uses the same master seed, so points share noise realizations.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::engine::{model_resonance, EngineModel};
use crate::ensemble::{
    coherence_abs, par_map, population_p0, run_ensemble, DriveNoise, EnsembleConfig,
    EnsembleResult, InitialState, Scenario, PRODUCTION_STEPS_PER_PERIOD,
};
use crate::error::{Error, Result};
use crate::model::{
    FieldPreset, FrequencyConvention, NVParams, PhasePolicy, SignalMode, SignalParams,
};
use crate::noise::{calibrate_dephasing, OUParams};

pub const DEFAULT_T2_STAR: f64 = 3.0;
pub const DEFAULT_TAU_BETA: f64 = 25.0;
pub const DEFAULT_TAU_OMEGA: f64 = 100.0;

/// Relative step of the central difference in `eta0`.
pub const SENSITIVITY_STEP: f64 = 0.1;

/// Points on each side of the resonance in the coarse spectrum grid, and the
/// refinement factor within one expected width.
pub const SPECTRUM_POINTS: usize = 41;
pub const SPECTRUM_SPAN: f64 = 10.0;
pub const SPECTRUM_REFINE: usize = 5;

/// Settings shared by every point of a sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Setup {
    pub nv: NVParams,
    pub signal_mode: SignalMode,
    pub model: EngineModel,
    pub dephasing: Option<OUParams>,
    pub drive_noise: Option<DriveNoise>,
    /// Laser phase `phi_L`.
    pub phi_l: f64,
    pub theta_sig: f64,
    pub steps_per_period: f64,
    pub ensemble: EnsembleConfig,
    /// Runs per full six-level spot check (0 disables them).
    pub spot_check_runs: usize,
}

impl Setup {
    /// Preset with calibrated dephasing and the laser phase matched to a
    /// signal along `theta_sig = 0`.
    pub fn new(preset: &FieldPreset, convention: FrequencyConvention, ensemble: EnsembleConfig) -> Result<Self> {
        Ok(Self {
            nv: NVParams::from_preset(preset, convention)?,
            signal_mode: SignalMode::for_preset(preset),
            model: EngineModel::default(),
            dephasing: Some(calibrate_dephasing(DEFAULT_T2_STAR, DEFAULT_TAU_BETA)?),
            drive_noise: None,
            phi_l: matched_laser_phase(0.0),
            theta_sig: 0.0,
            steps_per_period: PRODUCTION_STEPS_PER_PERIOD,
            ensemble,
            spot_check_runs: 0,
        })
    }

    /// Matched-drive scenario recording every `record_interval` up to `t_end`.
    pub fn scenario(&self, omega: f64, t_end: f64, record_interval: f64) -> Result<Scenario> {
        let mut s = Scenario::matched(self.nv.clone(), omega, self.phi_l, self.model)?;
        s.signal_mode = self.signal_mode;
        s.dephasing = self.dephasing;
        s.drive_noise = self.drive_noise;
        s.t_end = t_end;
        s.record_interval = record_interval;
        s.steps_per_period = self.steps_per_period;
        Ok(s)
    }

    /// Scenario starting in `|0_g>` with a signal at `omega_s`.
    pub fn signal_scenario(&self, omega: f64, eta0: f64, omega_s: f64, t_end: f64, record_interval: f64) -> Result<Scenario> {
        let mut s = self.scenario(omega, t_end, record_interval)?;
        s.initial = InitialState::Zero;
        s.signal = Some(SignalParams {
            eta0,
            omega_s,
            theta_sig: self.theta_sig,
            phase_policy: PhasePolicy::RandomPerRun,
            phase: 0.0,
        });
        Ok(s)
    }

    /// Signal frequency that is resonant under drive `omega`.
    pub fn resonance(&self, omega: f64) -> Result<f64> {
        let s = self.scenario(omega, 1.0, 1.0)?;
        model_resonance(&s.nv, &s.drive, s.model)
    }
}

/// Laser phase that routes a signal along `theta` into the dark state.
pub fn matched_laser_phase(theta: f64) -> f64 {
    2.0 * theta + PI
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub parameter: String,
    pub grid: Vec<f64>,
}

impl SweepSpec {
    pub fn new(parameter: impl Into<String>, grid: Vec<f64>) -> Result<Self> {
        let s = Self {
            parameter: parameter.into(),
            grid,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if self.grid.is_empty() {
            return Err(Error::invalid(&self.parameter, "sweep grid is empty"));
        }
        if self.grid.iter().any(|x| !x.is_finite()) || self.grid.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::invalid(&self.parameter, "sweep grid must be finite and sorted"));
        }
        Ok(())
    }
}

/// Reduced-model value at a sweep point next to the full six-level value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpotCheck {
    pub x: f64,
    pub reduced: f64,
    pub full: f64,
    pub full_stderr: f64,
}

/// `y(x)` with standard errors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Series {
    pub parameter: String,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub stderr: Vec<f64>,
    pub spot_checks: Vec<SpotCheck>,
}

impl Series {
    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (i, &v) in self.y.iter().enumerate() {
            if v > self.y[best] {
                best = i;
            }
        }
        best
    }

    pub fn at(&self, x: f64) -> Option<(f64, f64)> {
        let i = self.x.iter().position(|&v| (v - x).abs() <= 1e-9 * x.abs().max(1.0))?;
        Some((self.y[i], self.stderr[i]))
    }
}

/// Value of the headline observable at the final time: `|L|` for coherence
/// scenarios, `P_0g` otherwise.
fn final_value(res: &EnsembleResult) -> Result<(f64, f64)> {
    let (y, se) = match res.initial {
        InitialState::DarkZero => coherence_abs(res)?,
        InitialState::Zero => population_p0(res),
    };
    Ok((*y.last().unwrap(), *se.last().unwrap()))
}

/// Three representative grid indices: both ends and the middle.
fn spot_indices(n: usize) -> Vec<usize> {
    let mut idx = vec![0, n / 2, n - 1];
    idx.dedup();
    idx
}

fn spot_checks(
    setup: &Setup,
    spec: &SweepSpec,
    reduced: &[f64],
    point: &(dyn Fn(f64) -> Result<Scenario> + Sync),
) -> Result<Vec<SpotCheck>> {
    if setup.spot_check_runs == 0 || setup.model == EngineModel::Full {
        return Ok(Vec::new());
    }
    let cfg = EnsembleConfig {
        n_runs: setup.spot_check_runs,
        ..setup.ensemble
    };
    spot_indices(spec.grid.len())
        .into_iter()
        .map(|i| {
            let mut s = point(spec.grid[i])?;
            s.model = EngineModel::Full;
            let (full, full_stderr) = final_value(&run_ensemble(&cfg, &s)?)?;
            Ok(SpotCheck {
                x: spec.grid[i],
                reduced: reduced[i],
                full,
                full_stderr,
            })
        })
        .collect()
}

/// Runs `point(x)` for every grid value and reports the final-time value.
fn sweep(
    setup: &Setup,
    spec: &SweepSpec,
    point: &(dyn Fn(f64) -> Result<Scenario> + Sync),
) -> Result<Series> {
    spec.validate()?;
    let values = par_map(spec.grid.len(), |i| {
        final_value(&run_ensemble(&setup.ensemble, &point(spec.grid[i])?)?)
    });
    let (y, stderr): (Vec<f64>, Vec<f64>) = values.into_iter().collect::<Result<Vec<_>>>()?.into_iter().unzip();
    Ok(Series {
        parameter: spec.parameter.clone(),
        spot_checks: spot_checks(setup, spec, &y, point)?,
        x: spec.grid.clone(),
        y,
        stderr,
    })
}

/// `|L(t)|` against the effective Rabi frequency.
pub fn coherence_vs_drive(setup: &Setup, omegas: &[f64], t: f64) -> Result<Series> {
    let spec = SweepSpec::new("omega", omegas.to_vec())?;
    sweep(setup, &spec, &|omega| setup.scenario(omega, t, t))
}

/// `|L(t)|` on a uniform time grid.
pub fn coherence_vs_time(setup: &Setup, omega: f64, t_end: f64, interval: f64) -> Result<Series> {
    let s = setup.scenario(omega, t_end, interval)?;
    let res = run_ensemble(&setup.ensemble, &s)?;
    let (y, stderr) = coherence_abs(&res)?;
    let spot = if setup.spot_check_runs > 0 && setup.model != EngineModel::Full {
        let spec = SweepSpec::new("omega", vec![omega])?;
        spot_checks(setup, &spec, &[*y.last().unwrap()], &|om| setup.scenario(om, t_end, t_end))?
    } else {
        Vec::new()
    };
    Ok(Series {
        parameter: "t".into(),
        x: res.times,
        y,
        stderr,
        spot_checks: spot,
    })
}

/// First time at which `series` falls to `level`, linearly interpolated.
pub fn crossing_time(series: &Series, level: f64) -> Option<f64> {
    let (x, y) = (&series.x, &series.y);
    for i in 1..x.len() {
        if y[i] <= level && y[i - 1] > level {
            let f = (y[i - 1] - level) / (y[i - 1] - y[i]);
            return Some(x[i - 1] + f * (x[i] - x[i - 1]));
        }
    }
    None
}

/// `|L(t)|` against the relative standard deviation of independent
/// fluctuations of the two laser amplitudes. The correlation time comes from
/// `setup.drive_noise`, or [`DEFAULT_TAU_OMEGA`] if unset.
pub fn drive_fluctuations(setup: &Setup, omega: f64, deltas: &[f64], t: f64) -> Result<Series> {
    let spec = SweepSpec::new("delta_omega", deltas.to_vec())?;
    let tau = setup.drive_noise.map_or(DEFAULT_TAU_OMEGA, |n| n.tau);
    sweep(setup, &spec, &|d| {
        let mut local = setup.clone();
        local.drive_noise = (d > 0.0).then_some(DriveNoise { delta_rel: d, tau });
        local.scenario(omega, t, t)
    })
}

/// Coarse grid of [`SPECTRUM_POINTS`] points over `center +- SPECTRUM_SPAN *
/// width`, merged with a grid [`SPECTRUM_REFINE`] times finer over
/// `center +- width`.
pub fn spectrum_grid(center: f64, width: f64) -> Result<Vec<f64>> {
    if !(width > 0.0) {
        return Err(Error::invalid("width", "must be positive"));
    }
    let n = SPECTRUM_POINTS - 1;
    let step = 2.0 * SPECTRUM_SPAN * width / n as f64;
    let fine = step / SPECTRUM_REFINE as f64;
    let half_fine = (width / fine).round() as i64;
    let mut offsets: Vec<f64> = (0..=n)
        .map(|i| -SPECTRUM_SPAN * width + i as f64 * step)
        .chain((-half_fine..=half_fine).map(|k| k as f64 * fine))
        .collect();
    offsets.sort_by(f64::total_cmp);
    offsets.dedup_by(|a, b| (*a - *b).abs() < 1e-9 * fine);
    Ok(offsets.into_iter().map(|o| center + o).collect())
}

/// Full width at half maximum of a peak in `y`, from linearly interpolated
/// half-maximum crossings on either side of the largest sample.
pub fn fwhm(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() || x.len() < 3 {
        return Err(Error::NoFwhm("need at least three samples".into()));
    }
    let peak = (0..y.len()).fold(0, |b, i| if y[i] > y[b] { i } else { b });
    let half = 0.5 * y[peak];
    if !(half > 0.0) {
        return Err(Error::NoFwhm("peak is not positive".into()));
    }
    let cross = |i: usize, j: usize| x[i] + (half - y[i]) / (y[j] - y[i]) * (x[j] - x[i]);
    let left = (1..=peak).rev().find(|&i| y[i - 1] < half).map(|i| cross(i - 1, i));
    let right = (peak..y.len() - 1).find(|&i| y[i + 1] < half).map(|i| cross(i, i + 1));
    match (left, right) {
        (Some(l), Some(r)) => Ok(r - l),
        _ => Err(Error::NoFwhm("half-maximum crossings do not bracket the peak".into())),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumResult {
    pub omega_s: Vec<f64>,
    /// `omega_s - omega_res`.
    pub detuning: Vec<f64>,
    /// Signed population change `P_ref - P_0g(t)`; `P_ref = 1` because
    /// `|0_g>` is stationary without a signal.
    pub delta_p: Vec<f64>,
    pub stderr: Vec<f64>,
    pub resonance: f64,
    /// Signal frequency of the extremal `|delta_p|`.
    pub center: f64,
    /// Signed `delta_p` at `center`.
    pub depth: f64,
    pub fwhm: Option<f64>,
    pub spot_checks: Vec<SpotCheck>,
}

/// `P_0g(t)` change against the signal frequency. `grid` defaults to
/// [`spectrum_grid`] around the resonance with `expected_width`.
pub fn spectrum(
    setup: &Setup,
    omega: f64,
    eta0: f64,
    t: f64,
    expected_width: f64,
    grid: Option<Vec<f64>>,
) -> Result<SpectrumResult> {
    let resonance = setup.resonance(omega)?;
    let grid = match grid {
        Some(g) => g,
        None => spectrum_grid(resonance, expected_width)?,
    };
    let spec = SweepSpec::new("omega_s", grid)?;
    let series = sweep(setup, &spec, &|ws| setup.signal_scenario(omega, eta0, ws, t, t))?;
    let delta_p: Vec<f64> = series.y.iter().map(|p| 1.0 - p).collect();
    let peak = (0..delta_p.len()).fold(0, |b, i| if delta_p[i].abs() > delta_p[b].abs() { i } else { b });
    let sign = delta_p[peak].signum();
    let oriented: Vec<f64> = delta_p.iter().map(|d| sign * d).collect();
    let spot_checks = series
        .spot_checks
        .iter()
        .map(|s| SpotCheck {
            reduced: 1.0 - s.reduced,
            full: 1.0 - s.full,
            ..*s
        })
        .collect();
    Ok(SpectrumResult {
        detuning: series.x.iter().map(|w| w - resonance).collect(),
        fwhm: fwhm(&series.x, &oriented).ok(),
        center: series.x[peak],
        depth: delta_p[peak],
        omega_s: series.x,
        delta_p,
        stderr: series.stderr,
        resonance,
        spot_checks,
    })
}

/// On-resonance population change against the assumed signal direction
/// `theta`, with the laser phase set to [`matched_laser_phase`]`(theta)`.
pub fn angle(setup: &Setup, omega: f64, eta0: f64, t: f64, thetas: &[f64]) -> Result<Series> {
    let spec = SweepSpec::new("theta", thetas.to_vec())?;
    let point = |theta: f64| {
        let mut local = setup.clone();
        local.phi_l = matched_laser_phase(theta);
        let ws = local.resonance(omega)?;
        local.signal_scenario(omega, eta0, ws, t, t)
    };
    let mut series = sweep(setup, &spec, &point)?;
    series.y.iter_mut().for_each(|p| *p = 1.0 - *p);
    for s in &mut series.spot_checks {
        s.reduced = 1.0 - s.reduced;
        s.full = 1.0 - s.full;
    }
    Ok(series)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SensitivityPoint {
    pub t: f64,
    pub p: f64,
    /// `dP/d eta0` by central difference.
    pub slope: f64,
    /// `sqrt(P (1 - P)) / |dP/d eta0|`.
    pub sensitivity: f64,
    /// Degenerate population or a slope below the Monte Carlo noise floor.
    pub flagged: bool,
}

/// One-trial sensitivity at resonance on the grid `interval, 2 interval, ..,
/// t_end`.
///
/// The slope uses ensembles at `eta0 (1 +- SENSITIVITY_STEP)` with a common
/// seed; the noise floor is the independent-sample bound on the difference,
/// which overstates the error under common random numbers.
pub fn sensitivity(setup: &Setup, omega: f64, eta0: f64, interval: f64, t_end: f64) -> Result<Vec<SensitivityPoint>> {
    if !(eta0 > 0.0) {
        return Err(Error::invalid("eta0", "must be positive"));
    }
    let ws = setup.resonance(omega)?;
    let etas = [
        eta0,
        eta0 * (1.0 - SENSITIVITY_STEP),
        eta0 * (1.0 + SENSITIVITY_STEP),
    ];
    let runs = par_map(etas.len(), |i| {
        let s = setup.signal_scenario(omega, etas[i], ws, t_end, interval)?;
        run_ensemble(&setup.ensemble, &s)
    });
    let runs = runs.into_iter().collect::<Result<Vec<_>>>()?;
    let (p, _) = population_p0(&runs[0]);
    let (lo, se_lo) = population_p0(&runs[1]);
    let (hi, se_hi) = population_p0(&runs[2]);
    let h = etas[2] - etas[1];
    Ok((1..runs[0].times.len())
        .map(|k| {
            let slope = (hi[k] - lo[k]) / h;
            let spread = (p[k] * (1.0 - p[k])).max(0.0).sqrt();
            let floor = 2.0 * se_lo[k].hypot(se_hi[k]);
            SensitivityPoint {
                t: runs[0].times[k],
                p: p[k],
                slope,
                sensitivity: spread / slope.abs(),
                flagged: spread == 0.0 || !((hi[k] - lo[k]).abs() > floor),
            }
        })
        .collect())
}

/// `alpha_s = 1/sqrt(N)` with `N = T_all / (T_init + t)` repetitions.
pub fn averaging_factor(t_all: f64, t_init: f64, t: f64) -> Result<f64> {
    if !(t_all > 0.0) || !(t_init >= 0.0) || !(t > 0.0) {
        return Err(Error::invalid("t_all/t_init/t", "need t_all > 0, t_init >= 0, t > 0"));
    }
    Ok(((t_init + t) / t_all).sqrt())
}
