//! Seeded Monte Carlo averaging over noise and signal-phase realizations.
//!
//! Runs are grouped in fixed chunks; each chunk is reduced in run order and
//! chunk results are merged in chunk order, so the output does not depend
//! on how many worker threads execute the chunks.

use std::f64::consts::{FRAC_1_SQRT_2, TAU};

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::engine::{
    build_program, evolve, noise_index, EngineModel, HamiltonianProgram, IntegratorConfig,
    NoiseBank, Observable, ProgramSpec,
};
use crate::error::{Error, Result};
use crate::model::{
    dark_state, dark_zero_superposition, matched_drive, relative_phase, DriveConfig, NVParams,
    PhasePolicy, SignalMode, SignalParams,
};
use crate::noise::{calibrate_drive_fluct, stream, stream_rng, OUParams};
use crate::quantum::{DensityMatrix, Level, StateVector};
use crate::stats::Moments;

/// Runs per work unit.
pub const CHUNK: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InitialState {
    /// `(|d_g> + |0_g>)/sqrt 2`.
    DarkZero,
    /// `|0_g>`.
    Zero,
}

/// Relative Rabi-amplitude fluctuations, independent on the two lasers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DriveNoise {
    pub delta_rel: f64,
    pub tau: f64,
}

/// A fully specified single-trajectory problem.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub nv: NVParams,
    pub drive: DriveConfig,
    /// Drive whose dark state defines the coherence; equals `drive` when the
    /// lasers are on.
    pub reference_drive: DriveConfig,
    pub model: EngineModel,
    pub signal: Option<SignalParams>,
    pub signal_mode: SignalMode,
    pub dephasing: Option<OUParams>,
    pub drive_noise: Option<DriveNoise>,
    pub initial: InitialState,
    pub t_end: f64,
    pub record_interval: f64,
    pub steps_per_period: f64,
}

/// Steps per fastest period used for production ensembles.
pub const PRODUCTION_STEPS_PER_PERIOD: f64 = 40.0;

impl Scenario {
    /// Matched drive of effective Rabi frequency `omega` (zero turns the
    /// lasers off while keeping the dark state of a unit drive as reference).
    pub fn matched(nv: NVParams, omega: f64, phi_l: f64, model: EngineModel) -> Result<Self> {
        let reference_drive = matched_drive(&nv, if omega > 0.0 { omega } else { 1.0 }, phi_l)?;
        let drive = if omega > 0.0 {
            reference_drive
        } else {
            reference_drive.scaled(0.0)
        };
        Ok(Self {
            nv,
            drive,
            reference_drive,
            model,
            signal: None,
            signal_mode: SignalMode::ZeroField,
            dephasing: None,
            drive_noise: None,
            initial: InitialState::DarkZero,
            t_end: 50.0,
            record_interval: 1.0,
            steps_per_period: PRODUCTION_STEPS_PER_PERIOD,
        })
    }

    pub fn dark(&self) -> Result<StateVector> {
        dark_state(&self.nv, &self.reference_drive)
    }

    pub fn relative_phase(&self) -> f64 {
        relative_phase(&self.nv, &self.reference_drive)
    }

    pub fn initial_density(&self) -> Result<DensityMatrix> {
        Ok(match self.initial {
            InitialState::DarkZero => DensityMatrix::pure(&dark_zero_superposition(&self.dark()?)),
            InitialState::Zero => DensityMatrix::basis(Level::Zero),
        })
    }

    pub fn program(&self) -> Result<HamiltonianProgram> {
        build_program(&ProgramSpec {
            nv: &self.nv,
            drive: &self.drive,
            model: self.model,
            signal: self.signal.as_ref().map(|s| (s, self.signal_mode)),
        })
    }

    pub fn noise_params(&self) -> Result<[Option<OUParams>; noise_index::COUNT]> {
        let mut out = [self.dephasing, None, None];
        if let Some(dn) = self.drive_noise {
            if dn.delta_rel > 0.0 {
                out[noise_index::DRIVE_PLUS] =
                    Some(calibrate_drive_fluct(dn.delta_rel, dn.tau, self.drive.omega_plus)?);
                out[noise_index::DRIVE_MINUS] =
                    Some(calibrate_drive_fluct(dn.delta_rel, dn.tau, self.drive.omega_minus)?);
            }
        }
        Ok(out)
    }

    pub fn observables(&self) -> Result<Vec<Observable>> {
        Ok(vec![
            Observable::Element(self.dark()?, Level::Zero.ket()),
            Observable::Population(Level::Zero),
            Observable::Population(Level::A2),
            Observable::Population(Level::Singlet),
        ])
    }

    pub fn validate(&self) -> Result<()> {
        self.nv.validate()?;
        self.drive.validate()?;
        if !(self.t_end > 0.0) {
            return Err(Error::invalid("t_end", "must be positive"));
        }
        if !(self.record_interval > 0.0) {
            return Err(Error::invalid("record_interval", "must be positive"));
        }
        if let Some(s) = &self.signal {
            s.validate()?;
        }
        Ok(())
    }
}

pub const CHANNEL_NAMES: [&str; 4] = ["rho_d0", "P_0g", "P_A2", "P_s"];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Randomization {
    pub dephasing: bool,
    pub drive: bool,
    pub signal_phase: bool,
}

impl Default for Randomization {
    fn default() -> Self {
        Self {
            dephasing: true,
            drive: true,
            signal_phase: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnsembleConfig {
    pub n_runs: usize,
    pub master_seed: u64,
    #[serde(default)]
    pub randomize: Randomization,
}

impl EnsembleConfig {
    pub fn new(n_runs: usize, master_seed: u64) -> Self {
        Self {
            n_runs,
            master_seed,
            randomize: Randomization::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChannelStats {
    pub name: String,
    pub mean: Vec<Complex64>,
    pub stderr_re: Vec<f64>,
    pub stderr_im: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnsembleResult {
    pub times: Vec<f64>,
    pub channels: Vec<ChannelStats>,
    pub n_runs: usize,
    pub master_seed: u64,
    pub initial: InitialState,
    pub dt: f64,
    pub steps_per_run: usize,
}

impl EnsembleResult {
    pub fn channel(&self, name: &str) -> Option<&ChannelStats> {
        self.channels.iter().find(|c| c.name == name)
    }

    /// Index of the recorded time closest to `t`.
    pub fn index_of(&self, t: f64) -> usize {
        let mut best = 0;
        for (i, &s) in self.times.iter().enumerate() {
            if (s - t).abs() < (self.times[best] - t).abs() {
                best = i;
            }
        }
        best
    }
}

/// Integration settings shared by all runs of a scenario.
pub fn integrator_for(scenario: &Scenario) -> Result<(HamiltonianProgram, IntegratorConfig)> {
    let program = scenario.program()?;
    let params = scenario.noise_params()?;
    let bank = NoiseBank::for_run(params, 0, 0);
    let cfg = IntegratorConfig::with_resolution(
        program.max_frequency(&bank.scale()),
        scenario.record_interval,
        scenario.steps_per_period,
    )?;
    Ok((program, cfg))
}

struct Prepared {
    program: HamiltonianProgram,
    cfg: IntegratorConfig,
    rho0: DensityMatrix,
    observables: Vec<Observable>,
    noise: [Option<OUParams>; noise_index::COUNT],
}

fn run_phase(scenario: &Scenario, cfg: &EnsembleConfig, run: usize) -> f64 {
    match &scenario.signal {
        Some(s) if s.phase_policy == PhasePolicy::RandomPerRun && cfg.randomize.signal_phase => {
            let mut rng = stream_rng(cfg.master_seed, run, stream::SIGNAL_PHASE);
            TAU * rng.random::<f64>()
        }
        Some(s) => s.phase,
        None => 0.0,
    }
}

fn run_one(
    p: &Prepared,
    scenario: &Scenario,
    cfg: &EnsembleConfig,
    run: usize,
) -> Result<crate::engine::Trajectory> {
    let mut noise = p.noise;
    if !cfg.randomize.dephasing {
        noise[noise_index::DEPHASING] = None;
    }
    if !cfg.randomize.drive {
        noise[noise_index::DRIVE_PLUS] = None;
        noise[noise_index::DRIVE_MINUS] = None;
    }
    let mut bank = NoiseBank::for_run(noise, cfg.master_seed, run);
    evolve(
        &p.rho0,
        &p.program,
        &mut bank,
        run_phase(scenario, cfg, run),
        &p.cfg,
        scenario.t_end,
        &p.observables,
    )
    .map_err(|e| Error::Run {
        run,
        source: Box::new(e),
    })
}

#[derive(Clone)]
struct Accumulator {
    re: Vec<Vec<Moments>>,
    im: Vec<Vec<Moments>>,
}

impl Accumulator {
    fn new(channels: usize, points: usize) -> Self {
        Self {
            re: vec![vec![Moments::default(); points]; channels],
            im: vec![vec![Moments::default(); points]; channels],
        }
    }

    fn push(&mut self, traj: &crate::engine::Trajectory) {
        for (c, series) in traj.channels.iter().enumerate() {
            for (k, z) in series.iter().enumerate() {
                self.re[c][k].push(z.re);
                self.im[c][k].push(z.im);
            }
        }
    }

    fn merge(&mut self, other: &Accumulator) {
        for (a, b) in self.re.iter_mut().zip(&other.re) {
            a.iter_mut().zip(b).for_each(|(x, y)| x.merge(y));
        }
        for (a, b) in self.im.iter_mut().zip(&other.im) {
            a.iter_mut().zip(b).for_each(|(x, y)| x.merge(y));
        }
    }
}

/// `(0..n).map(f)` in order, on the worker pool when available.
#[cfg(feature = "parallel")]
pub(crate) fn par_map<T: Send>(n: usize, f: impl Fn(usize) -> T + Sync + Send) -> Vec<T> {
    use rayon::prelude::*;
    (0..n).into_par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
pub(crate) fn par_map<T: Send>(n: usize, f: impl Fn(usize) -> T + Sync + Send) -> Vec<T> {
    (0..n).map(f).collect()
}

/// Mean and standard error of every recorded channel over `cfg.n_runs`
/// realizations.
pub fn run_ensemble(cfg: &EnsembleConfig, scenario: &Scenario) -> Result<EnsembleResult> {
    if cfg.n_runs == 0 {
        return Err(Error::invalid("n_runs", "must be at least 1"));
    }
    scenario.validate()?;
    let (program, icfg) = integrator_for(scenario)?;
    let prepared = Prepared {
        program,
        cfg: icfg,
        rho0: scenario.initial_density()?,
        observables: scenario.observables()?,
        noise: scenario.noise_params()?,
    };
    let points = (scenario.t_end / icfg.record_interval()).round() as usize + 1;
    let n_channels = prepared.observables.len();
    let n_chunks = cfg.n_runs.div_ceil(CHUNK);

    let chunk_results = par_map(n_chunks, |chunk| -> Result<(Accumulator, Vec<f64>, usize)> {
        let mut acc = Accumulator::new(n_channels, points);
        let mut times = Vec::new();
        let mut steps = 0;
        let end = ((chunk + 1) * CHUNK).min(cfg.n_runs);
        for run in chunk * CHUNK..end {
            let traj = run_one(&prepared, scenario, cfg, run)?;
            acc.push(&traj);
            times = traj.times;
            steps = traj.steps;
        }
        Ok((acc, times, steps))
    });

    let mut total = Accumulator::new(n_channels, points);
    let mut times = Vec::new();
    let mut steps = 0;
    for r in chunk_results {
        let (acc, t, s) = r?;
        total.merge(&acc);
        times = t;
        steps = s;
    }
    let channels = CHANNEL_NAMES
        .iter()
        .enumerate()
        .map(|(c, name)| ChannelStats {
            name: name.to_string(),
            mean: total.re[c]
                .iter()
                .zip(&total.im[c])
                .map(|(r, i)| Complex64::new(r.mean(), i.mean()))
                .collect(),
            stderr_re: total.re[c].iter().map(Moments::stderr).collect(),
            stderr_im: total.im[c].iter().map(Moments::stderr).collect(),
        })
        .collect();
    Ok(EnsembleResult {
        times,
        channels,
        n_runs: cfg.n_runs,
        master_seed: cfg.master_seed,
        initial: scenario.initial,
        dt: icfg.dt,
        steps_per_run: steps,
    })
}

/// `L(t) = 2 mean(<d|rho|0>)` with the standard error of `|L|`.
pub fn coherence_l(result: &EnsembleResult) -> Result<(Vec<Complex64>, Vec<f64>)> {
    if result.initial != InitialState::DarkZero {
        return Err(Error::WrongInitialState(
            "coherence needs the (|d> + |0>)/sqrt 2 preparation".into(),
        ));
    }
    let ch = result
        .channel("rho_d0")
        .ok_or_else(|| Error::WrongInitialState("missing coherence channel".into()))?;
    let l: Vec<Complex64> = ch.mean.iter().map(|z| z * 2.0).collect();
    let se = l
        .iter()
        .zip(ch.stderr_re.iter().zip(&ch.stderr_im))
        .map(|(z, (sr, si))| {
            let a = z.norm();
            if a == 0.0 {
                2.0 * sr.hypot(*si) * FRAC_1_SQRT_2
            } else {
                2.0 * ((z.re * sr).powi(2) + (z.im * si).powi(2)).sqrt() / a
            }
        })
        .collect();
    Ok((l, se))
}

/// `|L(t)|` and its standard error.
pub fn coherence_abs(result: &EnsembleResult) -> Result<(Vec<f64>, Vec<f64>)> {
    let (l, se) = coherence_l(result)?;
    Ok((l.iter().map(|z| z.norm()).collect(), se))
}

/// `P(t) = mean(rho_00)` with its standard error.
pub fn population_p0(result: &EnsembleResult) -> (Vec<f64>, Vec<f64>) {
    let ch = result.channel("P_0g").expect("population channel is always recorded");
    (ch.mean.iter().map(|z| z.re).collect(), ch.stderr_re.clone())
}
