//! Ornstein-Uhlenbeck noise: exact updates, burn-in and calibration.
//!
//! A process with correlation time `tau` and diffusion coefficient `c` has
//! stationary correlation `(c tau / 2) exp(-|t - t'| / tau)`. The update
//!
//! ```text
//! x(t + dt) = x(t) e^{-dt/tau} + n sqrt((c tau / 2) (1 - e^{-2 dt/tau}))
//! ```
//!
//! with `n` a unit Gaussian is exact for any finite `dt`.
//!
//! Random streams are ChaCha12 generators keyed by a SplitMix64 expansion of
//! the master seed, with the 64-bit stream id set to `(run << 8) | stream`.
//! Gaussian draws use the ziggurat `StandardNormal` sampler of `rand_distr`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type NoiseRng = ChaCha12Rng;

/// Human-readable description of the random stream derivation, recorded in
/// run manifests.
pub const RNG_DESCRIPTION: &str = "ChaCha12 keyed by SplitMix64(master_seed) x4; \
stream id = (run_index << 8) | stream; unit Gaussians via rand_distr::StandardNormal (ziggurat)";

/// Stream ids within one run.
pub mod stream {
    pub const DEPHASING: u8 = 0;
    pub const DRIVE_PLUS: u8 = 1;
    pub const DRIVE_MINUS: u8 = 2;
    pub const SIGNAL_PHASE: u8 = 3;
}

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Independent generator for `(master_seed, run, stream)`.
///
/// The result depends only on its arguments, so ensembles are reproducible
/// under any scheduling of runs.
pub fn stream_rng(master_seed: u64, run: usize, stream: u8) -> NoiseRng {
    let mut sm = master_seed;
    let mut key = [0u8; 32];
    for chunk in key.chunks_exact_mut(8) {
        chunk.copy_from_slice(&splitmix64(&mut sm).to_le_bytes());
    }
    let mut rng = ChaCha12Rng::from_seed(key);
    rng.set_stream(((run as u64) << 8) | stream as u64);
    rng
}

pub fn unit_gaussian<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    rng.sample(StandardNormal)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OUParams {
    /// Correlation time (us).
    pub tau: f64,
    /// Diffusion coefficient (amplitude^2 / us).
    pub c: f64,
    /// Amplitude at the start of burn-in.
    #[serde(default)]
    pub initial_value: f64,
    /// Burn-in length in units of `tau`.
    #[serde(default = "default_burn_in")]
    pub burn_in: f64,
}

fn default_burn_in() -> f64 {
    10.0
}

impl OUParams {
    pub fn new(tau: f64, c: f64) -> Result<Self> {
        let p = Self {
            tau,
            c,
            initial_value: 0.0,
            burn_in: default_burn_in(),
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tau > 0.0 && self.tau.is_finite()) {
            return Err(Error::invalid("tau", "must be positive"));
        }
        if !(self.c >= 0.0 && self.c.is_finite()) {
            return Err(Error::invalid("c", "must be non-negative"));
        }
        if !(self.burn_in >= 0.0) {
            return Err(Error::invalid("burn_in", "must be non-negative"));
        }
        Ok(())
    }

    pub fn stationary_variance(&self) -> f64 {
        0.5 * self.c * self.tau
    }

    pub fn stationary_std(&self) -> f64 {
        self.stationary_variance().sqrt()
    }

    /// Stationary correlation `<x(t) x(t + lag)>`.
    pub fn correlation(&self, lag: f64) -> f64 {
        self.stationary_variance() * (-lag.abs() / self.tau).exp()
    }

    /// `S(w) = c tau^2 / (1 + w^2 tau^2)`, the Fourier transform of the
    /// stationary correlation.
    pub fn spectral_density(&self, omega: f64) -> f64 {
        ou_spectral_density(self, omega)
    }
}

/// Deterministic part of the exact update with an explicit Gaussian draw.
pub fn ou_update(value: f64, dt: f64, params: &OUParams, gaussian: f64) -> f64 {
    if dt == 0.0 {
        return value;
    }
    let decay = (-dt / params.tau).exp();
    let spread = (params.stationary_variance() * (1.0 - decay * decay)).sqrt();
    value * decay + gaussian * spread
}

/// One realization of an OU process together with its private generator.
#[derive(Debug, Clone)]
pub struct OUState {
    pub value: f64,
    rng: NoiseRng,
}

impl OUState {
    pub fn new(value: f64, rng: NoiseRng) -> Self {
        Self { value, rng }
    }

    /// Advances by `dt` with the exact update.
    pub fn step(&mut self, dt: f64, params: &OUParams) -> f64 {
        if dt > 0.0 {
            let n = unit_gaussian(&mut self.rng);
            self.value = ou_update(self.value, dt, params, n);
        }
        self.value
    }
}

/// Functional form of [`OUState::step`].
pub fn ou_step(mut state: OUState, dt: f64, params: &OUParams) -> OUState {
    state.step(dt, params);
    state
}

/// Starts at `initial_value` at `t0 = -burn_in * tau` and advances to `t = 0`.
///
/// The update is exact, so the burn-in is a single step.
pub fn ou_burn_in(params: &OUParams, rng: NoiseRng) -> OUState {
    let mut state = OUState::new(params.initial_value, rng);
    state.step(params.burn_in * params.tau, params);
    state
}

/// Diffusion coefficient giving free-induction decay `L(T2*) = e^{-1}` in the
/// quasi-static limit: `c = 4 / (T2*^2 tau)`.
pub fn calibrate_dephasing(t2_star: f64, tau: f64) -> Result<OUParams> {
    if !(t2_star > 0.0) {
        return Err(Error::invalid("t2_star", "must be positive"));
    }
    let c = if t2_star.is_infinite() {
        0.0
    } else {
        4.0 / (t2_star * t2_star * tau)
    };
    OUParams::new(tau, c)
}

/// Absolute drive-amplitude fluctuation process with stationary standard
/// deviation `delta_rel * omega_nominal`: `c = 2 (delta_rel omega)^2 / tau`.
pub fn calibrate_drive_fluct(delta_rel: f64, tau: f64, omega_nominal: f64) -> Result<OUParams> {
    if !(delta_rel >= 0.0) {
        return Err(Error::invalid("delta_rel", "must be non-negative"));
    }
    let sigma = delta_rel * omega_nominal.abs();
    OUParams::new(tau, 2.0 * sigma * sigma / tau)
}

pub fn ou_spectral_density(params: &OUParams, omega: f64) -> f64 {
    let wt = omega * params.tau;
    params.c * params.tau * params.tau / (1.0 + wt * wt)
}

/// Samples `n` values on a uniform grid of spacing `dt` after burn-in.
pub fn sample_path(params: &OUParams, rng: NoiseRng, dt: f64, n: usize) -> Vec<f64> {
    let mut state = ou_burn_in(params, rng);
    let mut out = Vec::with_capacity(n);
    out.push(state.value);
    for _ in 1..n {
        out.push(state.step(dt, params));
    }
    out
}
