//! Fixed-step RK4 integration of the Lindblad master equation with a
//! stochastic, time-dependent Hamiltonian.
//!
//! Jump operators are rank one, `L = |f><w|`, where the source vector `w` may
//! depend on the noise sample of the current step. The right-hand side is
//! evaluated as
//!
//! ```text
//! K = H - (i/2) sum_k g_k |f_k|^2 |w_k><w_k|
//! d rho/dt = -i (K rho - (K rho)^dag) + sum_k g_k <w_k|rho|w_k> |f_k><f_k|
//! ```
//!
//! which equals the usual Lindblad form for Hermitian `rho`.

use std::f64::consts::TAU;
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::{self, CMat, KJump, Pattern, SparseKet, SparseOp};
use crate::model::{
    a1_coupling_vectors, build_dephasing_operator, coupling_patterns,
    effective_rabi, lindblad_channels, signal_vector, Channel, DriveConfig, NVParams, SignalMode,
    SignalParams,
};
use crate::noise::{ou_burn_in, stream_rng, OUParams, OUState};
use crate::quantum::{
    inner, outer, projector, row_sum_norm, DensityMatrix, Level, Operator, StateVector, DIM, I,
    ONE, ZERO,
};

/// Scalar coefficient as a function of `(t, noise, run_phase)`.
pub type Evaluator = Arc<dyn Fn(f64, &[f64], f64) -> Complex64 + Send + Sync>;

/// Noise channel indices seen by evaluators.
pub mod noise_index {
    pub const DEPHASING: usize = 0;
    pub const DRIVE_PLUS: usize = 1;
    pub const DRIVE_MINUS: usize = 2;
    pub const COUNT: usize = 3;
}

pub fn constant(value: Complex64) -> Evaluator {
    Arc::new(move |_, _, _| value)
}

#[derive(Clone)]
pub struct ModulatedTerm {
    pub operator: Operator,
    operator_adjoint: Operator,
    pub evaluator: Evaluator,
    /// Adds `conj(coefficient) * operator^dag` as well.
    pub hermitian_pair: bool,
    /// Evaluated at every RK4 stage rather than once per step.
    pub time_dependent: bool,
}

impl ModulatedTerm {
    /// Hermitian `operator` with a real coefficient.
    pub fn real(operator: Operator, evaluator: Evaluator) -> Self {
        Self {
            operator_adjoint: operator.adjoint(),
            operator,
            evaluator,
            hermitian_pair: false,
            time_dependent: false,
        }
    }

    /// `c(t) A + conj(c(t)) A^dag` for arbitrary `A`.
    pub fn paired(operator: Operator, evaluator: Evaluator, time_dependent: bool) -> Self {
        Self {
            operator_adjoint: operator.adjoint(),
            operator,
            evaluator,
            hermitian_pair: true,
            time_dependent,
        }
    }

    fn add_to(&self, h: &mut Operator, t: f64, noise: &[f64], phase: f64) {
        let c = (self.evaluator)(t, noise, phase);
        if c == ZERO {
            return;
        }
        if self.hermitian_pair {
            *h += self.operator * c + self.operator_adjoint * c.conj();
        } else {
            *h += self.operator * Complex64::from(c.re);
        }
    }
}

/// Jumps `sqrt(rate_k) |f_k><w|` sharing the source
/// `w = sum_m e_m(t, noise) s_m`.
#[derive(Clone)]
pub struct JumpChannel {
    pub sources: Vec<(StateVector, Evaluator)>,
    /// `(f_k, rate_k)`.
    pub targets: Vec<(StateVector, f64)>,
    pub label: String,
    /// Sources do not depend on time or noise.
    pub constant: bool,
}

impl JumpChannel {
    pub fn fixed(from: Level, to: Level, rate: f64) -> Self {
        Self {
            sources: vec![(from.ket(), constant(ONE))],
            targets: vec![(to.ket(), rate)],
            label: format!("{from}->{to}"),
            constant: true,
        }
    }

    /// All decays out of each level, one channel per source level.
    pub fn from_channels<'a>(channels: impl IntoIterator<Item = &'a Channel>) -> Vec<Self> {
        let mut out: Vec<(Level, Self)> = Vec::new();
        for c in channels {
            match out.iter_mut().find(|(l, _)| *l == c.from) {
                Some((_, j)) => {
                    j.targets.push((c.to.ket(), c.rate));
                    j.label.push_str(&format!(",{}", c.to));
                }
                None => out.push((c.from, Self::fixed(c.from, c.to, c.rate))),
            }
        }
        out.into_iter().map(|(_, j)| j).collect()
    }

    pub fn source(&self, t: f64, noise: &[f64], phase: f64) -> StateVector {
        let mut w = StateVector::zeros();
        for (s, e) in &self.sources {
            w += s * (e)(t, noise, phase);
        }
        w
    }

    /// `sum_k rate_k |f_k|^2`.
    pub fn total_rate(&self) -> f64 {
        self.targets.iter().map(|(f, r)| r * f.norm_squared()).sum()
    }

    /// Operators `|f_k><w|` with their rates for the given noise sample.
    pub fn operators(&self, t: f64, noise: &[f64], phase: f64) -> Vec<(Operator, f64)> {
        let w = self.source(t, noise, phase);
        self.targets.iter().map(|(f, r)| (outer(f, &w), *r)).collect()
    }
}

#[derive(Clone, Default)]
pub struct HamiltonianProgram {
    pub static_part: Operator,
    pub terms: Vec<ModulatedTerm>,
    pub jumps: Vec<JumpChannel>,
    /// Extra frequencies (rad/us) to respect in the step bound, such as a
    /// signal detuning that never shows up as a matrix element.
    pub frequency_hints: Vec<f64>,
}

impl HamiltonianProgram {
    /// Total Hamiltonian at `(t, noise, phase)`.
    pub fn hamiltonian(&self, t: f64, noise: &[f64], phase: f64) -> Operator {
        let mut h = self.static_part;
        for term in &self.terms {
            term.add_to(&mut h, t, noise, phase);
        }
        h
    }

    /// Largest angular frequency in the program for noise of typical size
    /// `noise_scale` per channel.
    pub fn max_frequency(&self, noise_scale: &[f64]) -> f64 {
        let h = self.hamiltonian(0.0, noise_scale, 0.0);
        let mut w = row_sum_norm(&h);
        for &f in &self.frequency_hints {
            w = w.max(f.abs());
        }
        for jump in &self.jumps {
            let src = jump.source(0.0, noise_scale, 0.0);
            // an unpopulated, undriven level cannot limit the step
            if (h * src).norm() > 0.0 {
                w = w.max(jump.total_rate() * src.norm_squared());
            }
        }
        w
    }
}

/// Generic Lindblad right-hand side for explicit jump operators.
pub fn rhs(rho: &Operator, h: &Operator, channels: &[(Operator, f64)]) -> Operator {
    let mut out = (h * rho - rho * h) * (-I);
    for (l, rate) in channels {
        let ld = l.adjoint();
        let ldl = ld * l;
        out += (l * rho * ld - (ldl * rho + rho * ldl) * Complex64::from(0.5))
            * Complex64::from(*rate);
    }
    out
}

/// Explicit channels of a program for a given noise sample.
pub fn explicit_channels(
    program: &HamiltonianProgram,
    t: f64,
    noise: &[f64],
    phase: f64,
) -> Vec<(Operator, f64)> {
    program
        .jumps
        .iter()
        .flat_map(|j| j.operators(t, noise, phase))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntegratorConfig {
    /// Step (us).
    pub dt: f64,
    /// Steps between recorded samples.
    pub record_stride: usize,
    /// Allowed drift of the trace from its initial value.
    pub trace_tol: f64,
    /// Most negative eigenvalue accepted at the end of a run. RK4 truncation
    /// error shows up here first.
    #[serde(default = "default_positivity_tol")]
    pub positivity_tol: f64,
}

pub const DEFAULT_POSITIVITY_TOL: f64 = 1e-3;

fn default_positivity_tol() -> f64 {
    DEFAULT_POSITIVITY_TOL
}

/// Fraction of the shortest period allowed per step.
pub const STEPS_PER_PERIOD: f64 = 20.0;

pub fn step_bound(max_frequency: f64) -> f64 {
    if max_frequency <= 0.0 {
        f64::INFINITY
    } else {
        TAU / (STEPS_PER_PERIOD * max_frequency)
    }
}

impl IntegratorConfig {
    /// Largest step obeying the bound that divides `record_interval` evenly.
    pub fn auto(max_frequency: f64, record_interval: f64) -> Result<Self> {
        Self::with_resolution(max_frequency, record_interval, STEPS_PER_PERIOD)
    }

    /// As [`IntegratorConfig::auto`] with at least `steps_per_period` steps
    /// per period of the fastest frequency (never fewer than the bound).
    pub fn with_resolution(
        max_frequency: f64,
        record_interval: f64,
        steps_per_period: f64,
    ) -> Result<Self> {
        if !(record_interval > 0.0) {
            return Err(Error::invalid("record_interval", "must be positive"));
        }
        let bound = step_bound(max_frequency) * STEPS_PER_PERIOD / steps_per_period.max(STEPS_PER_PERIOD);
        let n = (record_interval / bound).ceil().max(1.0) as usize;
        Ok(Self {
            dt: record_interval / n as f64,
            record_stride: n,
            trace_tol: 1e-8,
            positivity_tol: DEFAULT_POSITIVITY_TOL,
        })
    }

    pub fn record_interval(&self) -> f64 {
        self.dt * self.record_stride as f64
    }

    pub fn validate(&self, max_frequency: f64) -> Result<()> {
        if !(self.dt > 0.0) || self.record_stride == 0 {
            return Err(Error::invalid("dt/record_stride", "must be positive"));
        }
        let bound = step_bound(max_frequency);
        if self.dt > bound * (1.0 + 1e-12) {
            return Err(Error::StepTooLarge {
                dt: self.dt,
                bound,
                max_rate: max_frequency,
            });
        }
        Ok(())
    }
}

/// Piecewise-constant noise values, one Ornstein-Uhlenbeck process per
/// channel or silent.
#[derive(Debug, Clone)]
pub struct NoiseBank {
    values: [f64; noise_index::COUNT],
    processes: [Option<(OUParams, OUState)>; noise_index::COUNT],
}

impl NoiseBank {
    pub fn silent() -> Self {
        Self {
            values: [0.0; noise_index::COUNT],
            processes: [None, None, None],
        }
    }

    /// Burned-in processes for `run`, each on its own stream.
    pub fn for_run(
        params: [Option<OUParams>; noise_index::COUNT],
        master_seed: u64,
        run: usize,
    ) -> Self {
        let streams = [
            crate::noise::stream::DEPHASING,
            crate::noise::stream::DRIVE_PLUS,
            crate::noise::stream::DRIVE_MINUS,
        ];
        let mut bank = Self::silent();
        for (i, p) in params.into_iter().enumerate() {
            if let Some(p) = p {
                if p.c > 0.0 {
                    let state = ou_burn_in(&p, stream_rng(master_seed, run, streams[i]));
                    bank.values[i] = state.value;
                    bank.processes[i] = Some((p, state));
                }
            }
        }
        bank
    }

    /// Values held during the current step.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn advance(&mut self, dt: f64) {
        for (v, p) in self.values.iter_mut().zip(self.processes.iter_mut()) {
            if let Some((params, state)) = p {
                *v = state.step(dt, params);
            }
        }
    }

    /// Four stationary standard deviations per channel, for step bounds.
    pub fn scale(&self) -> [f64; noise_index::COUNT] {
        let mut out = [0.0; noise_index::COUNT];
        for (o, p) in out.iter_mut().zip(&self.processes) {
            if let Some((params, _)) = p {
                *o = 4.0 * params.stationary_std();
            }
        }
        out
    }
}

/// Quantity recorded along a trajectory.
#[derive(Debug, Clone, PartialEq)]
#[allow(clippy::large_enum_variant)]
pub enum Observable {
    Population(Level),
    /// `<a| rho |b>`.
    Element(StateVector, StateVector),
    /// `tr(rho A)`.
    Expectation(Operator),
}

impl Observable {
    pub fn evaluate(&self, rho: &Operator) -> Complex64 {
        match self {
            Observable::Population(l) => rho[(l.index(), l.index())],
            Observable::Element(a, b) => inner(a, &(rho * b)),
            Observable::Expectation(a) => (rho * a).trace(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub times: Vec<f64>,
    /// One series per observable, in request order.
    pub channels: Vec<Vec<Complex64>>,
    pub final_state: DensityMatrix,
    pub steps: usize,
}

/// Program lowered to kernel form for one integration.
struct Lowered<'a> {
    /// Static Hamiltonian plus the anti-Hermitian part of constant jumps.
    k_static: CMat,
    pattern: Pattern,
    step_terms: Vec<(&'a ModulatedTerm, SparseOp)>,
    stage_terms: Vec<(&'a ModulatedTerm, SparseOp)>,
    /// Constant jumps followed by one slot per varying channel.
    jumps: Vec<KJump>,
    varying: Vec<(&'a JumpChannel, f64)>,
}

impl<'a> Lowered<'a> {
    fn new(program: &'a HamiltonianProgram) -> Self {
        let mut k = CMat::from_op(&program.static_part);
        let mut mask = [[false; DIM]; DIM];
        SparseOp::from_op(&program.static_part).mark(&mut mask);
        let targets = |j: &JumpChannel| -> Vec<(SparseKet, f64)> {
            j.targets
                .iter()
                .filter(|(_, r)| *r > 0.0)
                .map(|(f, r)| (SparseKet::from_vector(f), *r))
                .collect()
        };
        let mut jumps = Vec::new();
        let mut varying = Vec::new();
        for j in program.jumps.iter().filter(|j| j.total_rate() > 0.0) {
            // a source's support does not depend on its coefficients
            let mut support = StateVector::zeros();
            for (s, _) in &j.sources {
                for i in 0..DIM {
                    if s[i] != ZERO {
                        support[i] = ONE;
                    }
                }
            }
            SparseKet::from_vector(&support).mark(&mut mask);
            if j.constant {
                let w = SparseKet::from_vector(&j.source(0.0, &[0.0; noise_index::COUNT], 0.0));
                w.add_projector(Complex64::new(0.0, -0.5 * j.total_rate()), &mut k);
                jumps.push(KJump::new(w, &targets(j)));
            } else {
                varying.push((j, j.total_rate()));
            }
        }
        let mut slots: Vec<KJump> = varying
            .iter()
            .map(|(j, _)| KJump::new(SparseKet::from_vector(&StateVector::zeros()), &targets(j)))
            .collect();
        jumps.append(&mut slots);
        let mut lower = |t: &'a ModulatedTerm| {
            let op = SparseOp::from_op(&t.operator);
            op.mark(&mut mask);
            if t.hermitian_pair {
                SparseOp::from_op(&t.operator_adjoint).mark(&mut mask);
            }
            (t, op)
        };
        let step_terms: Vec<_> = program
            .terms
            .iter()
            .filter(|t| !t.time_dependent)
            .map(&mut lower)
            .collect();
        let stage_terms: Vec<_> = program
            .terms
            .iter()
            .filter(|t| t.time_dependent)
            .map(&mut lower)
            .collect();
        Self {
            k_static: k,
            pattern: Pattern::from_mask(&mask),
            step_terms,
            stage_terms,
            jumps,
            varying,
        }
    }

    fn add_terms(terms: &[(&ModulatedTerm, SparseOp)], k: &mut CMat, t: f64, noise: &[f64], phase: f64) {
        for (term, op) in terms {
            let c = (term.evaluator)(t, noise, phase);
            if c == ZERO {
                continue;
            }
            if term.hermitian_pair {
                op.add_hermitian_pair(c, k);
            } else {
                op.add_scaled(Complex64::from(c.re), k);
            }
        }
    }

    /// Step generator; refreshes the sources of the varying jumps.
    fn step(&mut self, t: f64, noise: &[f64], phase: f64) -> CMat {
        let mut k = self.k_static;
        Self::add_terms(&self.step_terms, &mut k, t, noise, phase);
        let offset = self.jumps.len() - self.varying.len();
        for (slot, (j, total)) in self.jumps[offset..].iter_mut().zip(&self.varying) {
            let w = SparseKet::from_vector(&j.source(t, noise, phase));
            w.add_projector(Complex64::new(0.0, -0.5 * total), &mut k);
            slot.source = w;
        }
        k
    }

    fn stage(&self, base: &CMat, t: f64, noise: &[f64], phase: f64) -> CMat {
        let mut k = *base;
        Self::add_terms(&self.stage_terms, &mut k, t, noise, phase);
        k
    }

    fn rhs(&self, rho: &CMat, k: &CMat, out: &mut CMat) {
        kernel::rhs(rho, k, &self.pattern, &self.jumps, out);
    }
}

/// Right-hand side as evaluated by the integrator, for cross-checks.
pub fn integrator_rhs(
    rho: &Operator,
    program: &HamiltonianProgram,
    t: f64,
    noise: &[f64],
    phase: f64,
) -> Operator {
    let mut lowered = Lowered::new(program);
    let k = lowered.step(t, noise, phase);
    let k = lowered.stage(&k, t, noise, phase);
    let mut out = CMat::ZERO;
    lowered.rhs(&CMat::from_op(rho), &k, &mut out);
    out.to_op()
}

/// Integrates from `t = 0` to `t_end`, recording `observables` every
/// `cfg.record_stride` steps (and at `t = 0`).
///
/// `t_end` must be a whole number of record intervals.
pub fn evolve(
    rho0: &DensityMatrix,
    program: &HamiltonianProgram,
    noise: &mut NoiseBank,
    run_phase: f64,
    cfg: &IntegratorConfig,
    t_end: f64,
    observables: &[Observable],
) -> Result<Trajectory> {
    cfg.validate(program.max_frequency(&noise.scale()))?;
    let interval = cfg.record_interval();
    let n_records = (t_end / interval).round();
    if !(t_end >= 0.0) || (n_records * interval - t_end).abs() > 1e-9 * t_end.max(1.0) {
        return Err(Error::invalid(
            "t_end",
            format!("{t_end} is not a multiple of the record interval {interval}"),
        ));
    }
    let n_records = n_records as usize;
    let dt = cfg.dt;
    let rho = *rho0.as_operator();
    let trace0 = rho.trace().re;
    let mut times = Vec::with_capacity(n_records + 1);
    let mut channels: Vec<Vec<Complex64>> = observables
        .iter()
        .map(|_| Vec::with_capacity(n_records + 1))
        .collect();
    let record = |rho: &Operator, t: f64, times: &mut Vec<f64>, ch: &mut Vec<Vec<Complex64>>| {
        times.push(t);
        for (o, c) in observables.iter().zip(ch.iter_mut()) {
            c.push(o.evaluate(rho));
        }
    };
    record(&rho, 0.0, &mut times, &mut channels);

    let mut lowered = Lowered::new(program);
    let mut rho = CMat::from_op(&rho);
    let timed = !lowered.stage_terms.is_empty();
    let (mut ka, mut kb, mut kc, mut kd) = (CMat::ZERO, CMat::ZERO, CMat::ZERO, CMat::ZERO);
    let mut tmp = CMat::ZERO;
    let mut step = 0usize;
    for rec in 1..=n_records {
        for _ in 0..cfg.record_stride {
            let t = step as f64 * dt;
            let nv = noise.values();
            let base = lowered.step(t, nv, run_phase);
            let (k0, kh, k1) = if timed {
                (
                    lowered.stage(&base, t, nv, run_phase),
                    lowered.stage(&base, t + 0.5 * dt, nv, run_phase),
                    lowered.stage(&base, t + dt, nv, run_phase),
                )
            } else {
                (base, base, base)
            };
            lowered.rhs(&rho, &k0, &mut ka);
            rho.axpy_into(0.5 * dt, &ka, &mut tmp);
            lowered.rhs(&tmp, &kh, &mut kb);
            rho.axpy_into(0.5 * dt, &kb, &mut tmp);
            lowered.rhs(&tmp, &kh, &mut kc);
            rho.axpy_into(dt, &kc, &mut tmp);
            lowered.rhs(&tmp, &k1, &mut kd);
            rho.axpy(dt / 6.0, &ka);
            rho.axpy(dt / 3.0, &kb);
            rho.axpy(dt / 3.0, &kc);
            rho.axpy(dt / 6.0, &kd);
            rho.symmetrize();
            noise.advance(dt);
            step += 1;
            let drift = (rho.trace_re() - trace0).abs();
            if !(drift <= cfg.trace_tol) {
                return Err(Error::IntegrationDrift {
                    t: step as f64 * dt,
                    dt,
                    detail: format!("trace drifted by {drift:e}"),
                });
            }
        }
        record(&rho.to_op(), rec as f64 * interval, &mut times, &mut channels);
    }
    let rho = rho.to_op();
    let final_state = DensityMatrix::from_operator(rho);
    let diag = final_state.diagnostics();
    let mut problems = diag.violations(cfg.trace_tol);
    problems.retain(|p| !p.starts_with("min eigenvalue"));
    if !(diag.min_eigenvalue >= -cfg.positivity_tol) {
        problems.push(format!("min eigenvalue {:e}", diag.min_eigenvalue));
    }
    if !problems.is_empty() {
        return Err(Error::IntegrationDrift {
            t: t_end,
            dt,
            detail: problems.join("; "),
        });
    }
    Ok(Trajectory {
        times,
        channels,
        final_state,
        steps: step,
    })
}

/// Treatment of the far-detuned `|A1>` level.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EngineModel {
    /// All six levels; the step must resolve `delta`.
    Full,
    /// `|A1>` couplings dropped.
    Lambda,
    /// `|A1>` adiabatically eliminated: keeps its light shift and the optical
    /// pumping it causes, at the cost of the Lambda system.
    #[default]
    LambdaEliminated,
}

/// Everything needed to assemble a program.
#[derive(Debug, Clone, Copy)]
pub struct ProgramSpec<'a> {
    pub nv: &'a NVParams,
    pub drive: &'a DriveConfig,
    pub model: EngineModel,
    pub signal: Option<(&'a SignalParams, SignalMode)>,
}

fn drive_eval(nominal: f64, channel: usize) -> Evaluator {
    Arc::new(move |_, n: &[f64], _| Complex64::from(nominal + n[channel]))
}

/// Ratio above which dropping `|A1>` is questionable.
pub const LAMBDA_VALIDITY: f64 = 0.05;

pub fn build_program(spec: &ProgramSpec) -> Result<HamiltonianProgram> {
    let ProgramSpec {
        nv,
        drive,
        model,
        signal,
    } = *spec;
    nv.validate()?;
    drive.validate()?;
    let omega = effective_rabi(nv, drive);
    if model != EngineModel::Full && omega / nv.delta > LAMBDA_VALIDITY {
        log::warn!(
            "Omega/delta = {:.3} exceeds {LAMBDA_VALIDITY}; the reduced model may be inaccurate",
            omega / nv.delta
        );
    }
    let mut program = HamiltonianProgram::default();
    program.terms.push(ModulatedTerm::real(
        build_dephasing_operator(),
        Arc::new(|_, n: &[f64], _| Complex64::from(n[noise_index::DEPHASING])),
    ));

    let p = coupling_patterns(nv, drive);
    let (plus, minus) = match model {
        EngineModel::Full => (p.plus_a2 + p.plus_a1, p.minus_a2 + p.minus_a1),
        _ => (p.plus_a2, p.minus_a2),
    };
    program.terms.push(ModulatedTerm::real(
        plus,
        drive_eval(drive.omega_plus, noise_index::DRIVE_PLUS),
    ));
    program.terms.push(ModulatedTerm::real(
        minus,
        drive_eval(drive.omega_minus, noise_index::DRIVE_MINUS),
    ));

    let channels = lindblad_channels(nv);
    match model {
        EngineModel::Full => {
            program.static_part -= projector(Level::A1) * Complex64::from(nv.delta);
            program.jumps = JumpChannel::from_channels(&channels);
        }
        EngineModel::Lambda => {
            program.jumps =
                JumpChannel::from_channels(channels.iter().filter(|c| c.from != Level::A1));
        }
        EngineModel::LambdaEliminated => {
            add_eliminated_a1(&mut program, nv, drive, &channels);
        }
    }

    if let Some((sig, mode)) = signal {
        sig.validate()?;
        if sig.eta0 > 0.0 {
            let v = signal_vector(sig.theta_sig, mode);
            let op = outer(&v, &Level::Zero.ket());
            let eta = sig.eta0;
            let detuning = sig.omega_s - nv.frame_offset();
            program.terms.push(ModulatedTerm::paired(
                op,
                Arc::new(move |t, _, phase| {
                    crate::model::signal_envelope(eta, detuning, t, phase)
                }),
                detuning != 0.0,
            ));
            program.frequency_hints.push(detuning);
        }
    }
    Ok(program)
}

/// Second-order effect of `|A1>` on the ground states. With
/// `w = Omega_+ a_+ + Omega_- a_-` the amplitude for virtual excitation,
/// `|A1>` contributes `|w><w| delta / (delta^2 + G^2/4)` to the Hamiltonian and
/// jumps `|f><w|` at `rate_f / (delta^2 + G^2/4)`, `G` being its total decay.
fn add_eliminated_a1(
    program: &mut HamiltonianProgram,
    nv: &NVParams,
    drive: &DriveConfig,
    channels: &[Channel],
) {
    program.jumps = JumpChannel::from_channels(channels.iter().filter(|c| c.from != Level::A1));
    let gamma = nv.total_decay(Level::A1);
    let denom = nv.delta * nv.delta + 0.25 * gamma * gamma;
    let shift = nv.delta / denom;
    let (a_plus, a_minus) = a1_coupling_vectors(nv, drive);
    let (wp, wm) = (drive.omega_plus, drive.omega_minus);
    let amp = move |n: &[f64]| {
        (
            wp + n[noise_index::DRIVE_PLUS],
            wm + n[noise_index::DRIVE_MINUS],
        )
    };
    if wp > 0.0 {
        program.terms.push(ModulatedTerm::real(
            outer(&a_plus, &a_plus) * Complex64::from(shift),
            Arc::new(move |_, n: &[f64], _| Complex64::from(amp(n).0.powi(2))),
        ));
    }
    if wm > 0.0 {
        program.terms.push(ModulatedTerm::real(
            outer(&a_minus, &a_minus) * Complex64::from(shift),
            Arc::new(move |_, n: &[f64], _| Complex64::from(amp(n).1.powi(2))),
        ));
    }
    if wp > 0.0 && wm > 0.0 {
        program.terms.push(ModulatedTerm::paired(
            outer(&a_plus, &a_minus) * Complex64::from(shift),
            Arc::new(move |_, n: &[f64], _| {
                let (p, m) = amp(n);
                Complex64::from(p * m)
            }),
            false,
        ));
    }
    if wp == 0.0 && wm == 0.0 {
        return;
    }
    let src = |v: StateVector, channel: usize, nominal: f64| -> (StateVector, Evaluator) {
        (
            v,
            Arc::new(move |_, n: &[f64], _| Complex64::from(nominal + n[channel])),
        )
    };
    program.jumps.push(JumpChannel {
        sources: vec![
            src(a_plus, noise_index::DRIVE_PLUS, wp),
            src(a_minus, noise_index::DRIVE_MINUS, wm),
        ],
        targets: channels
            .iter()
            .filter(|c| c.from == Level::A1)
            .map(|c| (c.to.ket(), c.rate / denom))
            .collect(),
        label: "A1(virtual)".into(),
        constant: false,
    });
}

/// [`EngineModel::Lambda`] program, warning when `Omega/delta` is large.
pub fn reduced_lambda_program(
    nv: &NVParams,
    drive: &DriveConfig,
    signal: Option<(&SignalParams, SignalMode)>,
) -> Result<HamiltonianProgram> {
    build_program(&ProgramSpec {
        nv,
        drive,
        model: EngineModel::Lambda,
        signal,
    })
}

/// Noise-free static Hamiltonian of a program, without the signal.
pub fn nominal_hamiltonian(nv: &NVParams, drive: &DriveConfig, model: EngineModel) -> Result<Operator> {
    let program = build_program(&ProgramSpec {
        nv,
        drive,
        model,
        signal: None,
    })?;
    Ok(program.hamiltonian(0.0, &[0.0; noise_index::COUNT], 0.0))
}

/// Resonance frequency consistent with the dynamics of `model`.
pub fn model_resonance(nv: &NVParams, drive: &DriveConfig, model: EngineModel) -> Result<f64> {
    if effective_rabi(nv, drive) == 0.0 {
        return Ok(nv.frame_offset());
    }
    let h = nominal_hamiltonian(nv, drive, model)?;
    let d = crate::model::dark_state(nv, drive)?;
    crate::model::resonance_for_hamiltonian(nv, &h, &d)
}
