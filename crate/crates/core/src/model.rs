//! Hamiltonians, decay channels and derived states of the optically driven
//! six-level NV model.
//!
//! All frequencies are angular (rad/us) and all times are in us. Presets are
//! tabulated in the unit convention chosen by [`FrequencyConvention`]; the
//! conversion happens once in [`NVParams::from_preset`].
//!
//! The lasers couple `|+-1_g>` to the mixtures `c+* |A2> + c- |A1>` and
//! `c-* |A2> - c+ |A1>` with matrix elements `Omega_+-/2 e^{i phi_+-}`, so the
//! dressed states of the Lambda system sit at `+-Omega/2`.

use std::f64::consts::{FRAC_1_SQRT_2, PI, TAU};

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quantum::{
    hermitian_eigen, inner, is_normalized, matrix_element, normalized, outer, projector,
    transition, Level, Operator, StateVector, ZERO,
};

/// How frequency-valued inputs map onto Hamiltonian coefficients.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FrequencyConvention {
    /// Numbers are used directly as rad/us.
    #[default]
    Angular,
    /// Numbers are cycles/us (MHz) and are multiplied by 2 pi.
    Ordinary,
}

impl FrequencyConvention {
    pub fn scale(self) -> f64 {
        match self {
            FrequencyConvention::Angular => 1.0,
            FrequencyConvention::Ordinary => TAU,
        }
    }

    /// Input frequency to rad/us.
    pub fn to_internal(self, value: f64) -> f64 {
        value * self.scale()
    }

    /// rad/us back to the input convention.
    pub fn from_internal(self, value: f64) -> f64 {
        value / self.scale()
    }
}

/// Which decay rate a branch draws from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RateKind {
    ExcitedToGround,
    ExcitedToSinglet,
    SingletToGround,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Branch {
    pub from: Level,
    pub to: Level,
    pub kind: RateKind,
    pub fraction: f64,
}

/// Decay branching. The default splits radiative decay of each excited
/// state equally between `|+1_g>` and `|-1_g>`, sends intersystem crossing to
/// `|s>`, and returns the singlet to `|0_g>`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BranchingTable {
    pub branches: Vec<Branch>,
}

impl Default for BranchingTable {
    fn default() -> Self {
        use Level::*;
        use RateKind::*;
        let b = |from, to, kind, fraction| Branch {
            from,
            to,
            kind,
            fraction,
        };
        Self {
            branches: vec![
                b(A2, Plus, ExcitedToGround, 0.5),
                b(A2, Minus, ExcitedToGround, 0.5),
                b(A1, Plus, ExcitedToGround, 0.5),
                b(A1, Minus, ExcitedToGround, 0.5),
                b(A2, Singlet, ExcitedToSinglet, 1.0),
                b(A1, Singlet, ExcitedToSinglet, 1.0),
                b(Singlet, Zero, SingletToGround, 1.0),
            ],
        }
    }
}

/// Tabulated field configuration, in the units of a [`FrequencyConvention`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldPreset {
    pub name: String,
    /// A1-A2 gap.
    pub delta: f64,
    pub c_plus: f64,
    pub c_minus: f64,
    /// Ground energies `E_0g, E_-1g, E_+1g`; they only enter through the
    /// frame offset `eps_{0,-1} = E_0g - E_-1g`.
    pub ground_energies: [f64; 3],
}

impl FieldPreset {
    /// Zero bias field: `delta ~ 2 GHz`, `|c+| = |c-|`, degenerate `|+-1_g>`
    /// split from `|0_g>` by the 2.87 GHz zero-field splitting.
    pub fn zero_field() -> Self {
        Self {
            name: "zero-field".into(),
            delta: 2000.0,
            c_plus: FRAC_1_SQRT_2,
            c_minus: FRAC_1_SQRT_2,
            ground_energies: [0.0, -2870.0, -2870.0],
        }
    }

    /// Bias field of about 0.1 T along the NV axis.
    pub fn bias() -> Self {
        Self {
            name: "bias".into(),
            delta: 5710.0,
            c_plus: 0.984,
            c_minus: 0.178,
            ground_energies: [0.0, -70.0, -5670.0],
        }
    }

    pub fn by_name(name: &str) -> Option<Self> {
        match name {
            "zero-field" | "zero_field" | "zero" => Some(Self::zero_field()),
            "bias" => Some(Self::bias()),
            _ => None,
        }
    }

    pub fn frame_offset(&self) -> f64 {
        self.ground_energies[0] - self.ground_energies[1]
    }
}

/// Physical configuration in internal units (rad/us, 1/us).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NVParams {
    pub delta: f64,
    pub c_plus: Complex64,
    pub c_minus: Complex64,
    /// `E_0g, E_-1g, E_+1g`.
    pub ground_energies: [f64; 3],
    /// Excited state to ground triplet, total per excited state.
    pub gamma_ge: f64,
    /// Excited state to singlet.
    pub gamma_se: f64,
    /// Singlet to ground.
    pub gamma_gs: f64,
    #[serde(default)]
    pub branching: BranchingTable,
}

pub const GAMMA_GE: f64 = 17.0;
pub const GAMMA_SE: f64 = 37.0;
pub const GAMMA_GS: f64 = 2.7;

impl NVParams {
    /// Builds parameters from a preset. Frequencies are converted with
    /// `convention`; decay rates (1/us) are not.
    ///
    /// Mixing coefficients are rescaled to unit norm, keeping their ratio.
    pub fn from_preset(preset: &FieldPreset, convention: FrequencyConvention) -> Result<Self> {
        let norm = preset.c_plus.hypot(preset.c_minus);
        if norm == 0.0 {
            return Err(Error::invalid("c_plus/c_minus", "both zero"));
        }
        let p = Self {
            delta: convention.to_internal(preset.delta),
            c_plus: Complex64::new(preset.c_plus / norm, 0.0),
            c_minus: Complex64::new(preset.c_minus / norm, 0.0),
            ground_energies: preset.ground_energies.map(|e| convention.to_internal(e)),
            gamma_ge: GAMMA_GE,
            gamma_se: GAMMA_SE,
            gamma_gs: GAMMA_GS,
            branching: BranchingTable::default(),
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let norm = self.c_plus.norm_sqr() + self.c_minus.norm_sqr();
        if (norm - 1.0).abs() > 1e-12 {
            return Err(Error::invalid(
                "c_plus/c_minus",
                format!("|c+|^2 + |c-|^2 = {norm}, expected 1"),
            ));
        }
        if !(self.delta > 0.0) {
            return Err(Error::invalid("delta", "must be positive"));
        }
        for (name, v) in [
            ("gamma_ge", self.gamma_ge),
            ("gamma_se", self.gamma_se),
            ("gamma_gs", self.gamma_gs),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::invalid(name, "rate must be non-negative"));
            }
        }
        for b in &self.branching.branches {
            if !(b.fraction >= 0.0) {
                return Err(Error::invalid("branching.fraction", "must be non-negative"));
            }
        }
        Ok(())
    }

    /// Disables every decay channel.
    pub fn without_decay(mut self) -> Self {
        self.gamma_ge = 0.0;
        self.gamma_se = 0.0;
        self.gamma_gs = 0.0;
        self
    }

    /// `eps_{0,-1} = E_0g - E_-1g`.
    pub fn frame_offset(&self) -> f64 {
        self.ground_energies[0] - self.ground_energies[1]
    }

    fn rate(&self, kind: RateKind) -> f64 {
        match kind {
            RateKind::ExcitedToGround => self.gamma_ge,
            RateKind::ExcitedToSinglet => self.gamma_se,
            RateKind::SingletToGround => self.gamma_gs,
        }
    }

    /// Total decay rate out of `level`.
    pub fn total_decay(&self, level: Level) -> f64 {
        self.branching
            .branches
            .iter()
            .filter(|b| b.from == level)
            .map(|b| self.rate(b.kind) * b.fraction)
            .sum()
    }
}

/// Laser amplitudes (rad/us) and phases (rad).
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct DriveConfig {
    pub omega_plus: f64,
    pub omega_minus: f64,
    pub phi_plus: f64,
    pub phi_minus: f64,
}

impl DriveConfig {
    pub fn off() -> Self {
        Self::default()
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.omega_plus >= 0.0 && self.omega_minus >= 0.0) {
            return Err(Error::invalid("omega_plus/omega_minus", "must be non-negative"));
        }
        Ok(())
    }

    /// Same phases, amplitudes multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            omega_plus: self.omega_plus * factor,
            omega_minus: self.omega_minus * factor,
            ..*self
        }
    }

    pub fn is_off(&self) -> bool {
        self.omega_plus == 0.0 && self.omega_minus == 0.0
    }
}

/// `Omega = sqrt(Omega_+^2 |c+|^2 + Omega_-^2 |c-|^2)`.
pub fn effective_rabi(nv: &NVParams, drive: &DriveConfig) -> f64 {
    (drive.omega_plus.powi(2) * nv.c_plus.norm_sqr()
        + drive.omega_minus.powi(2) * nv.c_minus.norm_sqr())
    .sqrt()
}

/// Coupling pattern per unit `Omega_+` and `Omega_-`, split into the
/// `|A2>` and `|A1>` parts. Each operator is Hermitian.
#[derive(Debug, Clone, Copy)]
pub struct CouplingPatterns {
    pub plus_a2: Operator,
    pub plus_a1: Operator,
    pub minus_a2: Operator,
    pub minus_a1: Operator,
}

pub fn coupling_patterns(nv: &NVParams, drive: &DriveConfig) -> CouplingPatterns {
    let half = 0.5;
    let ep = Complex64::from_polar(half, drive.phi_plus);
    let em = Complex64::from_polar(half, drive.phi_minus);
    let herm = |amp: Complex64, to: Level, from: Level| {
        let m = transition(to, from) * amp;
        m + m.adjoint()
    };
    CouplingPatterns {
        plus_a2: herm(ep * nv.c_plus.conj(), Level::A2, Level::Plus),
        plus_a1: herm(ep * nv.c_minus, Level::A1, Level::Plus),
        minus_a2: herm(em * nv.c_minus.conj(), Level::A2, Level::Minus),
        minus_a1: herm(-em * nv.c_plus, Level::A1, Level::Minus),
    }
}

/// Rotating-frame laser Hamiltonian including the far-detuned `|A1>` and its
/// energy `-delta`.
pub fn build_laser_hamiltonian(nv: &NVParams, drive: &DriveConfig) -> Operator {
    let p = coupling_patterns(nv, drive);
    (p.plus_a2 + p.plus_a1) * Complex64::from(drive.omega_plus)
        + (p.minus_a2 + p.minus_a1) * Complex64::from(drive.omega_minus)
        - projector(Level::A1) * Complex64::from(nv.delta)
}

/// Laser Hamiltonian with every `|A1>` term dropped.
pub fn build_lambda_hamiltonian(nv: &NVParams, drive: &DriveConfig) -> Operator {
    let p = coupling_patterns(nv, drive);
    p.plus_a2 * Complex64::from(drive.omega_plus) + p.minus_a2 * Complex64::from(drive.omega_minus)
}

/// `S_z = |+1_g><+1_g| - |-1_g><-1_g|`.
pub fn build_dephasing_operator() -> Operator {
    projector(Level::Plus) - projector(Level::Minus)
}

fn require_drive(nv: &NVParams, drive: &DriveConfig) -> Result<f64> {
    drive.validate()?;
    let omega = effective_rabi(nv, drive);
    if omega <= 0.0 {
        return Err(Error::UndefinedState(
            "bright/dark states need a nonzero effective Rabi frequency".into(),
        ));
    }
    Ok(omega)
}

/// State coupled to `|A2>` by the lasers.
pub fn bright_state(nv: &NVParams, drive: &DriveConfig) -> Result<StateVector> {
    let omega = require_drive(nv, drive)?;
    let mut v = StateVector::zeros();
    v[Level::Plus.index()] =
        nv.c_plus * drive.omega_plus * Complex64::from_polar(1.0, -drive.phi_plus) / omega;
    v[Level::Minus.index()] =
        nv.c_minus * drive.omega_minus * Complex64::from_polar(1.0, -drive.phi_minus) / omega;
    normalized(v)
}

/// Ground-state superposition decoupled from `|A2>`, with the global phase
/// `arg(c+ c-)`.
pub fn dark_state(nv: &NVParams, drive: &DriveConfig) -> Result<StateVector> {
    let omega = require_drive(nv, drive)?;
    let phase = Complex64::from_polar(1.0, (nv.c_plus * nv.c_minus).arg());
    let mut v = StateVector::zeros();
    v[Level::Plus.index()] =
        phase * nv.c_minus.conj() * drive.omega_minus * Complex64::from_polar(1.0, -drive.phi_plus)
            / omega;
    v[Level::Minus.index()] =
        -phase * nv.c_plus.conj() * drive.omega_plus * Complex64::from_polar(1.0, -drive.phi_minus)
            / omega;
    normalized(v)
}

/// Relative laser phase `phi_L = arg(Omega_+ Omega_- c+* c-) + phi_+ - phi_-`.
pub fn relative_phase(nv: &NVParams, drive: &DriveConfig) -> f64 {
    let base = (nv.c_plus.conj() * nv.c_minus).arg();
    wrap_phase(base + drive.phi_plus - drive.phi_minus)
}

/// Bright-state phase `phi_b = arg(c+ Omega_+ e^{-i phi_+})`.
pub fn bright_phase(nv: &NVParams, drive: &DriveConfig) -> f64 {
    (nv.c_plus * Complex64::from_polar(drive.omega_plus, -drive.phi_plus)).arg()
}

fn wrap_phase(x: f64) -> f64 {
    let y = x.rem_euclid(TAU);
    if y > PI {
        y - TAU
    } else {
        y
    }
}

/// Drive satisfying `|c+ Omega_+| = |c- Omega_-|` with effective Rabi
/// frequency `omega_eff` and relative phase `phi_l`.
pub fn matched_drive(nv: &NVParams, omega_eff: f64, phi_l: f64) -> Result<DriveConfig> {
    let (cp, cm) = (nv.c_plus.norm(), nv.c_minus.norm());
    if cp == 0.0 || cm == 0.0 {
        return Err(Error::UnreachableMatching(
            "a vanishing mixing coefficient cannot be compensated".into(),
        ));
    }
    if !(omega_eff >= 0.0) {
        return Err(Error::invalid("omega_eff", "must be non-negative"));
    }
    let base = (nv.c_plus.conj() * nv.c_minus).arg();
    Ok(DriveConfig {
        omega_plus: omega_eff * FRAC_1_SQRT_2 / cp,
        omega_minus: omega_eff * FRAC_1_SQRT_2 / cm,
        phi_plus: wrap_phase(phi_l - base),
        phi_minus: 0.0,
    })
}

/// Residual diagonal noise coefficient with the `1/Omega` prefactor:
/// `(|c+ Omega_+|^2 - |c- Omega_-|^2) / Omega`.
pub fn kappa(nv: &NVParams, drive: &DriveConfig) -> Result<f64> {
    let omega = require_drive(nv, drive)?;
    Ok(imbalance(nv, drive) / omega)
}

/// Fraction of the dephasing operator left diagonal in the bright/dark
/// basis: `(|c+ Omega_+|^2 - |c- Omega_-|^2) / Omega^2`, bounded by 1.
pub fn kappa_fraction(nv: &NVParams, drive: &DriveConfig) -> Result<f64> {
    let omega = require_drive(nv, drive)?;
    Ok(imbalance(nv, drive) / (omega * omega))
}

fn imbalance(nv: &NVParams, drive: &DriveConfig) -> f64 {
    (nv.c_plus * drive.omega_plus).norm_sqr() - (nv.c_minus * drive.omega_minus).norm_sqr()
}

/// Decoherence time scale `T2* / kappa` of the unprotected noise fraction.
/// Returns infinity for a matched drive.
pub fn residual_t(nv: &NVParams, drive: &DriveConfig, t2_star: f64) -> Result<f64> {
    let k = kappa_fraction(nv, drive)?.abs();
    Ok(if k == 0.0 { f64::INFINITY } else { t2_star / k })
}

/// Levels the lasers can couple, i.e. everything except `|0_g>` and `|s>`.
const COUPLED: [Level; 4] = [Level::Minus, Level::Plus, Level::A1, Level::A2];

/// Dressed level closest to `reference` within the laser-coupled subspace of
/// `hamiltonian`. Returns the eigenvalue and the squared overlap.
pub fn dressed_level(hamiltonian: &Operator, reference: &StateVector) -> Result<(f64, f64)> {
    let n = COUPLED.len();
    let sub = DMatrix::from_fn(n, n, |i, j| {
        hamiltonian[(COUPLED[i].index(), COUPLED[j].index())]
    });
    let sub = (&sub + sub.adjoint()).scale(0.5);
    let eig = sub.symmetric_eigen();
    let mut best = (f64::NAN, -1.0);
    for k in 0..n {
        let col = eig.eigenvectors.column(k);
        let mut ov = ZERO;
        for (i, level) in COUPLED.iter().enumerate() {
            ov += reference[level.index()].conj() * col[i];
        }
        let w = ov.norm_sqr();
        if w > best.1 {
            best = (eig.eigenvalues[k], w);
        }
    }
    if best.1 <= 0.5 {
        return Err(Error::AmbiguousResonance(format!(
            "largest dark-state weight {:.3} in any dressed level",
            best.1
        )));
    }
    Ok(best)
}

/// `omega_Res = eps_{0,-1} + E_0g - E_d~`, with `E_d~` from diagonalizing the
/// full laser Hamiltonian. In the undressed limit this is `eps_{0,-1}`.
pub fn resonance_frequency(nv: &NVParams, drive: &DriveConfig) -> Result<f64> {
    if effective_rabi(nv, drive) == 0.0 {
        return Ok(nv.frame_offset());
    }
    let h = build_laser_hamiltonian(nv, drive);
    let d = dark_state(nv, drive)?;
    resonance_for_hamiltonian(nv, &h, &d)
}

/// Resonance frequency for an arbitrary static Hamiltonian in which `|0_g>`
/// is uncoupled.
pub fn resonance_for_hamiltonian(
    nv: &NVParams,
    hamiltonian: &Operator,
    dark: &StateVector,
) -> Result<f64> {
    let (e_dark, _) = dressed_level(hamiltonian, dark)?;
    let e_zero = hamiltonian[(Level::Zero.index(), Level::Zero.index())].re;
    Ok(nv.frame_offset() + e_zero - e_dark)
}

/// Which ground transitions a signal drives.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SignalMode {
    /// Degenerate `|+-1_g>`: both transitions kept.
    ZeroField,
    /// Large `|0_g>-|+1_g>` gap: only the `|-1_g>` transition kept.
    Bias,
}

impl SignalMode {
    pub fn for_preset(preset: &FieldPreset) -> Self {
        if preset.name == "bias" {
            SignalMode::Bias
        } else {
            SignalMode::ZeroField
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PhasePolicy {
    Fixed,
    #[default]
    RandomPerRun,
}

/// Single-frequency transverse signal `eta0 cos(omega_s t + phi_s)` along
/// in-plane direction `theta_sig`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SignalParams {
    pub eta0: f64,
    pub omega_s: f64,
    pub theta_sig: f64,
    pub phase_policy: PhasePolicy,
    /// Phase used with [`PhasePolicy::Fixed`].
    #[serde(default)]
    pub phase: f64,
}

impl SignalParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.eta0 >= 0.0) {
            return Err(Error::invalid("eta0", "must be non-negative"));
        }
        Ok(())
    }
}

/// `(S_x cos theta + S_y sin theta) |0_g>` restricted to the transitions of
/// `mode`.
pub fn signal_vector(theta: f64, mode: SignalMode) -> StateVector {
    let mut v = StateVector::zeros();
    v[Level::Minus.index()] = Complex64::from_polar(FRAC_1_SQRT_2, theta);
    if mode == SignalMode::ZeroField {
        v[Level::Plus.index()] = Complex64::from_polar(FRAC_1_SQRT_2, -theta);
    }
    v
}

/// Complex envelope `(eta0 / 2) e^{i[(omega_s - eps) t + phi_s]}` multiplying
/// `|v><0_g|` after the rotating-wave approximation.
pub fn signal_envelope(eta0: f64, detuning_from_frame: f64, t: f64, phase: f64) -> Complex64 {
    Complex64::from_polar(0.5 * eta0, detuning_from_frame * t + phase)
}

/// Rotating-frame RWA signal Hamiltonian at time `t`.
pub fn build_signal_hamiltonian(
    nv: &NVParams,
    sig: &SignalParams,
    mode: SignalMode,
    t: f64,
    run_phase: f64,
) -> Operator {
    let v = signal_vector(sig.theta_sig, mode);
    let env = signal_envelope(sig.eta0, sig.omega_s - nv.frame_offset(), t, run_phase);
    let m = outer(&v, &Level::Zero.ket()) * env;
    m + m.adjoint()
}

/// A decay channel `sqrt(rate) |to><from|`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Channel {
    pub from: Level,
    pub to: Level,
    pub rate: f64,
}

impl Channel {
    pub fn operator(&self) -> Operator {
        transition(self.to, self.from)
    }
}

/// Decay channels from the branching table; zero-rate channels are dropped.
pub fn lindblad_channels(nv: &NVParams) -> Vec<Channel> {
    nv.branching
        .branches
        .iter()
        .map(|b| Channel {
            from: b.from,
            to: b.to,
            rate: nv.rate(b.kind) * b.fraction,
        })
        .filter(|c| c.rate > 0.0)
        .collect()
}

/// `<A1| H |g>` couplings per unit amplitude, as kets
/// `a_+- = conj(<A1|H|+-1_g>) |+-1_g>` so that `<A1|H = sum Omega_+- <a_+-|`.
pub fn a1_coupling_vectors(nv: &NVParams, drive: &DriveConfig) -> (StateVector, StateVector) {
    let mut a_plus = StateVector::zeros();
    a_plus[Level::Plus.index()] =
        (Complex64::from_polar(0.5, drive.phi_plus) * nv.c_minus).conj();
    let mut a_minus = StateVector::zeros();
    a_minus[Level::Minus.index()] =
        (-Complex64::from_polar(0.5, drive.phi_minus) * nv.c_plus).conj();
    (a_plus, a_minus)
}

/// Second-order shift of the dark state from virtual `|A1>` population,
/// `|<A1|H|d>|^2 / delta`.
pub fn dark_stark_shift(nv: &NVParams, drive: &DriveConfig) -> Result<f64> {
    let d = dark_state(nv, drive)?;
    let h = build_laser_hamiltonian(nv, drive);
    let v = matrix_element(&Level::A1.ket(), &h, &d);
    Ok(v.norm_sqr() / nv.delta)
}

/// Initial state `(|d_g> + |0_g>)/sqrt 2`.
pub fn dark_zero_superposition(dark: &StateVector) -> StateVector {
    (dark + Level::Zero.ket()).scale(FRAC_1_SQRT_2)
}

/// Checks used by the structural invariant tests.
pub fn dark_state_leak(nv: &NVParams, drive: &DriveConfig) -> Result<f64> {
    let d = dark_state(nv, drive)?;
    let h = build_lambda_hamiltonian(nv, drive);
    Ok(matrix_element(&Level::A2.ket(), &h, &d).norm())
}

pub fn orthonormality_error(a: &StateVector, b: &StateVector) -> f64 {
    let mut err = inner(a, b).norm();
    if !is_normalized(a) {
        err = err.max((a.norm() - 1.0).abs());
    }
    if !is_normalized(b) {
        err = err.max((b.norm() - 1.0).abs());
    }
    err
}

/// Eigenvalues of an operator restricted to the given levels.
pub fn restricted_spectrum(op: &Operator, levels: &[Level]) -> Vec<f64> {
    let n = levels.len();
    let sub = DMatrix::from_fn(n, n, |i, j| op[(levels[i].index(), levels[j].index())]);
    let sub = (&sub + sub.adjoint()).scale(0.5);
    let mut vals: Vec<f64> = sub.symmetric_eigen().eigenvalues.iter().copied().collect();
    vals.sort_by(f64::total_cmp);
    vals
}

pub fn full_spectrum(op: &Operator) -> Vec<f64> {
    hermitian_eigen(op).0
}
