//! Small dense complex linear algebra over the NV level basis.
//!
//! Everything lives in a fixed `DIM`-dimensional Hilbert space. Algorithms
//! below are written against `DIM` so the basis can grow without touching
//! them.

use std::fmt;

use nalgebra::{SMatrix, SVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Hilbert space dimension of the NV model.
pub const DIM: usize = 6;

pub type Operator = SMatrix<Complex64, DIM, DIM>;
pub type StateVector = SVector<Complex64, DIM>;

pub const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };
pub const ONE: Complex64 = Complex64 { re: 1.0, im: 0.0 };
pub const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

/// Hermiticity tolerance for a density matrix.
pub const HERMITIAN_TOL: f64 = 1e-10;
/// Most negative eigenvalue still accepted as rounding noise.
pub const POSITIVITY_TOL: f64 = 1e-8;
/// Default trace drift tolerance.
pub const TRACE_TOL: f64 = 1e-8;
/// Norm tolerance for states labelled normalized.
pub const NORM_TOL: f64 = 1e-12;

/// Levels of the six-level NV model, in basis order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Level {
    /// `|0_g>`
    Zero,
    /// `|-1_g>`
    Minus,
    /// `|+1_g>`
    Plus,
    /// `|A_1>`
    A1,
    /// `|A_2>`
    A2,
    /// singlet shelf `|s>`
    Singlet,
}

impl Level {
    pub const ALL: [Level; DIM] = [
        Level::Zero,
        Level::Minus,
        Level::Plus,
        Level::A1,
        Level::A2,
        Level::Singlet,
    ];

    pub const fn index(self) -> usize {
        match self {
            Level::Zero => 0,
            Level::Minus => 1,
            Level::Plus => 2,
            Level::A1 => 3,
            Level::A2 => 4,
            Level::Singlet => 5,
        }
    }

    pub fn from_index(index: usize) -> Option<Level> {
        Self::ALL.get(index).copied()
    }

    pub const fn label(self) -> &'static str {
        match self {
            Level::Zero => "0g",
            Level::Minus => "-1g",
            Level::Plus => "+1g",
            Level::A1 => "A1",
            Level::A2 => "A2",
            Level::Singlet => "s",
        }
    }

    pub fn from_label(label: &str) -> Option<Level> {
        Self::ALL.iter().copied().find(|l| l.label() == label)
    }

    /// Basis ket for this level.
    pub fn ket(self) -> StateVector {
        let mut v = StateVector::zeros();
        v[self.index()] = ONE;
        v
    }
}

impl fmt::Display for Level {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "|{}>", self.label())
    }
}

/// `|a><b|`
pub fn outer(a: &StateVector, b: &StateVector) -> Operator {
    a * b.adjoint()
}

/// `|a><b|` for basis levels.
pub fn transition(to: Level, from: Level) -> Operator {
    let mut m = Operator::zeros();
    m[(to.index(), from.index())] = ONE;
    m
}

pub fn projector(level: Level) -> Operator {
    transition(level, level)
}

pub fn adjoint(a: &Operator) -> Operator {
    a.adjoint()
}

pub fn commutator(a: &Operator, b: &Operator) -> Operator {
    a * b - b * a
}

pub fn anticommutator(a: &Operator, b: &Operator) -> Operator {
    a * b + b * a
}

/// `<a|b>`
pub fn inner(a: &StateVector, b: &StateVector) -> Complex64 {
    a.dotc(b)
}

/// `<a|A|b>`
pub fn matrix_element(a: &StateVector, op: &Operator, b: &StateVector) -> Complex64 {
    a.dotc(&(op * b))
}

/// Largest absolute deviation of `a` from `a†`.
pub fn hermiticity_deviation(a: &Operator) -> f64 {
    let mut worst = 0.0_f64;
    for i in 0..DIM {
        for j in i..DIM {
            worst = worst.max((a[(i, j)] - a[(j, i)].conj()).norm());
        }
    }
    worst
}

pub fn is_hermitian(a: &Operator, tol: f64) -> bool {
    hermiticity_deviation(a) <= tol
}

/// Infinity norm (maximum absolute row sum); bounds the spectral radius.
pub fn row_sum_norm(a: &Operator) -> f64 {
    (0..DIM)
        .map(|i| (0..DIM).map(|j| a[(i, j)].norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Eigen-decomposition of a Hermitian operator, eigenvalues ascending.
/// Only the Hermitian part of `a` is used.
pub fn hermitian_eigen(a: &Operator) -> (Vec<f64>, Vec<StateVector>) {
    let h = (a + a.adjoint()).scale(0.5);
    let eig = h.symmetric_eigen();
    let mut order: Vec<usize> = (0..DIM).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = order
        .iter()
        .map(|&i| eig.eigenvectors.column(i).into_owned())
        .collect();
    (values, vectors)
}

/// Normalized state vector.
pub fn normalized(v: StateVector) -> Result<StateVector> {
    let n = v.norm();
    if n == 0.0 || !n.is_finite() {
        return Err(Error::UndefinedState("zero-norm state".into()));
    }
    Ok(v.unscale(n))
}

pub fn is_normalized(v: &StateVector) -> bool {
    (v.norm() - 1.0).abs() <= NORM_TOL
}

/// A density matrix over the level basis.
///
/// Construction does not check validity; call [`DensityMatrix::validate`]
/// where the physics requires it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DensityMatrix(Operator);

impl DensityMatrix {
    pub fn from_operator(op: Operator) -> Self {
        Self(op)
    }

    pub fn pure(psi: &StateVector) -> Self {
        Self(outer(psi, psi))
    }

    pub fn basis(level: Level) -> Self {
        Self(projector(level))
    }

    pub fn maximally_mixed() -> Self {
        Self(Operator::identity().unscale(DIM as f64))
    }

    pub fn as_operator(&self) -> &Operator {
        &self.0
    }

    pub fn into_operator(self) -> Operator {
        self.0
    }

    pub fn trace(&self) -> Complex64 {
        self.0.trace()
    }

    pub fn purity(&self) -> f64 {
        (self.0 * self.0).trace().re
    }

    pub fn population(&self, level: Level) -> f64 {
        self.0[(level.index(), level.index())].re
    }

    /// `<a|rho|b>`
    pub fn element(&self, a: &StateVector, b: &StateVector) -> Complex64 {
        matrix_element(a, &self.0, b)
    }

    pub fn expectation(&self, a: &Operator) -> Complex64 {
        expectation(self, a)
    }

    /// Replaces the matrix by its Hermitian part.
    pub fn symmetrize(&mut self) {
        self.0 = (self.0 + self.0.adjoint()).scale(0.5);
    }

    pub fn diagnostics(&self) -> DensityDiagnostics {
        let (values, _) = hermitian_eigen(&self.0);
        DensityDiagnostics {
            hermiticity: hermiticity_deviation(&self.0),
            trace_deviation: (self.0.trace() - ONE).norm(),
            min_eigenvalue: values[0],
        }
    }

    pub fn validate(&self, trace_tol: f64) -> Result<DensityDiagnostics> {
        validate_density(self, trace_tol)
    }
}

/// `tr(rho A)`
pub fn expectation(rho: &DensityMatrix, a: &Operator) -> Complex64 {
    let r = rho.as_operator();
    let mut acc = ZERO;
    for i in 0..DIM {
        for j in 0..DIM {
            acc += r[(i, j)] * a[(j, i)];
        }
    }
    acc
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DensityDiagnostics {
    pub hermiticity: f64,
    pub trace_deviation: f64,
    pub min_eigenvalue: f64,
}

impl DensityDiagnostics {
    pub fn violations(&self, trace_tol: f64) -> Vec<String> {
        let mut out = Vec::new();
        if !(self.hermiticity <= HERMITIAN_TOL) {
            out.push(format!("hermiticity deviation {:e}", self.hermiticity));
        }
        if !(self.trace_deviation <= trace_tol) {
            out.push(format!("trace deviation {:e}", self.trace_deviation));
        }
        if !(self.min_eigenvalue >= -POSITIVITY_TOL) {
            out.push(format!("min eigenvalue {:e}", self.min_eigenvalue));
        }
        out
    }

    pub fn passes(&self, trace_tol: f64) -> bool {
        self.violations(trace_tol).is_empty()
    }
}

/// Checks Hermiticity, unit trace and positivity.
pub fn validate_density(rho: &DensityMatrix, trace_tol: f64) -> Result<DensityDiagnostics> {
    let diag = rho.diagnostics();
    let violations = diag.violations(trace_tol);
    if violations.is_empty() {
        Ok(diag)
    } else {
        Err(Error::InvalidDensity(violations.join("; ")))
    }
}
