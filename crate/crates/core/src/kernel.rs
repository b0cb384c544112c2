//! Split real/imaginary 6x6 arithmetic for the integrator inner loop.
//!
//! Generators are stored densely but multiplied through a precomputed
//! sparsity pattern; term operators and jump sources are stored as entry
//! lists.

use num_complex::Complex64;

use crate::quantum::{Operator, StateVector, DIM};

type Block = [[f64; DIM]; DIM];

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct CMat {
    pub re: Block,
    pub im: Block,
}

impl CMat {
    pub const ZERO: CMat = CMat {
        re: [[0.0; DIM]; DIM],
        im: [[0.0; DIM]; DIM],
    };

    pub fn from_op(op: &Operator) -> Self {
        let mut m = Self::ZERO;
        for i in 0..DIM {
            for j in 0..DIM {
                let z = op[(i, j)];
                m.re[i][j] = z.re;
                m.im[i][j] = z.im;
            }
        }
        m
    }

    pub fn to_op(self) -> Operator {
        Operator::from_fn(|i, j| Complex64::new(self.re[i][j], self.im[i][j]))
    }

    /// `out = self + a * x`.
    #[inline]
    pub fn axpy_into(&self, a: f64, x: &CMat, out: &mut CMat) {
        for i in 0..DIM {
            for j in 0..DIM {
                out.re[i][j] = self.re[i][j] + a * x.re[i][j];
                out.im[i][j] = self.im[i][j] + a * x.im[i][j];
            }
        }
    }

    /// `self += a * x`.
    #[inline]
    pub fn axpy(&mut self, a: f64, x: &CMat) {
        for i in 0..DIM {
            for j in 0..DIM {
                self.re[i][j] += a * x.re[i][j];
                self.im[i][j] += a * x.im[i][j];
            }
        }
    }

    pub fn trace_re(&self) -> f64 {
        (0..DIM).map(|i| self.re[i][i]).sum()
    }

    /// Replaces the matrix by its Hermitian part.
    pub fn symmetrize(&mut self) {
        for i in 0..DIM {
            self.im[i][i] = 0.0;
            for j in i + 1..DIM {
                let r = 0.5 * (self.re[i][j] + self.re[j][i]);
                let m = 0.5 * (self.im[i][j] - self.im[j][i]);
                self.re[i][j] = r;
                self.re[j][i] = r;
                self.im[i][j] = m;
                self.im[j][i] = -m;
            }
        }
    }
}

/// Nonzero entries of an operator.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct SparseOp {
    pub entries: Vec<(usize, usize, Complex64)>,
}

impl SparseOp {
    pub fn from_op(op: &Operator) -> Self {
        let mut entries = Vec::new();
        for i in 0..DIM {
            for j in 0..DIM {
                if op[(i, j)] != Complex64::new(0.0, 0.0) {
                    entries.push((i, j, op[(i, j)]));
                }
            }
        }
        Self { entries }
    }

    /// `m += c * self`.
    #[inline]
    pub fn add_scaled(&self, c: Complex64, m: &mut CMat) {
        for &(i, j, z) in &self.entries {
            let v = c * z;
            m.re[i][j] += v.re;
            m.im[i][j] += v.im;
        }
    }

    /// `m += c * self + conj(c) * self^dag`.
    #[inline]
    pub fn add_hermitian_pair(&self, c: Complex64, m: &mut CMat) {
        for &(i, j, z) in &self.entries {
            let v = c * z;
            m.re[i][j] += v.re;
            m.im[i][j] += v.im;
            m.re[j][i] += v.re;
            m.im[j][i] -= v.im;
        }
    }

    pub fn mark(&self, mask: &mut [[bool; DIM]; DIM]) {
        for &(i, j, _) in &self.entries {
            mask[i][j] = true;
        }
    }
}

/// Vector with a fixed support.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct SparseKet {
    len: usize,
    idx: [usize; DIM],
    re: [f64; DIM],
    im: [f64; DIM],
}

impl SparseKet {
    pub fn from_vector(v: &StateVector) -> Self {
        let mut k = SparseKet {
            len: 0,
            idx: [0; DIM],
            re: [0.0; DIM],
            im: [0.0; DIM],
        };
        for i in 0..DIM {
            if v[i] != Complex64::new(0.0, 0.0) {
                k.idx[k.len] = i;
                k.re[k.len] = v[i].re;
                k.im[k.len] = v[i].im;
                k.len += 1;
            }
        }
        k
    }

    #[cfg(test)]
    pub fn norm_squared(&self) -> f64 {
        (0..self.len)
            .map(|a| self.re[a] * self.re[a] + self.im[a] * self.im[a])
            .sum()
    }

    /// `m += c |w><w|`.
    #[inline]
    pub fn add_projector(&self, c: Complex64, m: &mut CMat) {
        for a in 0..self.len {
            for b in 0..self.len {
                let (i, j) = (self.idx[a], self.idx[b]);
                // w_i conj(w_j)
                let pr = self.re[a] * self.re[b] + self.im[a] * self.im[b];
                let pi = self.im[a] * self.re[b] - self.re[a] * self.im[b];
                m.re[i][j] += c.re * pr - c.im * pi;
                m.im[i][j] += c.re * pi + c.im * pr;
            }
        }
    }

    /// `<w| rho |w>` for Hermitian `rho`.
    #[inline]
    pub fn expectation(&self, rho: &CMat) -> f64 {
        let mut acc = 0.0;
        for a in 0..self.len {
            let i = self.idx[a];
            let mut xr = 0.0;
            let mut xi = 0.0;
            for b in 0..self.len {
                let j = self.idx[b];
                xr += rho.re[i][j] * self.re[b] - rho.im[i][j] * self.im[b];
                xi += rho.re[i][j] * self.im[b] + rho.im[i][j] * self.re[b];
            }
            acc += self.re[a] * xr + self.im[a] * xi;
        }
        acc
    }

    /// `m += scale |w><w|` for real `scale`.
    #[inline]
    fn feed(&self, scale: f64, m: &mut CMat) {
        self.add_projector(Complex64::from(scale), m);
    }

    pub fn mark(&self, mask: &mut [[bool; DIM]; DIM]) {
        for a in 0..self.len {
            for b in 0..self.len {
                mask[self.idx[a]][self.idx[b]] = true;
            }
        }
    }

    pub fn basis_index(&self) -> Option<usize> {
        (self.len == 1 && self.re[0] == 1.0 && self.im[0] == 0.0).then_some(self.idx[0])
    }
}

/// Jumps sharing one source `w`: `sqrt(rate_k) |f_k><w|`, with basis targets
/// folded into a diagonal feed.
#[derive(Debug, Clone)]
pub(crate) struct KJump {
    pub source: SparseKet,
    pub diagonal: [f64; DIM],
    pub dense: Vec<(SparseKet, f64)>,
}

impl KJump {
    pub fn new(source: SparseKet, targets: &[(SparseKet, f64)]) -> Self {
        let mut j = Self {
            source,
            diagonal: [0.0; DIM],
            dense: Vec::new(),
        };
        for &(t, rate) in targets {
            match t.basis_index() {
                Some(i) => j.diagonal[i] += rate,
                None => j.dense.push((t, rate)),
            }
        }
        j
    }

    #[cfg(test)]
    /// `sum_k rate_k |f_k|^2`.
    pub fn total_rate(&self) -> f64 {
        self.diagonal.iter().sum::<f64>()
            + self
                .dense
                .iter()
                .map(|(t, r)| r * t.norm_squared())
                .sum::<f64>()
    }
}

/// Rows of a 6x6 mask as column lists.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Pattern {
    len: [usize; DIM],
    cols: [[usize; DIM]; DIM],
}

impl Pattern {
    pub fn from_mask(mask: &[[bool; DIM]; DIM]) -> Self {
        let mut p = Pattern {
            len: [0; DIM],
            cols: [[0; DIM]; DIM],
        };
        for i in 0..DIM {
            for m in 0..DIM {
                if mask[i][m] {
                    p.cols[i][p.len[i]] = m;
                    p.len[i] += 1;
                }
            }
        }
        p
    }

    #[cfg(test)]
    pub fn dense() -> Self {
        Self::from_mask(&[[true; DIM]; DIM])
    }
}

/// `-i (K rho - (K rho)^dag) + sum rate <w|rho|w> |f><f|` for Hermitian
/// `rho`, with `K` nonzero only on `pattern`.
#[inline]
pub(crate) fn rhs(rho: &CMat, k: &CMat, pattern: &Pattern, jumps: &[KJump], out: &mut CMat) {
    let mut a = [[0.0; DIM]; DIM];
    let mut b = [[0.0; DIM]; DIM];
    for i in 0..DIM {
        for &m in &pattern.cols[i][..pattern.len[i]] {
            let kr = k.re[i][m];
            let ki = k.im[i][m];
            let rr = &rho.re[m];
            let ri = &rho.im[m];
            for j in 0..DIM {
                a[i][j] += kr * rr[j] - ki * ri[j];
                b[i][j] += kr * ri[j] + ki * rr[j];
            }
        }
    }
    for i in 0..DIM {
        for j in 0..DIM {
            out.re[i][j] = b[i][j] + b[j][i];
            out.im[i][j] = a[j][i] - a[i][j];
        }
    }
    for jump in jumps {
        let p = jump.source.expectation(rho);
        if p != 0.0 {
            for i in 0..DIM {
                out.re[i][i] += jump.diagonal[i] * p;
            }
            for (target, rate) in &jump.dense {
                target.feed(rate * p, out);
            }
        }
    }
}
