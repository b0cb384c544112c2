//! Second-order coherence of a dark-state superposition in the frequency
//! domain.
//!
//! Under a drive of Rabi frequency `Omega` the dephasing field reaches the
//! dark state through the modulation `M(t1, t2) = cos(Omega (t1 - t2) / 2)`,
//! and to second order
//!
//! ```text
//! L(t) = 1 - (1/2) int dw/2pi S(w) M~(w),
//! M~(w) = int_0^t int_0^t e^{-i w (t1 - t2)} M(t1, t2) dt1 dt2.
//! ```

use std::f64::consts::PI;

use gkquad::single::Integrator;
use gkquad::Tolerance;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::noise::OUParams;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FilterParams {
    /// Effective Rabi frequency (rad/us).
    pub omega_drive: f64,
    /// Evolution time (us).
    pub t: f64,
}

impl FilterParams {
    pub fn new(omega_drive: f64, t: f64) -> Result<Self> {
        let p = Self { omega_drive, t };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.omega_drive >= 0.0) {
            return Err(Error::invalid("omega_drive", "must be non-negative"));
        }
        if !(self.t > 0.0) || !self.t.is_finite() {
            return Err(Error::invalid("t", "must be positive and finite"));
        }
        Ok(())
    }
}

pub fn modulation(t1: f64, t2: f64, omega_drive: f64) -> f64 {
    (0.5 * omega_drive * (t1 - t2)).cos()
}

/// `2 sin^2(d t / 2) / d^2`, continuous at `d = 0`.
fn lobe(d: f64, t: f64) -> f64 {
    let x = 0.5 * d * t;
    let sinc = if x.abs() < 1e-4 {
        1.0 - x * x / 6.0
    } else {
        x.sin() / x
    };
    0.5 * t * t * sinc * sinc
}

/// Exact filter function: one lobe centred on each dressed gap `+-Omega/2`.
pub fn filter(omega: f64, params: &FilterParams) -> f64 {
    let half = 0.5 * params.omega_drive;
    lobe(omega - half, params.t) + lobe(omega + half, params.t)
}

/// Large-drive approximation `C sin^2(D t / 2) / D^2` with
/// `C = 4 w Omega / (w + Omega/2)^2` and `D = |w - Omega/2|`, for `w >= 0`.
pub fn filter_approx(omega: f64, params: &FilterParams) -> f64 {
    let half = 0.5 * params.omega_drive;
    let c = 4.0 * omega * params.omega_drive / (omega + half).powi(2);
    0.5 * c * lobe(omega - half, params.t)
}

/// Noise power spectrum `S(w) = int dt <b(t) b(0)> e^{i w t}`.
pub trait SpectralDensity {
    fn density(&self, omega: f64) -> f64;

    /// Frequencies where the spectrum has structure, as quadrature hints.
    fn features(&self) -> Vec<f64> {
        Vec::new()
    }
}

impl SpectralDensity for OUParams {
    fn density(&self, omega: f64) -> f64 {
        self.spectral_density(omega)
    }

    fn features(&self) -> Vec<f64> {
        vec![1.0 / self.tau, -1.0 / self.tau]
    }
}

impl<F: Fn(f64) -> f64> SpectralDensity for F {
    fn density(&self, omega: f64) -> f64 {
        self(omega)
    }
}

pub const QUADRATURE_RTOL: f64 = 1e-6;
const MAX_SUBDIVISIONS: usize = 100_000;

/// `1 - (1/4 pi) int S(w) M~(w) dw` by adaptive Gauss-Kronrod quadrature.
pub fn second_order_l<S: SpectralDensity + ?Sized>(spectrum: &S, params: &FilterParams) -> Result<f64> {
    params.validate()?;
    let half = 0.5 * params.omega_drive;
    let mut points = vec![0.0, half, -half];
    points.extend(spectrum.features());
    points.retain(|p| p.is_finite());
    points.sort_by(f64::total_cmp);
    points.dedup();
    let result = Integrator::new(|w: f64| spectrum.density(w) * filter(w, params))
        .tolerance(Tolerance::AbsOrRel(1e-15, QUADRATURE_RTOL))
        .max_iters(MAX_SUBDIVISIONS)
        .points(&points)
        .run(f64::NEG_INFINITY..f64::INFINITY);
    let integral = result
        .estimate()
        .map_err(|e| Error::Quadrature(e.to_string()))?;
    Ok(1.0 - integral / (4.0 * PI))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::noise::calibrate_dephasing;
    use num_complex::Complex64;
    use proptest::prelude::*;

    fn quad(f: impl Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
        Integrator::new(f)
            .tolerance(Tolerance::AbsOrRel(1e-12, tol))
            .max_iters(10_000)
            .run(a..b)
            .estimate()
            .unwrap()
    }

    #[test]
    fn modulation_basics() {
        assert_eq!(modulation(1.3, 1.3, 7.0), 1.0);
        assert_eq!(modulation(0.2, 5.0, 0.0), 1.0);
        assert_eq!(modulation(0.2, 5.0, 3.1), modulation(5.0, 0.2, 3.1));
    }

    #[test]
    fn undriven_filter() {
        let p = FilterParams::new(0.0, 3.0).unwrap();
        for w in [-2.0, 0.1, 0.7, 5.0] {
            let expect = 4.0 * (w * 3.0 / 2.0f64).sin().powi(2) / (w * w);
            assert!((filter(w, &p) - expect).abs() < 1e-12 * expect.max(1.0));
        }
        assert!((filter(0.0, &p) - 9.0).abs() < 1e-12);
    }

    #[test]
    fn resonant_lobe_limit() {
        let (om, t) = (10.0, 4.0);
        let p = FilterParams::new(om, t).unwrap();
        let expect = t * t / 2.0 + 2.0 * (om * t / 2.0f64).sin().powi(2) / (om * om);
        assert!((filter(om / 2.0, &p) - expect).abs() < 1e-12);
        // continuous through the removable point
        assert!((filter(om / 2.0 + 1e-7, &p) - expect).abs() < 1e-6);
    }

    #[test]
    fn filter_matches_double_quadrature() {
        for (om, t, w) in [(0.0, 2.0, 0.8), (10.0, 2.0, 4.0), (10.0, 1.5, -6.5), (4.0, 3.0, 0.0)] {
            let p = FilterParams::new(om, t).unwrap();
            // the imaginary part cancels between (t1, t2) and (t2, t1)
            let inner = |t1: f64| {
                quad(
                    |t2: f64| (w * (t1 - t2)).cos() * modulation(t1, t2, om),
                    0.0,
                    t,
                    1e-11,
                )
            };
            let oracle = quad(inner, 0.0, t, 1e-10);
            let exact = filter(w, &p);
            assert!(((oracle - exact) / exact).abs() < 1e-8, "{om} {t} {w}: {oracle} vs {exact}");
        }
    }

    #[test]
    fn approximation_agrees_near_resonance() {
        let p = FilterParams::new(60.0, 20.0).unwrap();
        for w in [29.5, 30.0, 30.3] {
            let (a, e) = (filter_approx(w, &p), filter(w, &p));
            assert!(((a - e) / e).abs() < 0.05, "{w}: {a} vs {e}");
        }
    }

    /// `1 - L` from the time-domain double integral of an OU correlation
    /// `s2 e^{-|u|/tau}`: `s2 Re[t/a - (1 - e^{-a t})/a^2]`, `a = 1/tau - i Omega/2`.
    fn ou_deficit(p: &OUParams, f: &FilterParams) -> f64 {
        let a = Complex64::new(1.0 / p.tau, -0.5 * f.omega_drive);
        let t = Complex64::from(f.t);
        p.stationary_variance() * (t / a - (1.0 - (-a * t).exp()) / (a * a)).re
    }

    #[test]
    fn matches_time_domain_for_ou() {
        let ou = calibrate_dephasing(3.0, 25.0).unwrap();
        for (om, t) in [(0.0, 0.5), (0.0, 3.0), (10.0, 10.0), (62.8, 50.0), (3.0, 7.0)] {
            let f = FilterParams::new(om, t).unwrap();
            let deficit = 1.0 - second_order_l(&ou, &f).unwrap();
            let oracle = ou_deficit(&ou, &f);
            assert!(((deficit - oracle) / oracle).abs() < 1e-5, "{om} {t}: {deficit} vs {oracle}");
        }
    }

    #[test]
    fn short_time_quasi_static() {
        let ou = calibrate_dephasing(3.0, 25.0).unwrap();
        for t in [0.1, 0.3] {
            let l = second_order_l(&ou, &FilterParams::new(0.0, t).unwrap()).unwrap();
            // 1 - t^2/T2*^2 with an O(t^3/tau) correction
            assert!((l - (1.0 - t * t / 9.0)).abs() < t.powi(3) / (9.0 * 25.0));
        }
    }

    #[test]
    fn zero_spectrum_and_filtering() {
        let f = FilterParams::new(10.0, 10.0).unwrap();
        assert_eq!(second_order_l(&|_: f64| 0.0, &f).unwrap(), 1.0);
        let ou = calibrate_dephasing(3.0, 25.0).unwrap();
        let driven = 1.0 - second_order_l(&ou, &f).unwrap();
        let free = 1.0 - second_order_l(&ou, &FilterParams::new(0.0, 10.0).unwrap()).unwrap();
        assert!(free > 100.0 * driven, "{free} vs {driven}");
    }

    #[test]
    fn rejects_bad_params() {
        assert!(FilterParams::new(-1.0, 1.0).is_err());
        assert!(FilterParams::new(1.0, 0.0).is_err());
    }

    proptest! {
        #[test]
        fn filter_nonnegative_and_even(w in -100.0..100.0f64, om in 0.0..80.0f64, t in 0.01..60.0f64) {
            let p = FilterParams::new(om, t).unwrap();
            let (a, b) = (filter(w, &p), filter(-w, &p));
            prop_assert!(a >= 0.0);
            prop_assert!((a - b).abs() <= 1e-12 * a.max(1e-300));
        }
    }
}
