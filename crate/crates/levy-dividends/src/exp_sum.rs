//! Exponential-sum representation `a0 + a1 y + sum_k c_k exp(rho_k y)`.
//!
//! Every function assembled by the solver on the half-line above the barrier
//! is a linear/constant part plus a combination of exponentials whose
//! frequencies are the roots of `psi = q` and `psi = q + r`.  Working with
//! the coefficients directly (instead of summing evaluated terms) has two
//! payoffs:
//!
//! * the convolution `y -> int_0^y exp(mu u) f(y - u) du` maps the class to
//!   itself, which turns the scale-function convolutions into coefficient
//!   arithmetic;
//! * coefficients on the two growing modes (the frequencies `phi(q)` and
//!   `phi(q + r)`) cancel analytically for all bounded or linearly growing
//!   targets, and [`ExpSum::drop_mode`] zeroes them *after checking* that the
//!   computed coefficient is consistent with rounding noise.  Summing the
//!   growing terms naively instead would lose `exp(phi y)`-many digits at
//!   large `y`.
//!
//! Each coefficient carries the accumulated absolute mass `abs` of every
//! contribution that went into it, so "consistent with rounding noise" can be
//! tested relative to the sizes that actually cancelled.

use std::sync::Arc;

use num_complex::Complex;

use crate::error::{Error, Result};

type C64 = Complex<f64>;

/// Relative tolerance for declaring a cancelled coefficient to be zero:
/// the residual must not exceed `DROP_TOL * (accumulated mass + 1)`.
pub(crate) const DROP_TOL: f64 = 1e-8;

/// The shared frequency basis: all roots of `psi = q` followed by all roots
/// of `psi = q + r`.
#[derive(Debug)]
pub(crate) struct ExpBasis {
    freqs: Vec<C64>,
}

impl ExpBasis {
    pub fn new(freqs: Vec<C64>) -> Arc<Self> {
        Arc::new(Self { freqs })
    }

    pub fn len(&self) -> usize {
        self.freqs.len()
    }

    pub fn freq(&self, idx: usize) -> C64 {
        self.freqs[idx]
    }
}

/// A function `y -> a0 + a1 y + Re sum_k c_k exp(freqs[k] y)` on `y >= 0`.
#[derive(Debug, Clone)]
pub(crate) struct ExpSum {
    basis: Arc<ExpBasis>,
    a0: C64,
    a1: C64,
    coeff: Vec<C64>,
    abs0: f64,
    abs1: f64,
    abs: Vec<f64>,
}

impl ExpSum {
    pub fn zero(basis: Arc<ExpBasis>) -> Self {
        let n = basis.len();
        Self {
            basis,
            a0: C64::new(0.0, 0.0),
            a1: C64::new(0.0, 0.0),
            coeff: vec![C64::new(0.0, 0.0); n],
            abs0: 0.0,
            abs1: 0.0,
            abs: vec![0.0; n],
        }
    }

    pub fn add_const(&mut self, a: f64) {
        self.a0 += a;
        self.abs0 += a.abs();
    }

    /// Add a complex constant contribution; only the real part survives
    /// evaluation, but tracking the imaginary part keeps the accumulated
    /// cancellation mass honest.
    pub fn add_const_c(&mut self, a: C64) {
        self.a0 += a;
        self.abs0 += a.norm();
    }

    /// Test-only convenience; production code adds complex coefficients.
    #[cfg(test)]
    pub fn add_linear(&mut self, a: f64) {
        self.a1 += a;
        self.abs1 += a.abs();
    }

    pub fn add_linear_c(&mut self, a: C64) {
        self.a1 += a;
        self.abs1 += a.norm();
    }

    pub fn add_term(&mut self, idx: usize, c: C64) {
        self.coeff[idx] += c;
        self.abs[idx] += c.norm();
    }

    /// `self += k * other`.
    pub fn add_scaled(&mut self, other: &ExpSum, k: f64) {
        self.add_scaled_c(other, C64::new(k, 0.0));
    }

    pub fn add_scaled_c(&mut self, other: &ExpSum, k: C64) {
        debug_assert!(Arc::ptr_eq(&self.basis, &other.basis));
        self.a0 += other.a0 * k;
        self.abs0 += other.abs0 * k.norm();
        self.a1 += other.a1 * k;
        self.abs1 += other.abs1 * k.norm();
        for i in 0..self.coeff.len() {
            self.coeff[i] += other.coeff[i] * k;
            self.abs[i] += other.abs[i] * k.norm();
        }
    }

    /// The convolution `y -> int_0^y exp(mu u) self(y - u) du` with `mu` the
    /// basis frequency at `mu_idx`.  The input must not already carry that
    /// frequency (no resonant `y exp(mu y)` terms arise in this crate).
    pub fn convolve_exp(&self, mu_idx: usize) -> ExpSum {
        let mu = self.basis.freq(mu_idx);
        let mut out = ExpSum::zero(self.basis.clone());
        // constant part a0: a0 (e^{mu y} - 1) / mu
        if self.abs0 > 0.0 {
            let c = self.a0 / mu;
            out.coeff[mu_idx] += c;
            out.abs[mu_idx] += c.norm();
            out.a0 -= c;
            out.abs0 += c.norm();
        }
        // linear part a1 y: a1 (-y/mu + (e^{mu y} - 1)/mu^2)
        if self.abs1 > 0.0 {
            let c1 = self.a1 / mu;
            let c2 = self.a1 / (mu * mu);
            out.a1 -= c1;
            out.abs1 += c1.norm();
            out.coeff[mu_idx] += c2;
            out.abs[mu_idx] += c2.norm();
            out.a0 -= c2;
            out.abs0 += c2.norm();
        }
        // exponential terms: c (e^{mu y} - e^{rho y}) / (mu - rho)
        for k in 0..self.coeff.len() {
            if self.abs[k] == 0.0 {
                continue;
            }
            if k == mu_idx {
                debug_assert!(
                    self.coeff[k].norm() <= 1e-12 * (self.abs[k] + 1.0),
                    "resonant convolution frequency"
                );
                continue;
            }
            let rho = self.basis.freq(k);
            let c = self.coeff[k] / (mu - rho);
            out.coeff[mu_idx] += c;
            out.abs[mu_idx] += c.norm();
            out.coeff[k] -= c;
            out.abs[k] += c.norm();
        }
        out
    }

    /// Termwise derivative.
    pub fn derivative(&self) -> ExpSum {
        let mut out = ExpSum::zero(self.basis.clone());
        out.a0 = self.a1;
        out.abs0 = self.abs1;
        for k in 0..self.coeff.len() {
            let rho = self.basis.freq(k);
            out.coeff[k] = self.coeff[k] * rho;
            out.abs[k] = self.abs[k] * rho.norm();
        }
        out
    }

    /// Zero the coefficient at `idx` after checking that it is already zero
    /// up to the rounding noise of the contributions that built it.
    pub fn drop_mode(&mut self, idx: usize) -> Result<()> {
        let mag = self.coeff[idx].norm();
        if mag > DROP_TOL * (self.abs[idx] + 1.0) {
            return Err(Error::ConvergenceFailure(format!(
                "exponential mode {} (frequency {}) should cancel but has coefficient {:.3e} \
                 against accumulated mass {:.3e}",
                idx,
                self.basis.freq(idx),
                mag,
                self.abs[idx]
            )));
        }
        self.coeff[idx] = C64::new(0.0, 0.0);
        self.abs[idx] = 0.0;
        Ok(())
    }

    /// Evaluate at `y >= 0`.  When the largest active frequency would
    /// overflow on its own, the dominant mode is factored out first so the
    /// result only overflows if the true value does.
    pub fn eval(&self, y: f64) -> f64 {
        let mut lead = 0.0f64;
        for k in 0..self.coeff.len() {
            if self.abs[k] > 0.0 {
                lead = lead.max(self.basis.freq(k).re * y);
            }
        }
        let base = self.a0.re + self.a1.re * y;
        if lead <= 600.0 {
            let mut s = C64::new(0.0, 0.0);
            for k in 0..self.coeff.len() {
                if self.abs[k] > 0.0 {
                    s += self.coeff[k] * (self.basis.freq(k) * y).exp();
                }
            }
            base + s.re
        } else {
            let mut s = C64::new(0.0, 0.0);
            for k in 0..self.coeff.len() {
                if self.abs[k] > 0.0 {
                    s += self.coeff[k] * ((self.basis.freq(k) * y) - lead).exp();
                }
            }
            base + s.re * lead.exp()
        }
    }

    /// Test-only accessor for asserting individual coefficients.
    #[cfg(test)]
    pub fn coeff(&self, idx: usize) -> C64 {
        self.coeff[idx]
    }

    /// Test-only accessor.
    #[cfg(test)]
    pub fn basis(&self) -> &Arc<ExpBasis> {
        &self.basis
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn basis() -> Arc<ExpBasis> {
        ExpBasis::new(vec![
            C64::new(-1.0, 0.0),
            C64::new(-0.5, 1.2),
            C64::new(-0.5, -1.2),
            C64::new(0.8, 0.0),
        ])
    }

    #[test]
    fn eval_matches_direct_sum() {
        let b = basis();
        let mut f = ExpSum::zero(b.clone());
        f.add_const(2.0);
        f.add_linear(-0.3);
        f.add_term(0, C64::new(1.5, 0.0));
        f.add_term(1, C64::new(0.2, 0.7));
        f.add_term(2, C64::new(0.2, -0.7));
        let y = 1.7;
        let direct = 2.0 - 0.3 * y
            + 1.5 * (-y as f64).exp()
            + 2.0 * ((0.2 * (1.2f64 * y).cos() - 0.7 * (1.2f64 * y).sin()) * (-0.5 * y).exp());
        assert_abs_diff_eq!(f.eval(y), direct, epsilon = 1e-12);
    }

    #[test]
    fn convolution_matches_quadrature() {
        let b = basis();
        let mut f = ExpSum::zero(b.clone());
        f.add_const(1.0);
        f.add_linear(0.5);
        f.add_term(0, C64::new(2.0, 0.0));
        let conv = f.convolve_exp(3); // mu = 0.8
        for &y in &[0.0, 0.4, 1.3, 2.5] {
            let quad = crate::quad::integrate(
                |u| (0.8 * u as f64).exp() * f.eval(y - u),
                0.0,
                y,
                1e-12,
            )
            .unwrap();
            assert_abs_diff_eq!(conv.eval(y), quad.value, epsilon = 1e-10);
        }
    }

    #[test]
    fn derivative_matches_finite_difference() {
        let b = basis();
        let mut f = ExpSum::zero(b.clone());
        f.add_linear(0.7);
        f.add_term(1, C64::new(0.3, 0.1));
        f.add_term(2, C64::new(0.3, -0.1));
        let df = f.derivative();
        let h = 1e-6;
        for &y in &[0.5, 2.0] {
            let fd = (f.eval(y + h) - f.eval(y - h)) / (2.0 * h);
            assert_abs_diff_eq!(df.eval(y), fd, epsilon = 1e-8);
        }
    }

    #[test]
    fn drop_mode_accepts_rounding_noise_and_rejects_real_mass() {
        let b = basis();
        let mut f = ExpSum::zero(b.clone());
        // two contributions that cancel to rounding
        f.add_term(3, C64::new(1.0, 0.0));
        f.add_term(3, C64::new(-1.0 + 1e-15, 0.0));
        assert!(f.drop_mode(3).is_ok());
        assert_eq!(f.coeff(3), C64::new(0.0, 0.0));

        let mut g = ExpSum::zero(b);
        g.add_term(3, C64::new(0.1, 0.0));
        assert!(g.drop_mode(3).is_err());
    }

    #[test]
    fn conjugate_coefficients_give_real_values() {
        let b = basis();
        let mut f = ExpSum::zero(b);
        f.add_term(1, C64::new(0.4, -0.9));
        f.add_term(2, C64::new(0.4, 0.9));
        for &y in &[0.0, 1.0, 3.0, 10.0] {
            let v = f.eval(y);
            assert!(v.is_finite());
            // imaginary parts cancel by symmetry; eval takes the real part of
            // an already-real sum
            let mut s = C64::new(0.0, 0.0);
            s += C64::new(0.4, -0.9) * (b_freq(&f, 1) * y).exp();
            s += C64::new(0.4, 0.9) * (b_freq(&f, 2) * y).exp();
            assert_abs_diff_eq!(s.im, 0.0, epsilon = 1e-12 * s.norm().max(1.0));
        }
    }

    fn b_freq(f: &ExpSum, i: usize) -> C64 {
        f.basis().freq(i)
    }
}
