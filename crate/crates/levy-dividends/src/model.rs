//! The driving spectrally negative Lévy process.
//!
//! `X(t) = drift_c * t + sigma * B(t) - sum of compound Poisson losses`,
//! where losses arrive at rate `jump_rate` with phase-type sizes.  The
//! Laplace exponent is
//!
//! `psi(theta) = drift_c * theta + sigma^2 theta^2 / 2
//!               + jump_rate * (E[exp(-theta Z)] - 1)`,
//!
//! finite and convex on `theta >= 0`, with `psi(0) = 0` and
//! `psi'(0+) = drift_c - jump_rate * E[Z]`.  `phi(s)` denotes the largest
//! root of `psi = s`; for `s > 0` it is the unique root on the increasing
//! branch and is found by a safeguarded Newton iteration.

use num_complex::Complex;

use crate::error::{Error, Result};
use crate::phase_type::PhaseTypeDistribution;

type C64 = Complex<f64>;

/// Path variation of the process: a Brownian component forces unbounded
/// variation, otherwise the paths are piecewise linear between jumps.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PathVariation {
    Bounded,
    Unbounded,
}

/// Quantities fixed by validation, reported for diagnostics.
#[derive(Debug, Clone, Copy)]
pub struct ModelDiagnostics {
    pub variation: PathVariation,
    /// `psi'(0+) = drift_c - jump_rate * E[Z]`; its sign decides whether the
    /// process drifts to `+inf`, oscillates, or drifts to `-inf`.
    pub psi_prime_at_zero: f64,
    pub jump_mean: f64,
    /// Value of the level-`s` scale function at zero (same for every level):
    /// `1 / drift_c` for bounded variation, `0` otherwise.
    pub w_at_zero: f64,
}

/// A validated spectrally negative Lévy process.
#[derive(Debug, Clone)]
pub struct LevyModel {
    drift_c: f64,
    sigma: f64,
    jump_rate: f64,
    jumps: PhaseTypeDistribution,
}

impl LevyModel {
    /// Validate parameters and build the model.
    ///
    /// Rejects monotone-downward paths (`sigma = 0` with `drift_c <= 0`),
    /// negative volatility or jump rate, and jump distributions without a
    /// finite mean.
    pub fn new(
        drift_c: f64,
        sigma: f64,
        jump_rate: f64,
        jumps: PhaseTypeDistribution,
    ) -> Result<Self> {
        if !drift_c.is_finite() {
            return Err(Error::InvalidConfig(format!("drift_c = {drift_c} must be finite")));
        }
        if !(sigma.is_finite() && sigma >= 0.0) {
            return Err(Error::InvalidConfig(format!("sigma = {sigma} must be >= 0")));
        }
        if !(jump_rate.is_finite() && jump_rate >= 0.0) {
            return Err(Error::InvalidConfig(format!("jump_rate = {jump_rate} must be >= 0")));
        }
        if sigma == 0.0 && drift_c <= 0.0 {
            return Err(Error::MonotonePaths { drift_c });
        }
        if !jumps.mean().is_finite() {
            return Err(Error::InfiniteMean);
        }
        Ok(Self { drift_c, sigma, jump_rate, jumps })
    }

    /// Deterministic drift `c t` (no diffusion, no jumps).
    pub fn pure_drift(drift_c: f64) -> Result<Self> {
        Self::new(drift_c, 0.0, 0.0, PhaseTypeDistribution::exponential(1.0)?)
    }

    /// Brownian motion with drift (no jumps).
    pub fn brownian(drift_c: f64, sigma: f64) -> Result<Self> {
        Self::new(drift_c, sigma, 0.0, PhaseTypeDistribution::exponential(1.0)?)
    }

    pub fn drift_c(&self) -> f64 {
        self.drift_c
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn jump_rate(&self) -> f64 {
        self.jump_rate
    }

    pub fn jumps(&self) -> &PhaseTypeDistribution {
        &self.jumps
    }

    /// Diagnostics fixed at validation time.
    pub fn diagnostics(&self) -> ModelDiagnostics {
        let variation = if self.sigma > 0.0 {
            PathVariation::Unbounded
        } else {
            PathVariation::Bounded
        };
        ModelDiagnostics {
            variation,
            psi_prime_at_zero: self.psi_prime_at_zero(),
            jump_mean: self.jumps.mean(),
            w_at_zero: match variation {
                PathVariation::Bounded => 1.0 / self.drift_c,
                PathVariation::Unbounded => 0.0,
            },
        }
    }

    /// Laplace exponent `psi(theta)` for `theta >= 0`.
    pub fn psi(&self, theta: f64) -> f64 {
        debug_assert!(theta >= 0.0, "psi is evaluated on theta >= 0");
        let mut v = self.drift_c * theta + 0.5 * self.sigma * self.sigma * theta * theta;
        if self.jump_rate > 0.0 {
            // theta >= 0 keeps theta I - T nonsingular
            let lt = self.jumps.laplace_transform(theta).expect("resolvent on theta >= 0");
            v += self.jump_rate * (lt - 1.0);
        }
        v
    }

    /// `psi'(theta)` for `theta >= 0`.
    pub fn psi_prime(&self, theta: f64) -> f64 {
        debug_assert!(theta >= 0.0);
        let mut v = self.drift_c + self.sigma * self.sigma * theta;
        if self.jump_rate > 0.0 {
            let dlt = self
                .jumps
                .laplace_transform_derivative(theta)
                .expect("resolvent on theta >= 0");
            v += self.jump_rate * dlt;
        }
        v
    }

    /// `psi'(0+) = drift_c - jump_rate * E[Z]`.
    pub fn psi_prime_at_zero(&self) -> f64 {
        self.drift_c - self.jump_rate * self.jumps.mean()
    }

    /// Analytic continuation of `psi` off the real axis (needed when polishing
    /// the complex roots of `psi = s`).
    pub fn psi_complex(&self, theta: C64) -> Result<C64> {
        let mut v = theta * self.drift_c + theta * theta * (0.5 * self.sigma * self.sigma);
        if self.jump_rate > 0.0 {
            let lt = self.jumps.laplace_transform_complex(theta)?;
            v += (lt - 1.0) * self.jump_rate;
        }
        Ok(v)
    }

    /// Complex `psi` and `psi'` in one resolvent factorization.
    pub fn psi_complex_with_derivative(&self, theta: C64) -> Result<(C64, C64)> {
        let lin = theta * self.drift_c + theta * theta * (0.5 * self.sigma * self.sigma);
        let dlin = theta * (self.sigma * self.sigma) + self.drift_c;
        if self.jump_rate == 0.0 {
            return Ok((lin, dlin));
        }
        let (lt, dlt) = self.jumps.laplace_transform_complex_with_derivative(theta)?;
        Ok((lin + (lt - 1.0) * self.jump_rate, dlin + dlt * self.jump_rate))
    }

    /// Largest root of `psi = s` for `s >= 0`, by safeguarded Newton with
    /// bracket doubling; converges to `|psi - s| <= 1e-13 * max(1, s)`.
    pub fn phi(&self, s: f64) -> Result<f64> {
        if !(s.is_finite() && s >= 0.0) {
            return Err(Error::InvalidConfig(format!("phi requires s >= 0, got {s}")));
        }
        let dp0 = self.psi_prime(0.0);
        if s == 0.0 && dp0 >= 0.0 {
            return Ok(0.0);
        }
        // left end of the increasing branch: the minimizer of psi
        let theta_min = if dp0 >= 0.0 { 0.0 } else { self.argmin_psi()? };
        let tol = 1e-13 * s.max(1.0);
        let target = |theta: f64| self.psi(theta) - s;
        let mut lo = theta_min;
        let mut hi = (2.0 * theta_min).max(1.0);
        let mut guard = 0;
        while target(hi) < 0.0 {
            hi *= 2.0;
            guard += 1;
            if guard > 200 {
                return Err(Error::ConvergenceFailure(format!(
                    "no upper bracket for phi({s}) below theta = {hi}"
                )));
            }
        }
        let mut theta = 0.5 * (lo + hi);
        for _ in 0..200 {
            let f = target(theta);
            if f.abs() <= tol {
                return Ok(theta);
            }
            if f > 0.0 {
                hi = theta;
            } else {
                lo = theta;
            }
            let d = self.psi_prime(theta);
            let newton = theta - f / d;
            theta = if d > 0.0 && newton > lo && newton < hi {
                newton
            } else {
                0.5 * (lo + hi)
            };
            if hi - lo <= f64::EPSILON * (1.0 + hi.abs()) {
                let f = target(theta);
                if f.abs() <= tol.max(1e-10 * s.max(1.0)) {
                    return Ok(theta);
                }
                break;
            }
        }
        Err(Error::ConvergenceFailure(format!("phi({s}) did not reach tolerance {tol:e}")))
    }

    /// Minimizer of the convex `psi` when `psi'(0+) < 0`.
    fn argmin_psi(&self) -> Result<f64> {
        let mut lo = 0.0;
        let mut hi = 1.0;
        let mut guard = 0;
        while self.psi_prime(hi) < 0.0 {
            lo = hi;
            hi *= 2.0;
            guard += 1;
            if guard > 200 {
                return Err(Error::ConvergenceFailure(
                    "psi' stays negative; drift never recovers".into(),
                ));
            }
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if self.psi_prime(mid) < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo <= 1e-14 * (1.0 + hi) {
                break;
            }
        }
        Ok(0.5 * (lo + hi))
    }
}
