//! Phase-type jump distributions.
//!
//! A phase-type distribution is the absorption time of a killed Markov jump
//! process on `m` transient states: initial law `alpha`, sub-generator `T`
//! (negative diagonal, non-negative off-diagonal, non-positive row sums), and
//! exit rate vector `t = -T 1`.  Key closed forms used throughout the crate:
//!
//! * density         `f(z) = alpha exp(T z) t`
//! * survival        `P(Z > z) = alpha exp(T z) 1`
//! * Laplace transform `E[exp(-theta Z)] = alpha (theta I - T)^{-1} t`
//! * raw moments     `E[Z^k] = k! alpha (-T)^{-k} 1`
//!
//! The class is dense in distributions on `(0, inf)` and keeps the Laplace
//! exponent of the driving process rational, which is what makes every scale
//! function in this crate a finite mixture of exponentials.

use nalgebra::{Complex, DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, Exp1, Open01};

use crate::error::{Error, Result};

type C64 = Complex<f64>;

/// Tolerance for the structural checks on `alpha` and `T` (entry signs, row
/// sums, normalization of the initial law).
pub const STRUCTURE_TOL: f64 = 1e-12;

/// A phase-type distribution on `(0, infinity)`.
#[derive(Debug, Clone)]
pub struct PhaseTypeDistribution {
    alpha: DVector<f64>,
    sub: DMatrix<f64>,
    exit: DVector<f64>,
    mean: f64,
    /// `(-T)^{-1} 1`, the expected remaining absorption time per phase.
    resolvent_ones: DVector<f64>,
    eigenvalues: Vec<C64>,
    // sampling tables: per-state cumulative jump law, last entry = absorption
    alpha_cdf: Vec<f64>,
    hold_rate: Vec<f64>,
    move_cdf: Vec<Vec<f64>>,
}

impl PhaseTypeDistribution {
    /// Validate and build from an initial law and sub-generator.
    pub fn new(alpha: DVector<f64>, sub: DMatrix<f64>) -> Result<Self> {
        let m = alpha.len();
        if m == 0 {
            return Err(Error::InvalidPhaseType("no phases".into()));
        }
        if sub.nrows() != m || sub.ncols() != m {
            return Err(Error::InvalidPhaseType(format!(
                "sub-generator is {}x{}, initial law has length {m}",
                sub.nrows(),
                sub.ncols()
            )));
        }
        let mut sum = 0.0;
        for (i, &a) in alpha.iter().enumerate() {
            if !a.is_finite() || !(-STRUCTURE_TOL..=1.0 + STRUCTURE_TOL).contains(&a) {
                return Err(Error::InvalidPhaseType(format!("initial_law[{i}] = {a} outside [0, 1]")));
            }
            sum += a;
        }
        if (sum - 1.0).abs() > STRUCTURE_TOL {
            return Err(Error::InvalidPhaseType(format!("initial_law sums to {sum}, expected 1")));
        }
        for i in 0..m {
            if !(sub[(i, i)].is_finite() && sub[(i, i)] < 0.0) {
                return Err(Error::InvalidPhaseType(format!(
                    "diagonal entry T[{i},{i}] = {} must be negative",
                    sub[(i, i)]
                )));
            }
            let mut row = 0.0;
            for j in 0..m {
                if j != i && !(sub[(i, j)].is_finite() && sub[(i, j)] >= -STRUCTURE_TOL) {
                    return Err(Error::InvalidPhaseType(format!(
                        "off-diagonal entry T[{i},{j}] = {} must be non-negative",
                        sub[(i, j)]
                    )));
                }
                row += sub[(i, j)];
            }
            if row > STRUCTURE_TOL {
                return Err(Error::InvalidPhaseType(format!(
                    "row {i} of the sub-generator sums to {row} > 0"
                )));
            }
        }
        // transience: every eigenvalue of T must sit strictly in the left
        // half-plane, otherwise absorption is not certain
        let eigenvalues: Vec<C64> = sub.clone().complex_eigenvalues().iter().copied().collect();
        let max_re = eigenvalues.iter().map(|e| e.re).fold(f64::NEG_INFINITY, f64::max);
        if max_re >= -1e-10 {
            return Err(Error::InvalidPhaseType(format!(
                "sub-generator has an eigenvalue with real part {max_re:.3e}; absorption is not certain"
            )));
        }
        let exit = sub.row_iter().map(|r| (-r.sum()).max(0.0)).collect::<Vec<_>>();
        let exit = DVector::from_vec(exit);

        let ones = DVector::from_element(m, 1.0);
        let resolvent_ones = match (-sub.clone()).lu().solve(&ones) {
            Some(v) => v,
            None => return Err(Error::InfiniteMean),
        };
        let mean = alpha.dot(&resolvent_ones);
        if !mean.is_finite() {
            return Err(Error::InfiniteMean);
        }

        let total: f64 = alpha.iter().sum();
        let mut alpha_cdf = Vec::with_capacity(m);
        let mut acc = 0.0;
        for &a in alpha.iter() {
            acc += a.max(0.0) / total;
            alpha_cdf.push(acc);
        }
        let mut hold_rate = Vec::with_capacity(m);
        let mut move_cdf = Vec::with_capacity(m);
        for i in 0..m {
            let rate = -sub[(i, i)];
            hold_rate.push(rate);
            let mut row = Vec::with_capacity(m + 1);
            let mut cum = 0.0;
            for j in 0..m {
                if j != i {
                    cum += sub[(i, j)].max(0.0) / rate;
                }
                row.push(cum);
            }
            row.push(1.0); // absorption
            move_cdf.push(row);
        }

        Ok(Self {
            alpha,
            sub,
            exit,
            mean,
            resolvent_ones,
            eigenvalues,
            alpha_cdf,
            hold_rate,
            move_cdf,
        })
    }

    /// Convenience constructor from plain slices (row-major sub-generator).
    pub fn from_rows(alpha: &[f64], rows: &[Vec<f64>]) -> Result<Self> {
        let m = alpha.len();
        for (i, r) in rows.iter().enumerate() {
            if r.len() != m {
                return Err(Error::InvalidPhaseType(format!(
                    "sub-generator row {i} has length {}, expected {m}",
                    r.len()
                )));
            }
        }
        if rows.len() != m {
            return Err(Error::InvalidPhaseType(format!(
                "sub-generator has {} rows, expected {m}",
                rows.len()
            )));
        }
        let flat: Vec<f64> = rows.iter().flatten().copied().collect();
        Self::new(DVector::from_column_slice(alpha), DMatrix::from_row_slice(m, m, &flat))
    }

    /// The exponential distribution with the given rate, as a single phase.
    pub fn exponential(rate: f64) -> Result<Self> {
        if !(rate.is_finite() && rate > 0.0) {
            return Err(Error::InvalidPhaseType(format!("exponential rate {rate} must be positive")));
        }
        Self::new(DVector::from_element(1, 1.0), DMatrix::from_element(1, 1, -rate))
    }

    pub fn num_phases(&self) -> usize {
        self.alpha.len()
    }

    pub fn initial_law(&self) -> &DVector<f64> {
        &self.alpha
    }

    pub fn sub_generator(&self) -> &DMatrix<f64> {
        &self.sub
    }

    /// Exit rate vector `t = -T 1`.
    pub fn exit_rates(&self) -> &DVector<f64> {
        &self.exit
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    /// Eigenvalues of the sub-generator (the poles of the Laplace transform).
    pub fn eigenvalues(&self) -> &[C64] {
        &self.eigenvalues
    }

    /// `E[Z^k] = k! alpha (-T)^{-k} 1`.
    pub fn raw_moment(&self, k: u32) -> Result<f64> {
        let m = self.num_phases();
        let lu = (-self.sub.clone()).lu();
        let mut v = DVector::from_element(m, 1.0);
        let mut fact = 1.0;
        for j in 1..=k {
            v = lu
                .solve(&v)
                .ok_or(Error::SingularResolvent { theta: 0.0 })?;
            fact *= j as f64;
        }
        Ok(fact * self.alpha.dot(&v))
    }

    /// `E[exp(-theta Z)] = alpha (theta I - T)^{-1} t`.
    pub fn laplace_transform(&self, theta: f64) -> Result<f64> {
        let m = self.num_phases();
        let a = DMatrix::identity(m, m) * theta - &self.sub;
        let x = a
            .lu()
            .solve(&self.exit)
            .ok_or(Error::SingularResolvent { theta })?;
        Ok(self.alpha.dot(&x))
    }

    /// Derivative of the Laplace transform: `-alpha (theta I - T)^{-2} t`.
    pub fn laplace_transform_derivative(&self, theta: f64) -> Result<f64> {
        let m = self.num_phases();
        let a = DMatrix::identity(m, m) * theta - &self.sub;
        let lu = a.lu();
        let x = lu
            .solve(&self.exit)
            .ok_or(Error::SingularResolvent { theta })?;
        let y = lu
            .solve(&x)
            .ok_or(Error::SingularResolvent { theta })?;
        Ok(-self.alpha.dot(&y))
    }

    /// Laplace transform continued to complex arguments.
    pub fn laplace_transform_complex(&self, theta: C64) -> Result<C64> {
        let (x, _) = self.resolvent_apply(theta)?;
        Ok(x)
    }

    /// Complex Laplace transform and its derivative in one pass.
    pub fn laplace_transform_complex_with_derivative(&self, theta: C64) -> Result<(C64, C64)> {
        self.resolvent_apply(theta)
    }

    fn resolvent_apply(&self, theta: C64) -> Result<(C64, C64)> {
        let m = self.num_phases();
        let mut a = DMatrix::<C64>::zeros(m, m);
        for i in 0..m {
            for j in 0..m {
                a[(i, j)] = C64::new(-self.sub[(i, j)], 0.0);
            }
            a[(i, i)] += theta;
        }
        let rhs = DVector::<C64>::from_iterator(m, self.exit.iter().map(|&t| C64::new(t, 0.0)));
        let lu = a.lu();
        let x = lu
            .solve(&rhs)
            .ok_or(Error::SingularResolvent { theta: theta.re })?;
        let y = lu
            .solve(&x)
            .ok_or(Error::SingularResolvent { theta: theta.re })?;
        let dot = |v: &DVector<C64>| -> C64 {
            self.alpha.iter().zip(v.iter()).map(|(&a, &z)| z * a).sum()
        };
        Ok((dot(&x), -dot(&y)))
    }

    /// Density `alpha exp(T z) t`; zero for negative arguments.
    pub fn density(&self, z: f64) -> f64 {
        if z < 0.0 {
            return 0.0;
        }
        let e = (self.sub.clone() * z).exp();
        (self.alpha.transpose() * e * &self.exit)[(0, 0)]
    }

    /// Survival function `P(Z > z) = alpha exp(T z) 1`.
    pub fn survival(&self, z: f64) -> f64 {
        if z <= 0.0 {
            return 1.0;
        }
        let e = (self.sub.clone() * z).exp();
        let ones = DVector::from_element(self.num_phases(), 1.0);
        (self.alpha.transpose() * e * ones)[(0, 0)]
    }

    /// Truncated tail mean `E[Z 1{Z > z}] = alpha exp(T z) (z (-T)^{-1} + (-T)^{-2}) t`.
    ///
    /// Because `(-T)^{-1} t = 1`, this reduces to `alpha exp(T z) (z 1 + u)`
    /// with `u = (-T)^{-1} 1` precomputed at construction.
    pub fn partial_mean_above(&self, z: f64) -> f64 {
        if z <= 0.0 {
            return self.mean;
        }
        let e = (self.sub.clone() * z).exp();
        let v = DVector::from_element(self.num_phases(), z) + &self.resolvent_ones;
        (self.alpha.transpose() * e * v)[(0, 0)]
    }

    /// Exact draw by simulating the underlying absorbed Markov chain.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let u: f64 = Open01.sample(rng);
        let mut state = self.alpha_cdf.iter().position(|&c| u <= c).unwrap_or(0);
        let mut z = 0.0;
        loop {
            let e: f64 = Exp1.sample(rng);
            z += e / self.hold_rate[state];
            let v: f64 = Open01.sample(rng);
            let row = &self.move_cdf[state];
            let next = row.iter().position(|&c| v <= c).unwrap_or(row.len() - 1);
            if next >= self.num_phases() {
                return z;
            }
            state = next;
        }
    }
}
