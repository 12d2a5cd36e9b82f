//! Scale functions of the spectrally negative model.
//!
//! With phase-type jumps the Laplace transform `1 / (psi(theta) - s)` is a
//! strictly proper rational function with simple poles, so the level-`s`
//! scale function is a finite exponential sum
//!
//! `W^(s)(x) = sum_i exp(theta_i x) / psi'(theta_i)`,   `x >= 0`,
//!
//! where `theta_i` are the roots of `psi = s`.  Exactly one root, `phi(s)`,
//! has positive real part; the rest sit strictly in the open left half-plane
//! and come in conjugate pairs.  [`ScaleEngine`] finds the roots (companion
//! matrix, then Newton polish on `psi - s`), cross-checks the largest against
//! the independent safeguarded-Newton `phi`, and exposes `W`, its right
//! derivative, the primitives `W_bar`, `W_bar_bar`, and `Z`, `Z_bar`.
//!
//! [`ScalePair`] couples the levels `q` and `q + r` that govern the surplus
//! below and above the dividend barrier.  It provides the two-parameter
//! `Z^(q)(x, phi(q+r))` (written `z_biv` here) and the shifted convolutions
//!
//! `F_conv(b, y) = F(y + b) + r int_0^y W^(q+r)(u) F(y - u + b) du`
//!
//! for `F in {W^(q), Z^(q), Z_bar^(q)}`, assembled in closed form on the
//! exponential-sum basis.  On `y > 0` every lower-level frequency cancels
//! analytically from the convolution; the assembly verifies this and removes
//! those modes, which is what keeps evaluations far above the barrier
//! accurate.

use std::fmt::Write as _;
use std::sync::Arc;

use num_complex::Complex;

use crate::error::{Error, Result};
use crate::exp_sum::{ExpBasis, ExpSum};
use crate::model::{LevyModel, PathVariation};
use crate::poly;

type C64 = Complex<f64>;

/// Minimal distance between two roots of `psi = s` at the same level before
/// the partial-fraction representation is refused.
pub const ROOT_SEPARATION_TOL: f64 = 1e-8;

/// Largest tolerated relative amplification `r |v_j| / |mu_j - theta_i|` when
/// a lower-level mode is convolved against an upper-level one.  Roots of the
/// two levels may legitimately be close (they coalesce as `r -> 0`, and a
/// root pinned near a pole of the jump transform barely moves with the
/// level), but in those regimes the weights shrink proportionally, so this
/// ratio stays `O(1)`.  A bound of `1e6` keeps coefficient-level rounding at
/// least two orders of magnitude below [`crate::exp_sum::DROP_TOL`].
const RESONANCE_AMPLIFICATION_TOL: f64 = 1e6;

/// Scale-function machinery at a single level `s > 0`.
#[derive(Debug, Clone)]
pub struct ScaleEngine {
    level: f64,
    phi: f64,
    /// Roots of `psi = s`, sorted by decreasing real part; `roots[0] = phi`.
    roots: Vec<C64>,
    /// Partial-fraction weights `1 / psi'(theta_i)`, aligned with `roots`.
    weights: Vec<C64>,
    sum_w_over_theta: C64,
    sum_w_over_theta2: C64,
}

impl ScaleEngine {
    /// Find the roots of `psi = s` and build the partial-fraction expansion.
    pub fn new(model: &LevyModel, s: f64) -> Result<Self> {
        if !(s.is_finite() && s > 0.0) {
            return Err(Error::InvalidConfig(format!("scale level s = {s} must be positive")));
        }
        let phi = model.phi(s)?;
        let lam = model.jump_rate();
        let half_sigma2 = 0.5 * model.sigma() * model.sigma();

        // numerator polynomial of psi - s over the common denominator
        // chi(theta) = det(theta I - T)
        let numer = if lam > 0.0 {
            let jumps = model.jumps();
            let (chi, mats) = poly::char_poly_with_adjugate(jumps.sub_generator());
            let m = jumps.num_phases();
            // alpha adj(theta I - T) t  =  sum_k theta^(m-k) (alpha M_k t)
            let mut jnum = vec![0.0; m];
            for (k, mk) in mats.iter().enumerate() {
                let v = mk * jumps.exit_rates();
                jnum[m - 1 - k] = jumps.initial_law().dot(&v);
            }
            // (c theta + sigma^2/2 theta^2 - (lambda + s)) chi + lambda jnum
            let deg = m + if half_sigma2 > 0.0 { 2 } else { 1 };
            let mut n = vec![0.0; deg + 1];
            for (k, &ck) in chi.iter().enumerate() {
                n[k] -= (lam + s) * ck;
                n[k + 1] += model.drift_c() * ck;
                if half_sigma2 > 0.0 {
                    n[k + 2] += half_sigma2 * ck;
                }
            }
            for (k, &jk) in jnum.iter().enumerate() {
                n[k] += lam * jk;
            }
            n
        } else if half_sigma2 > 0.0 {
            vec![-s, model.drift_c(), half_sigma2]
        } else {
            vec![-s, model.drift_c()]
        };

        let mut roots = poly::roots(&numer)?;

        // polish on psi - s itself; a root sitting on an eigenvalue of T makes
        // the resolvent singular, which only happens when the phase-type
        // representation is redundant (numerator and denominator share a root)
        for z in roots.iter_mut() {
            if lam > 0.0 {
                let d = model
                    .jumps()
                    .eigenvalues()
                    .iter()
                    .map(|&e| (*z - e).norm())
                    .fold(f64::INFINITY, f64::min);
                if d <= 1e-9 * (1.0 + z.norm()) {
                    return Err(Error::ConvergenceFailure(format!(
                        "root {z} of psi = {s} collides with an eigenvalue of the jump \
                         sub-generator; the phase-type representation is redundant"
                    )));
                }
            }
            *z = polish_on_psi(model, s, *z)?;
            if z.im.abs() <= 1e-9 * (1.0 + z.re.abs()) {
                z.im = 0.0;
            }
        }

        pair_conjugates(&mut roots)?;
        roots.sort_by(|a, b| {
            b.re.partial_cmp(&a.re).unwrap().then(a.im.partial_cmp(&b.im).unwrap())
        });

        // exactly one root in the right half-plane, and it must agree with
        // the independently computed phi(s)
        if roots.is_empty() || roots[0].im != 0.0 || (roots[0].re - phi).abs() > 1e-9 * (1.0 + phi)
        {
            return Err(Error::ConvergenceFailure(format!(
                "largest root {} of psi = {s} does not match phi = {phi}",
                roots.first().copied().unwrap_or_default()
            )));
        }
        roots[0] = C64::new(phi, 0.0);
        if roots.iter().skip(1).any(|z| z.re >= 0.0) {
            return Err(Error::ConvergenceFailure(format!(
                "unexpected root of psi = {s} with non-negative real part"
            )));
        }
        for i in 0..roots.len() {
            for j in (i + 1)..roots.len() {
                if (roots[i] - roots[j]).norm() < ROOT_SEPARATION_TOL {
                    return Err(Error::NearMultipleRoots {
                        level: s,
                        a: roots[i],
                        b: roots[j],
                        tol: ROOT_SEPARATION_TOL,
                    });
                }
            }
        }

        let mut weights = Vec::with_capacity(roots.len());
        for &z in &roots {
            let (_, dpsi) = model.psi_complex_with_derivative(z)?;
            if dpsi.norm() == 0.0 {
                return Err(Error::ConvergenceFailure(format!(
                    "psi'({z}) vanished; root of psi = {s} is not simple"
                )));
            }
            weights.push(C64::new(1.0, 0.0) / dpsi);
        }
        // conjugate symmetry of the weights is inherited from the roots;
        // enforce it exactly so sums of terms are real to machine precision
        symmetrize_with_roots(&roots, &mut weights);

        let sum_w: C64 = weights.iter().sum();
        let w0_expected = match model.diagnostics().variation {
            PathVariation::Bounded => 1.0 / model.drift_c(),
            PathVariation::Unbounded => 0.0,
        };
        let w_mass: f64 = weights.iter().map(|w| w.norm()).sum();
        if (sum_w.re - w0_expected).abs() > 1e-7 * (1.0 + w_mass) || sum_w.im.abs() > 1e-9 {
            return Err(Error::ConvergenceFailure(format!(
                "partial-fraction weights sum to {sum_w} but W({s})(0) must be {w0_expected}"
            )));
        }

        let sum_w_over_theta = roots.iter().zip(&weights).map(|(&t, &w)| w / t).sum();
        let sum_w_over_theta2 = roots.iter().zip(&weights).map(|(&t, &w)| w / (t * t)).sum();
        Ok(Self { level: s, phi, roots, weights, sum_w_over_theta, sum_w_over_theta2 })
    }

    pub fn level(&self) -> f64 {
        self.level
    }

    /// `phi(s)`: the unique positive real root of `psi = s`.
    pub fn phi(&self) -> f64 {
        self.phi
    }

    pub fn roots(&self) -> &[C64] {
        &self.roots
    }

    pub fn weights(&self) -> &[C64] {
        &self.weights
    }

    /// `Re sum_i coeff(i) exp(theta_i x)` with the dominant mode factored out
    /// when it alone would overflow.
    fn exp_combination<F: Fn(usize) -> C64>(&self, x: f64, coeff: F) -> f64 {
        let lead = self.phi * x;
        if lead <= 600.0 {
            let mut s = C64::new(0.0, 0.0);
            for (i, &t) in self.roots.iter().enumerate() {
                s += coeff(i) * (t * x).exp();
            }
            s.re
        } else {
            let mut s = C64::new(0.0, 0.0);
            for (i, &t) in self.roots.iter().enumerate() {
                s += coeff(i) * ((t * x) - lead).exp();
            }
            s.re * lead.exp()
        }
    }

    /// The scale function `W^(s)(x)`; zero on `x < 0`.
    pub fn w(&self, x: f64) -> f64 {
        if x < 0.0 {
            return 0.0;
        }
        self.exp_combination(x, |i| self.weights[i])
    }

    /// Right derivative `W^(s)'(x+)` for `x >= 0`; zero on `x < 0`.
    pub fn w_prime_right(&self, x: f64) -> f64 {
        if x < 0.0 {
            return 0.0;
        }
        self.exp_combination(x, |i| self.weights[i] * self.roots[i])
    }

    /// First primitive `int_0^x W^(s)(u) du`; zero on `x <= 0`.
    pub fn w_bar(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return 0.0;
        }
        self.exp_combination(x, |i| self.weights[i] / self.roots[i]) - self.sum_w_over_theta.re
    }

    /// Second primitive `int_0^x int_0^u W^(s)(v) dv du`; zero on `x <= 0`.
    pub fn w_bar_bar(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return 0.0;
        }
        self.exp_combination(x, |i| self.weights[i] / (self.roots[i] * self.roots[i]))
            - self.sum_w_over_theta2.re
            - x * self.sum_w_over_theta.re
    }

    /// `Z^(s)(x) = 1 + s W_bar(x)`; equals 1 on `x <= 0`.
    pub fn z(&self, x: f64) -> f64 {
        1.0 + self.level * self.w_bar(x)
    }

    /// `Z_bar^(s)(x) = x + s W_bar_bar(x)`; equals `x` on `x <= 0`.
    pub fn z_bar(&self, x: f64) -> f64 {
        x + self.level * self.w_bar_bar(x)
    }

    /// Human-readable summary of the expansion, for debugging.
    pub fn diagnostic_dump(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "scale engine: level = {}, phi = {}", self.level, self.phi);
        let _ = writeln!(out, "{:>4}  {:>45}  {:>45}", "i", "root", "weight 1/psi'");
        for (i, (t, w)) in self.roots.iter().zip(&self.weights).enumerate() {
            let _ = writeln!(out, "{i:>4}  {t:>45}  {w:>45}");
        }
        out
    }
}

fn polish_on_psi(model: &LevyModel, s: f64, start: C64) -> Result<C64> {
    let scale = 1.0 + s;
    let mut z = start;
    for _ in 0..12 {
        let (p, dp) = model.psi_complex_with_derivative(z)?;
        let f = p - s;
        if f.norm() <= 1e-13 * scale || dp.norm() == 0.0 {
            return Ok(z);
        }
        let step = f / dp;
        z -= step;
        if step.norm() <= 1e-16 * (1.0 + z.norm()) {
            return Ok(z);
        }
    }
    let (p, _) = model.psi_complex_with_derivative(z)?;
    if (p - s).norm() <= 1e-8 * scale {
        Ok(z)
    } else {
        Err(Error::ConvergenceFailure(format!(
            "root polish on psi = {s} stalled at {z} with |psi - s| = {:e}",
            (p - s).norm()
        )))
    }
}

/// Pair complex roots with their conjugates and make the pairing exact.
fn pair_conjugates(roots: &mut [C64]) -> Result<()> {
    let mut used = vec![false; roots.len()];
    for i in 0..roots.len() {
        if used[i] || roots[i].im == 0.0 {
            continue;
        }
        let mut best: Option<(usize, f64)> = None;
        for j in 0..roots.len() {
            if j == i || used[j] || roots[j].im == 0.0 {
                continue;
            }
            if roots[j].im.signum() == roots[i].im.signum() {
                continue;
            }
            let d = (roots[j] - roots[i].conj()).norm();
            if best.map_or(true, |(_, bd)| d < bd) {
                best = Some((j, d));
            }
        }
        let Some((j, d)) = best else {
            return Err(Error::ConvergenceFailure(format!(
                "complex root {} has no conjugate partner",
                roots[i]
            )));
        };
        if d > 1e-7 * (1.0 + roots[i].norm()) {
            return Err(Error::ConvergenceFailure(format!(
                "complex roots {} and {} are not a conjugate pair",
                roots[i], roots[j]
            )));
        }
        let avg = 0.5 * (roots[i] + roots[j].conj());
        roots[i] = avg;
        roots[j] = avg.conj();
        used[i] = true;
        used[j] = true;
    }
    Ok(())
}

/// Force exact conjugate symmetry of `values` under the conjugate pairing of
/// `roots` (and exact realness at real roots).
fn symmetrize_with_roots(roots: &[C64], values: &mut [C64]) {
    let mut done = vec![false; roots.len()];
    for i in 0..roots.len() {
        if done[i] {
            continue;
        }
        if roots[i].im == 0.0 {
            values[i].im = 0.0;
            done[i] = true;
            continue;
        }
        if let Some(j) =
            (0..roots.len()).find(|&j| j != i && !done[j] && roots[j] == roots[i].conj())
        {
            let avg = 0.5 * (values[i] + values[j].conj());
            values[i] = avg;
            values[j] = avg.conj();
            done[i] = true;
            done[j] = true;
        }
    }
}

/// The two coupled levels `q` (below the barrier) and `q + r` (above it).
#[derive(Debug, Clone)]
pub struct ScalePair {
    q: f64,
    r: f64,
    lower: ScaleEngine,
    upper: ScaleEngine,
    basis: Arc<ExpBasis>,
}

impl ScalePair {
    pub fn new(model: &LevyModel, q: f64, r: f64) -> Result<Self> {
        if !(q.is_finite() && q > 0.0) {
            return Err(Error::InvalidConfig(format!("discount rate q = {q} must be positive")));
        }
        if !(r.is_finite() && r > 0.0) {
            return Err(Error::InvalidConfig(format!("observation rate r = {r} must be positive")));
        }
        let lower = ScaleEngine::new(model, q)?;
        let upper = ScaleEngine::new(model, q + r)?;
        assert!(upper.phi() > lower.phi(), "phi must be strictly increasing");
        // The convolution turns a lower-level coefficient c_i into terms
        // c_i r v_j / (mu_j - theta_i); the bivariate Z divides by
        // (phi(q+r) - theta_i).  Refuse only when one of these genuinely
        // amplifies, not merely when roots of the two levels are close.
        // `upper.roots()[0]` is `phi(q + r)` itself, so this loop also covers
        // the bivariate-Z denominators `phi(q+r) - theta_i`.
        for (i, &a) in lower.roots().iter().enumerate() {
            for (j, &b) in upper.roots().iter().enumerate() {
                let gap = (a - b).norm();
                let amp = r * upper.weights()[j].norm().max(lower.weights()[i].norm());
                if amp > RESONANCE_AMPLIFICATION_TOL * gap {
                    return Err(Error::ConvergenceFailure(format!(
                        "near-resonant level coupling: root {a} of psi = {q} against \
                         root {b} of psi = {} amplifies by {:.3e}",
                        q + r,
                        amp / gap,
                    )));
                }
            }
        }
        let freqs: Vec<C64> =
            lower.roots().iter().chain(upper.roots().iter()).copied().collect();
        let basis = ExpBasis::new(freqs);
        let pair = Self { q, r, lower, upper, basis };
        // normalization r int_0^inf exp(-phi(q+r) x) W^(q)(x) dx = 1, i.e.
        // the partial-fraction identity r sum_i w_i / (phi(q+r) - theta_i) = 1
        let z0 = pair.z_biv(0.0);
        if (z0 - 1.0).abs() > 1e-9 {
            return Err(Error::ConvergenceFailure(format!(
                "two-parameter scale normalization failed: Z(0, phi(q+r)) = {z0}"
            )));
        }
        Ok(pair)
    }

    pub fn q(&self) -> f64 {
        self.q
    }

    pub fn r(&self) -> f64 {
        self.r
    }

    /// Engine at level `q`.
    pub fn lower(&self) -> &ScaleEngine {
        &self.lower
    }

    /// Engine at level `q + r`.
    pub fn upper(&self) -> &ScaleEngine {
        &self.upper
    }

    pub fn phi_q(&self) -> f64 {
        self.lower.phi()
    }

    pub fn phi_qr(&self) -> f64 {
        self.upper.phi()
    }

    /// Two-parameter scale function `Z^(q)(x, phi(q+r))`:
    /// `exp(phi(q+r) x)` for `x <= 0`, and for `x >= 0` the exponential sum
    /// `r sum_i w_i exp(theta_i x) / (phi(q+r) - theta_i)` over the level-`q`
    /// roots.
    pub fn z_biv(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return (self.upper.phi() * x).exp();
        }
        let phi_qr = self.upper.phi();
        let r = self.r;
        self.lower.exp_combination(x, |i| {
            self.lower.weights()[i] * r / (phi_qr - self.lower.roots()[i])
        })
    }

    /// Derivative of [`Self::z_biv`]; for `x = 0` this is the right limit
    /// `phi(q+r) - r W^(q)(0)`.
    pub fn z_biv_prime(&self, x: f64) -> f64 {
        if x < 0.0 {
            return self.upper.phi() * (self.upper.phi() * x).exp();
        }
        self.upper.phi() * self.z_biv(x) - self.r * self.lower.w(x)
    }

    pub(crate) fn basis(&self) -> &Arc<ExpBasis> {
        &self.basis
    }

    pub(crate) fn lower_index(&self, i: usize) -> usize {
        debug_assert!(i < self.lower.roots().len());
        i
    }

    pub(crate) fn upper_index(&self, j: usize) -> usize {
        self.lower.roots().len() + j
    }

    /// Basis index of the growing upper mode `phi(q+r)`.
    pub(crate) fn phi_qr_index(&self) -> usize {
        self.lower.roots().len()
    }

    /// `W_bar^(q+r)` on `y >= 0` as an exponential sum.
    pub(crate) fn wbar_upper_sum(&self) -> ExpSum {
        let mut f = ExpSum::zero(self.basis.clone());
        let mut c0 = C64::new(0.0, 0.0);
        for (j, (&mu, &v)) in self.upper.roots().iter().zip(self.upper.weights()).enumerate() {
            f.add_term(self.upper_index(j), v / mu);
            c0 += v / mu;
        }
        f.add_const_c(-c0);
        f
    }

    /// `W_bar_bar^(q+r)` on `y >= 0` as an exponential sum.
    pub(crate) fn wbarbar_upper_sum(&self) -> ExpSum {
        let mut f = ExpSum::zero(self.basis.clone());
        let mut c0 = C64::new(0.0, 0.0);
        let mut c1 = C64::new(0.0, 0.0);
        for (j, (&mu, &v)) in self.upper.roots().iter().zip(self.upper.weights()).enumerate() {
            f.add_term(self.upper_index(j), v / (mu * mu));
            c0 += v / (mu * mu);
            c1 += v / mu;
        }
        f.add_const_c(-c0);
        f.add_linear_c(-c1);
        f
    }

    /// Apply the periodic-observation convolution
    /// `base + r sum_j v_j int_0^y exp(mu_j u) base(y - u) du`
    /// and remove the analytically cancelling lower-level modes.
    fn convolve_upper(&self, base: &ExpSum) -> Result<ExpSum> {
        let mut out = base.clone();
        for (j, &v) in self.upper.weights().iter().enumerate() {
            let conv = base.convolve_exp(self.upper_index(j));
            out.add_scaled_c(&conv, v * self.r);
        }
        for i in 0..self.lower.roots().len() {
            out.drop_mode(self.lower_index(i))?;
        }
        Ok(out)
    }

    fn base_w_shifted(&self, b: f64) -> ExpSum {
        let mut f = ExpSum::zero(self.basis.clone());
        for (i, (&t, &w)) in self.lower.roots().iter().zip(self.lower.weights()).enumerate() {
            f.add_term(self.lower_index(i), w * (t * b).exp());
        }
        f
    }

    fn base_z_shifted(&self, b: f64) -> ExpSum {
        let q = self.q;
        let mut f = ExpSum::zero(self.basis.clone());
        let mut sum_wt = C64::new(0.0, 0.0);
        for (i, (&t, &w)) in self.lower.roots().iter().zip(self.lower.weights()).enumerate() {
            f.add_term(self.lower_index(i), w / t * q * (t * b).exp());
            sum_wt += w / t;
        }
        f.add_const_c(C64::new(1.0, 0.0) - sum_wt * q);
        f
    }

    fn base_zbar_shifted(&self, b: f64) -> ExpSum {
        let q = self.q;
        let mut f = ExpSum::zero(self.basis.clone());
        let mut sum_wt = C64::new(0.0, 0.0);
        let mut sum_wt2 = C64::new(0.0, 0.0);
        for (i, (&t, &w)) in self.lower.roots().iter().zip(self.lower.weights()).enumerate() {
            f.add_term(self.lower_index(i), w / (t * t) * q * (t * b).exp());
            sum_wt += w / t;
            sum_wt2 += w / (t * t);
        }
        let slope = C64::new(1.0, 0.0) - sum_wt * q;
        f.add_linear_c(slope);
        f.add_const_c(slope * b - sum_wt2 * q);
        f
    }

    /// Build the three shifted convolutions at barrier `b`.
    pub fn convolved(&self, b: f64) -> Result<ConvolvedScales<'_>> {
        if !(b.is_finite() && b >= 0.0) {
            return Err(Error::InvalidConfig(format!("barrier b = {b} must be >= 0")));
        }
        let w = self.convolve_upper(&self.base_w_shifted(b))?;
        let z = self.convolve_upper(&self.base_z_shifted(b))?;
        let z_bar = self.convolve_upper(&self.base_zbar_shifted(b))?;
        Ok(ConvolvedScales { pair: self, b, w, z, z_bar })
    }

    /// `W^(q,r)_(-b)(y)`, see [`ConvolvedScales::w`].
    pub fn conv_w(&self, b: f64, y: f64) -> Result<f64> {
        Ok(self.convolved(b)?.w(y))
    }

    /// `Z^(q,r)_(-b)(y)`, see [`ConvolvedScales::z`].
    pub fn conv_z(&self, b: f64, y: f64) -> Result<f64> {
        Ok(self.convolved(b)?.z(y))
    }

    /// `Z_bar^(q,r)_(-b)(y)`, see [`ConvolvedScales::z_bar`].
    pub fn conv_zbar(&self, b: f64, y: f64) -> Result<f64> {
        Ok(self.convolved(b)?.z_bar(y))
    }
}

/// The shifted convolutions of `W^(q)`, `Z^(q)`, `Z_bar^(q)` at a fixed
/// barrier, cached as exponential sums for repeated evaluation.
///
/// Arguments are relative to the barrier: `y = x - b`.  For `y <= 0` the
/// convolution integral is empty and the functions reduce to the plain
/// level-`q` scale functions evaluated at `y + b`.
#[derive(Debug, Clone)]
pub struct ConvolvedScales<'p> {
    pair: &'p ScalePair,
    b: f64,
    w: ExpSum,
    z: ExpSum,
    z_bar: ExpSum,
}

impl ConvolvedScales<'_> {
    pub fn barrier(&self) -> f64 {
        self.b
    }

    pub fn w(&self, y: f64) -> f64 {
        if y <= 0.0 {
            self.pair.lower.w(y + self.b)
        } else {
            self.w.eval(y)
        }
    }

    pub fn z(&self, y: f64) -> f64 {
        if y <= 0.0 {
            self.pair.lower.z(y + self.b)
        } else {
            self.z.eval(y)
        }
    }

    pub fn z_bar(&self, y: f64) -> f64 {
        if y <= 0.0 {
            self.pair.lower.z_bar(y + self.b)
        } else {
            self.z_bar.eval(y)
        }
    }

    pub(crate) fn w_sum(&self) -> &ExpSum {
        &self.w
    }

    pub(crate) fn z_sum(&self) -> &ExpSum {
        &self.z
    }

    pub(crate) fn zbar_sum(&self) -> &ExpSum {
        &self.z_bar
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::ProblemConfig;
    use crate::quad::integrate;
    use approx::{assert_abs_diff_eq, assert_relative_eq};
    use nalgebra::{DMatrix, DVector};

    fn case1_model() -> LevyModel {
        ProblemConfig::preset("case1").unwrap().build_model().unwrap()
    }

    fn case2_model() -> LevyModel {
        ProblemConfig::preset("case2").unwrap().build_model().unwrap()
    }

    fn hyperexp(rates: &[f64], probs: &[f64]) -> crate::phase_type::PhaseTypeDistribution {
        let m = rates.len();
        let mut t = DMatrix::zeros(m, m);
        for i in 0..m {
            t[(i, i)] = -rates[i];
        }
        crate::phase_type::PhaseTypeDistribution::new(DVector::from_row_slice(probs), t).unwrap()
    }

    #[test]
    fn pure_drift_closed_forms() {
        let c = 0.7;
        let model = LevyModel::pure_drift(c).unwrap();
        let q = 0.05;
        let r = 0.5;
        let engine = ScaleEngine::new(&model, q).unwrap();
        assert_relative_eq!(engine.phi(), q / c, max_relative = 1e-13);
        for &x in &[0.0, 0.3, 1.0, 4.0, 10.0] {
            // W^(q)(x) = exp(q x / c) / c, hence Z = exp(q x / c) and
            // Z_bar = (c/q)(exp(q x / c) - 1)
            let e = (q * x / c).exp();
            assert_relative_eq!(engine.w(x), e / c, max_relative = 1e-12);
            assert_relative_eq!(engine.z(x), e, max_relative = 1e-12);
            assert_abs_diff_eq!(engine.z_bar(x), c / q * (e - 1.0), epsilon = 1e-12 * (1.0 + e));
        }
        let pair = ScalePair::new(&model, q, r).unwrap();
        for &x in &[0.0, 0.5, 2.0] {
            assert_relative_eq!(pair.z_biv(x), (q * x / c).exp(), max_relative = 1e-12);
        }
        assert_relative_eq!(pair.z_biv_prime(0.0), q / c, max_relative = 1e-12);
    }

    #[test]
    fn brownian_closed_form() {
        // psi(theta) = theta^2 for c = 0, sigma = sqrt(2), so
        // W^(s)(x) = sinh(sqrt(s) x) / sqrt(s)
        let model = LevyModel::brownian(0.0, std::f64::consts::SQRT_2).unwrap();
        let s = 0.3;
        let engine = ScaleEngine::new(&model, s).unwrap();
        let root = s.sqrt();
        assert_relative_eq!(engine.phi(), root, max_relative = 1e-13);
        assert_abs_diff_eq!(engine.w(0.0), 0.0, epsilon = 1e-14);
        // W'(0+) = 2 / sigma^2 = 1
        assert_relative_eq!(engine.w_prime_right(0.0), 1.0, max_relative = 1e-12);
        for &x in &[0.2, 1.0, 3.0] {
            assert_relative_eq!(engine.w(x), (root * x).sinh() / root, max_relative = 1e-12);
        }
    }

    #[test]
    fn primitives_match_quadrature() {
        let model = case1_model();
        let engine = ScaleEngine::new(&model, 0.05).unwrap();
        for &x in &[0.4, 1.0, 2.5] {
            let wbar = integrate(|u| engine.w(u), 0.0, x, 1e-12).unwrap().value;
            assert_relative_eq!(engine.w_bar(x), wbar, max_relative = 1e-9);
            let wbarbar = integrate(|u| engine.w_bar(u), 0.0, x, 1e-12).unwrap().value;
            assert_relative_eq!(engine.w_bar_bar(x), wbarbar, max_relative = 1e-9);
            let zbar = integrate(|u| engine.z(u), 0.0, x, 1e-12).unwrap().value;
            assert_relative_eq!(engine.z_bar(x), zbar, max_relative = 1e-9);
        }
    }

    #[test]
    fn w_prime_matches_finite_difference() {
        let model = case1_model();
        let engine = ScaleEngine::new(&model, 0.55).unwrap();
        let h = 1e-5;
        for &x in &[0.3, 1.0, 2.0, 5.0] {
            let fd = (engine.w(x + h) - engine.w(x - h)) / (2.0 * h);
            assert_relative_eq!(engine.w_prime_right(x), fd, max_relative = 1e-7);
        }
    }

    #[test]
    fn z_biv_integral_representation() {
        // Z^(q)(x, phi(q+r)) = e^(phi(q+r) x) (1 - r int_0^x e^(-phi(q+r) u) W^(q)(u) du)
        for model in [case1_model(), case2_model()] {
            let pair = ScalePair::new(&model, 0.05, 0.5).unwrap();
            let phi_qr = pair.phi_qr();
            for &x in &[0.3, 1.0, 2.0] {
                let inner = integrate(
                    |u| (-phi_qr * u).exp() * pair.lower().w(u),
                    0.0,
                    x,
                    1e-13,
                )
                .unwrap()
                .value;
                let oracle = (phi_qr * x).exp() * (1.0 - pair.r() * inner);
                assert_relative_eq!(pair.z_biv(x), oracle, max_relative = 1e-9);
            }
        }
    }

    #[test]
    fn z_biv_prime_matches_finite_difference() {
        let model = case1_model();
        let pair = ScalePair::new(&model, 0.05, 0.5).unwrap();
        let h = 1e-5;
        for &x in &[0.4, 1.3, 3.0] {
            let fd = (pair.z_biv(x + h) - pair.z_biv(x - h)) / (2.0 * h);
            assert_relative_eq!(pair.z_biv_prime(x), fd, max_relative = 1e-7);
        }
    }

    #[test]
    fn zero_barrier_convolutions_collapse_to_upper_level() {
        for model in [case1_model(), case2_model()] {
            let pair = ScalePair::new(&model, 0.05, 0.5).unwrap();
            let conv = pair.convolved(0.0).unwrap();
            let upper = pair.upper();
            for &y in &[0.0, 0.2, 0.8, 1.5, 3.0, 6.0] {
                // mixed tolerance: W(0) = 0 in the unbounded-variation case
                assert_abs_diff_eq!(
                    conv.w(y),
                    upper.w(y),
                    epsilon = 1e-8 * (1.0 + upper.w(y).abs())
                );
                assert_relative_eq!(conv.z(y), upper.z(y), max_relative = 1e-8);
                assert_abs_diff_eq!(
                    conv.z_bar(y),
                    upper.z_bar(y),
                    epsilon = 1e-8 * (1.0 + upper.z_bar(y).abs())
                );
            }
        }
    }

    #[test]
    fn convolutions_match_quadrature_at_positive_barrier() {
        let model = case1_model();
        let pair = ScalePair::new(&model, 0.05, 0.5).unwrap();
        let b = 0.7;
        let conv = pair.convolved(b).unwrap();
        let lower = pair.lower();
        let upper = pair.upper();
        let quad_conv = |f: &dyn Fn(f64) -> f64, y: f64| {
            f(y + b)
                + pair.r()
                    * integrate(|u| upper.w(u) * f(y - u + b), 0.0, y, 1e-12).unwrap().value
        };
        for &y in &[0.3, 1.0, 2.4] {
            assert_relative_eq!(
                conv.w(y),
                quad_conv(&|x| lower.w(x), y),
                max_relative = 1e-9
            );
            assert_relative_eq!(
                conv.z(y),
                quad_conv(&|x| lower.z(x), y),
                max_relative = 1e-9
            );
            assert_relative_eq!(
                conv.z_bar(y),
                quad_conv(&|x| lower.z_bar(x), y),
                max_relative = 1e-9
            );
        }
        // continuity across y = 0 and the below-barrier reduction
        let eps = 1e-9;
        assert_abs_diff_eq!(conv.w(eps), lower.w(b), epsilon = 1e-6);
        assert_abs_diff_eq!(conv.z(eps), lower.z(b), epsilon = 1e-6);
        assert_abs_diff_eq!(conv.z_bar(eps), lower.z_bar(b), epsilon = 1e-6);
        assert_relative_eq!(conv.w(-0.2), lower.w(b - 0.2), max_relative = 1e-12);
    }

    /// Reference values computed with 50-digit arithmetic from an independent
    /// implementation of the partial-fraction expansion (exact polynomial
    /// coefficients, `polyroots`, and the same closed-form sums evaluated in
    /// extended precision).
    #[test]
    fn pinned_reference_values() {
        let model = case1_model();
        let pair = ScalePair::new(&model, 0.05, 0.5).unwrap();
        assert_relative_eq!(pair.phi_q(), 0.175_069_791_541_669_46, max_relative = 1e-12);
        assert_relative_eq!(pair.phi_qr(), 1.009_193_533_859_495_5, max_relative = 1e-12);
        assert_relative_eq!(pair.lower().w(1.0), 2.057_567_988_137_030, max_relative = 1e-11);
        assert_relative_eq!(pair.lower().w(5.0), 6.430_167_514_983_926, max_relative = 1e-11);
        assert_relative_eq!(pair.upper().w(1.0), 3.375_292_194_844_242_5, max_relative = 1e-11);
        assert_relative_eq!(pair.lower().z(1.0), 1.074_095_661_822_315_9, max_relative = 1e-11);
        assert_relative_eq!(pair.lower().z_bar(1.0), 1.031_995_541_030_937_9, max_relative = 1e-11);
        assert_relative_eq!(pair.z_biv(1.0), 1.551_196_354_014_173_4, max_relative = 1e-11);

        let model = case2_model();
        let pair = ScalePair::new(&model, 0.05, 0.5).unwrap();
        assert_relative_eq!(pair.phi_q(), 2.584_403_331_614_368_2, max_relative = 1e-12);
        assert_relative_eq!(pair.phi_qr(), 4.615_918_541_790_642_5, max_relative = 1e-12);
        assert_relative_eq!(pair.lower().w(1.0), 60.663_241_404_720_03, max_relative = 1e-11);
        assert_relative_eq!(pair.lower().w(5.0), 1_919_675.758_846_227, max_relative = 1e-11);
        assert_relative_eq!(pair.upper().w(1.0), 378.352_992_791_470_44, max_relative = 1e-11);
        assert_relative_eq!(pair.lower().z(1.0), 2.038_161_536_070_983_4, max_relative = 1e-11);
        assert_relative_eq!(pair.lower().z_bar(1.0), 1.303_207_342_260_832_9, max_relative = 1e-11);
        assert_relative_eq!(pair.z_biv(1.0), 15.142_083_949_605_381, max_relative = 1e-11);
    }

    #[test]
    fn laplace_transform_round_trip() {
        // int_0^inf e^(-theta x) W^(s)(x) dx = 1 / (psi(theta) - s) for
        // theta > phi(s); the left side by adaptive quadrature over a
        // truncated range chosen so the dropped tail is below 1e-12 relative
        for model in [case1_model(), case2_model()] {
            for &s in &[0.05, 0.55] {
                let engine = ScaleEngine::new(&model, s).unwrap();
                let phi = engine.phi();
                for k in 0..10 {
                    let theta = phi + 0.5 + k as f64;
                    let horizon = 45.0 / (theta - phi);
                    let lhs = integrate(
                        |x| (-theta * x).exp() * engine.w(x),
                        0.0,
                        horizon,
                        1e-13,
                    )
                    .unwrap()
                    .value;
                    let rhs = 1.0 / (model.psi(theta) - s);
                    assert_relative_eq!(lhs, rhs, max_relative = 1e-6);
                }
            }
        }
    }

    #[test]
    fn w_log_derivative_decreases_to_phi() {
        for (model, x_max) in [(case1_model(), 60.0), (case2_model(), 15.0)] {
            let engine = ScaleEngine::new(&model, 0.05).unwrap();
            let phi = engine.phi();
            let mut prev = f64::INFINITY;
            let mut x = 0.05;
            while x <= x_max {
                let ratio = engine.w_prime_right(x) / engine.w(x);
                assert!(
                    ratio <= prev + 1e-12 * (1.0 + ratio.abs()),
                    "W'/W must be non-increasing (x = {x})"
                );
                assert!(ratio >= phi - 1e-12, "W'/W must stay above phi (x = {x})");
                prev = ratio;
                x += 0.5;
            }
            assert_relative_eq!(
                engine.w_prime_right(x_max) / engine.w(x_max),
                phi,
                max_relative = 1e-10
            );
        }
    }

    #[test]
    fn redundant_phase_type_representation_is_refused() {
        // Exp(1) written with two identical phases: chi and the numerator of
        // the jump transform share the factor (theta + 1), so a "root" of the
        // rational psi sits exactly on an eigenvalue of T
        let jumps = hyperexp(&[1.0, 1.0], &[0.5, 0.5]);
        let model = LevyModel::new(1.0, 0.0, 1.0, jumps).unwrap();
        let err = ScaleEngine::new(&model, 0.05).unwrap_err();
        assert!(
            matches!(err, Error::ConvergenceFailure(ref msg) if msg.contains("redundant")),
            "unexpected error: {err}"
        );
    }

    #[test]
    fn distinct_hyperexponential_is_accepted() {
        let jumps = hyperexp(&[1.0, 2.0], &[0.5, 0.5]);
        let model = LevyModel::new(1.0, 0.0, 1.0, jumps).unwrap();
        let engine = ScaleEngine::new(&model, 0.05).unwrap();
        assert_relative_eq!(engine.w(0.0), 1.0 / model.drift_c(), max_relative = 1e-10);
        assert_eq!(engine.roots().len(), 3);
    }

    #[test]
    fn small_r_levels_nearly_coincide_but_work() {
        // as r -> 0 every root of psi = q + r approaches a root of psi = q;
        // the pair must accept this (the amplification r v_j / (mu_j -
        // theta_i) stays O(1)) and still satisfy the collapse identities
        let model = case1_model();
        let pair = ScalePair::new(&model, 0.05, 1e-4).unwrap();
        let conv = pair.convolved(0.0).unwrap();
        for &y in &[0.5, 2.0, 5.0] {
            assert_relative_eq!(conv.w(y), pair.upper().w(y), max_relative = 1e-8);
            assert_relative_eq!(conv.z(y), pair.upper().z(y), max_relative = 1e-8);
        }
        let conv = pair.convolved(1.0).unwrap();
        // with a tiny observation rate the convolved functions stay close to
        // the plain level-q functions
        for &y in &[0.5, 2.0] {
            assert_relative_eq!(conv.w(y), pair.lower().w(y + 1.0), max_relative = 1e-3);
        }
    }

    #[test]
    fn invalid_pair_rates_are_rejected() {
        let model = case1_model();
        assert!(matches!(ScalePair::new(&model, 0.0, 0.5), Err(Error::InvalidConfig(_))));
        assert!(matches!(ScalePair::new(&model, 0.05, 0.0), Err(Error::InvalidConfig(_))));
        assert!(matches!(ScalePair::new(&model, -1.0, 0.5), Err(Error::InvalidConfig(_))));
        assert!(matches!(ScaleEngine::new(&model, -0.1), Err(Error::InvalidConfig(_))));
    }

    mod properties {
        use super::*;
        use proptest::prelude::*;

        fn arb_model() -> impl Strategy<Value = (LevyModel, f64)> {
            (
                0.3f64..2.0,          // drift
                prop_oneof![Just(0.0), 0.05f64..0.5], // sigma
                0.3f64..2.0,          // jump rate
                0.5f64..1.8,          // rate 1
                2.2f64..4.0,          // rate 2 (kept away from rate 1)
                0.1f64..0.9,          // mixing weight
                0.02f64..1.0,         // level s
            )
                .prop_map(|(c, sigma, lam, r1, r2, p, s)| {
                    let jumps = hyperexp(&[r1, r2], &[p, 1.0 - p]);
                    (LevyModel::new(c, sigma, lam, jumps).unwrap(), s)
                })
        }

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(64))]

            #[test]
            fn scale_function_invariants((model, s) in arb_model()) {
                let engine = ScaleEngine::new(&model, s).unwrap();
                let mut prev_w = 0.0;
                let mut prev_z = 1.0 - 1e-12;
                let mut prev_ratio = f64::INFINITY;
                for k in 0..=40 {
                    let x = 0.25 * k as f64;
                    let w = engine.w(x);
                    let z = engine.z(x);
                    // W(0) = 0 for unbounded variation, computed with rounding
                    prop_assert!(w > 0.0 || (x == 0.0 && w >= -1e-12));
                    prop_assert!(w >= prev_w - 1e-12 * (1.0 + w));
                    prop_assert!(z >= prev_z - 1e-12 * (1.0 + z));
                    if x > 0.0 {
                        let ratio = engine.w_prime_right(x) / w;
                        prop_assert!(ratio <= prev_ratio + 1e-10 * (1.0 + ratio.abs()));
                        prev_ratio = ratio;
                    }
                    prev_w = w;
                    prev_z = z;
                }
            }

            #[test]
            fn pair_invariants((model, s) in arb_model()) {
                let pair = ScalePair::new(&model, s, 0.5).unwrap();
                prop_assert!(pair.phi_qr() > pair.phi_q());
                let mut prev = 1.0 - 1e-12;
                for k in 0..=20 {
                    let x = 0.3 * k as f64;
                    let zb = pair.z_biv(x);
                    prop_assert!(zb >= prev - 1e-12 * (1.0 + zb));
                    prev = zb;
                }
            }
        }
    }
}
