//! Real-coefficient polynomial helpers for the rational Laplace-exponent
//! machinery: Faddeev–LeVerrier characteristic polynomial plus adjugate,
//! companion-matrix root finding, and Newton polishing.

use nalgebra::DMatrix;
use num_complex::Complex;

use crate::error::{Error, Result};

type C64 = Complex<f64>;

/// Characteristic polynomial of `a` (monic, coefficients ascending in the
/// indeterminate) together with the matrix coefficients of the adjugate of
/// `lambda I - a`: `adj(lambda I - a) = sum_k lambda^(m-k) M_k`, `k = 1..=m`.
pub fn char_poly_with_adjugate(a: &DMatrix<f64>) -> (Vec<f64>, Vec<DMatrix<f64>>) {
    let m = a.nrows();
    assert_eq!(m, a.ncols());
    let mut coeffs = vec![0.0; m + 1];
    coeffs[m] = 1.0;
    let mut mats = Vec::with_capacity(m);
    let mut mk = DMatrix::<f64>::identity(m, m);
    for k in 1..=m {
        let amk = a * &mk;
        let ck = -amk.trace() / k as f64;
        coeffs[m - k] = ck;
        mats.push(mk.clone());
        if k < m {
            mk = amk + DMatrix::<f64>::identity(m, m) * ck;
        }
    }
    (coeffs, mats)
}

/// Evaluate a polynomial with ascending real coefficients at a complex point,
/// returning `(p(z), p'(z))`.
pub fn horner(coeffs: &[f64], z: C64) -> (C64, C64) {
    let mut p = C64::new(0.0, 0.0);
    let mut dp = C64::new(0.0, 0.0);
    for &c in coeffs.iter().rev() {
        dp = dp * z + p;
        p = p * z + c;
    }
    (p, dp)
}

/// All complex roots of a real polynomial (ascending coefficients), found via
/// the companion matrix and polished by Newton iteration on the polynomial.
///
/// Leading coefficients that vanish are trimmed; an all-zero or constant
/// polynomial is rejected.
pub fn roots(coeffs: &[f64]) -> Result<Vec<C64>> {
    let scale = coeffs.iter().fold(0.0f64, |acc, c| acc.max(c.abs()));
    if scale == 0.0 {
        return Err(Error::ConvergenceFailure("zero polynomial has no isolated roots".into()));
    }
    let mut c: Vec<f64> = coeffs.to_vec();
    while c.last().is_some_and(|&v| v.abs() <= scale * 1e-300) {
        c.pop();
    }
    let n = c.len() - 1;
    if n == 0 {
        return Err(Error::ConvergenceFailure("constant polynomial has no roots".into()));
    }
    let lead = c[n];
    let monic: Vec<f64> = c.iter().map(|v| v / lead).collect();
    let mut out = Vec::with_capacity(n);
    if n == 1 {
        out.push(C64::new(-monic[0], 0.0));
        return Ok(out);
    }
    // companion matrix in the standard (bottom-row) form
    let mut comp = DMatrix::<f64>::zeros(n, n);
    for i in 1..n {
        comp[(i, i - 1)] = 1.0;
    }
    for i in 0..n {
        comp[(i, n - 1)] = -monic[i];
    }
    let eigs = comp.complex_eigenvalues();
    for &start in eigs.iter() {
        out.push(polish(&monic, start)?);
    }
    // snap conjugate symmetry: tiny imaginary parts become exactly real
    for z in out.iter_mut() {
        if z.im.abs() <= 1e-9 * (1.0 + z.re.abs()) {
            z.im = 0.0;
        }
    }
    Ok(out)
}

fn polish(monic: &[f64], start: C64) -> Result<C64> {
    let mut z = start;
    let mut best = z;
    let mut best_mag = f64::INFINITY;
    for _ in 0..64 {
        let (p, dp) = horner(monic, z);
        let mag = p.norm();
        if mag < best_mag {
            best_mag = mag;
            best = z;
        }
        if mag == 0.0 {
            return Ok(z);
        }
        if dp.norm() == 0.0 {
            break;
        }
        let step = p / dp;
        z -= step;
        if step.norm() <= 1e-16 * (1.0 + z.norm()) {
            let (p2, _) = horner(monic, z);
            if p2.norm() < best_mag {
                best = z;
            }
            return Ok(best);
        }
    }
    // Newton cycled; keep the best iterate if it is plausibly a root
    let tol = 1e-8 * poly_scale_at(monic, best);
    if best_mag <= tol {
        Ok(best)
    } else {
        Err(Error::ConvergenceFailure(format!(
            "root polish stalled near {best} with residual {best_mag:e}"
        )))
    }
}

/// Magnitude scale of the monic polynomial near `z`, used for residual tests.
fn poly_scale_at(monic: &[f64], z: C64) -> f64 {
    let r = z.norm().max(1.0);
    let mut s = 0.0;
    let mut rp = 1.0;
    for &c in monic {
        s += c.abs() * rp;
        rp *= r;
    }
    s.max(1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use nalgebra::DVector;

    #[test]
    fn adjugate_matches_direct_solve() {
        let a = DMatrix::from_row_slice(3, 3, &[-2.0, 1.0, 0.3, 0.5, -1.5, 0.2, 0.1, 0.4, -3.0]);
        let (chi, mats) = char_poly_with_adjugate(&a);
        let lambda: f64 = 0.7;
        // chi(lambda) and adj(lambda I - a) recombine to the inverse
        let mut chi_val = 0.0;
        for (k, &c) in chi.iter().enumerate() {
            chi_val += c * lambda.powi(k as i32);
        }
        let mut adj = DMatrix::<f64>::zeros(3, 3);
        let m = 3;
        for (k, mk) in mats.iter().enumerate() {
            adj += mk * lambda.powi((m - 1 - k) as i32);
        }
        let rhs = DVector::from_row_slice(&[0.3, -1.0, 2.0]);
        let direct = (DMatrix::identity(3, 3) * lambda - &a)
            .lu()
            .solve(&rhs)
            .unwrap();
        let via_adj = adj * &rhs / chi_val;
        for i in 0..3 {
            assert_abs_diff_eq!(direct[i], via_adj[i], epsilon = 1e-12);
        }
    }

    #[test]
    fn char_poly_of_diagonal() {
        let a = DMatrix::from_row_slice(2, 2, &[-1.0, 0.0, 0.0, -3.0]);
        let (chi, _) = char_poly_with_adjugate(&a);
        // (x + 1)(x + 3) = 3 + 4x + x^2
        assert_abs_diff_eq!(chi[0], 3.0, epsilon = 1e-14);
        assert_abs_diff_eq!(chi[1], 4.0, epsilon = 1e-14);
        assert_abs_diff_eq!(chi[2], 1.0, epsilon = 1e-14);
    }

    #[test]
    fn roots_of_cubic() {
        // (x - 1)(x - 2)(x + 3) = x^3 - 7x + 6
        let mut r = roots(&[6.0, -7.0, 0.0, 1.0]).unwrap();
        r.sort_by(|a, b| a.re.partial_cmp(&b.re).unwrap());
        assert_abs_diff_eq!(r[0].re, -3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(r[1].re, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(r[2].re, 2.0, epsilon = 1e-12);
        assert!(r.iter().all(|z| z.im == 0.0));
    }

    #[test]
    fn complex_pair_is_conjugate() {
        // x^2 + x + 1: roots -1/2 +- i sqrt(3)/2
        let r = roots(&[1.0, 1.0, 1.0]).unwrap();
        assert_eq!(r.len(), 2);
        assert_abs_diff_eq!(r[0].re, -0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(r[0].im.abs(), 3.0f64.sqrt() / 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!((r[0] + r[1]).im, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn linear_after_trim() {
        let r = roots(&[2.0, -4.0, 0.0, 0.0]).unwrap();
        assert_eq!(r.len(), 1);
        assert_abs_diff_eq!(r[0].re, 0.5, epsilon = 1e-14);
    }
}
