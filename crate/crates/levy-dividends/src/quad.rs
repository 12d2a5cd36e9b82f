//! Adaptive Simpson quadrature.
//!
//! Small, self-contained integrator used for the jump term of the generator
//! and as an independent oracle in tests.  Panels are split recursively until
//! the Richardson error estimate `|S_fine - S_coarse| / 15` meets the local
//! tolerance budget; the extrapolated value is returned.  Integrands with
//! isolated kinks converge too, just with more panels near the kink, but
//! callers that know their breakpoints should pass them explicitly.

use crate::error::{Error, Result};

/// Result of an adaptive integration.
#[derive(Debug, Clone, Copy)]
pub struct Quadrature {
    pub value: f64,
    /// Sum of the per-panel Richardson estimates that were accepted.
    pub error_estimate: f64,
    pub evaluations: usize,
}

const MAX_DEPTH: u32 = 48;

struct State<'a, F> {
    f: &'a mut F,
    evaluations: usize,
    error_accum: f64,
    failed: Option<(f64, f64, f64)>, // (a, b, estimate) of the worst rejected panel
}

fn simpson(fa: f64, fm: f64, fb: f64, h: f64) -> f64 {
    h / 6.0 * (fa + 4.0 * fm + fb)
}

fn refine<F: FnMut(f64) -> f64>(
    st: &mut State<'_, F>,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = (st.f)(lm);
    let frm = (st.f)(rm);
    st.evaluations += 2;
    let left = simpson(fa, flm, fm, m - a);
    let right = simpson(fm, frm, fb, b - m);
    let est = (left + right - whole) / 15.0;
    if est.abs() <= tol || (b - a) < f64::EPSILON * (a.abs() + b.abs()) {
        st.error_accum += est.abs();
        return left + right + est;
    }
    if depth >= MAX_DEPTH {
        let worst = st.failed.map(|(_, _, e)| e).unwrap_or(0.0);
        if est.abs() > worst {
            st.failed = Some((a, b, est.abs()));
        }
        st.error_accum += est.abs();
        return left + right + est;
    }
    let half = 0.5 * tol;
    refine(st, a, m, fa, flm, fm, left, half, depth + 1)
        + refine(st, m, b, fm, frm, fb, right, half, depth + 1)
}

/// Integrate `f` over `[a, b]` to absolute tolerance `tol`.
pub fn integrate<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, tol: f64) -> Result<Quadrature> {
    integrate_split(&mut f, &[a, b], tol)
}

/// Integrate over consecutive panels `[pts[0], pts[1]], ..., dropping empty
/// ones; `pts` must be sorted.  The tolerance is split evenly across panels.
pub fn integrate_with_breakpoints<F: FnMut(f64) -> f64>(
    mut f: F,
    pts: &[f64],
    tol: f64,
) -> Result<Quadrature> {
    integrate_split(&mut f, pts, tol)
}

fn integrate_split<F: FnMut(f64) -> f64>(f: &mut F, pts: &[f64], tol: f64) -> Result<Quadrature> {
    assert!(pts.len() >= 2, "need at least one panel");
    assert!(
        pts.windows(2).all(|w| w[0] <= w[1]),
        "breakpoints must be sorted"
    );
    let panels: Vec<(f64, f64)> = pts
        .windows(2)
        .filter(|w| w[1] > w[0])
        .map(|w| (w[0], w[1]))
        .collect();
    if panels.is_empty() {
        return Ok(Quadrature { value: 0.0, error_estimate: 0.0, evaluations: 0 });
    }
    let local = tol / panels.len() as f64;
    let mut st = State { f, evaluations: 0, error_accum: 0.0, failed: None };
    let mut total = 0.0;
    for (a, b) in panels {
        let m = 0.5 * (a + b);
        let fa = (st.f)(a);
        let fm = (st.f)(m);
        let fb = (st.f)(b);
        st.evaluations += 3;
        let whole = simpson(fa, fm, fb, b - a);
        total += refine(&mut st, a, b, fa, fm, fb, whole, local, 0);
    }
    if let Some((a, b, estimate)) = st.failed {
        return Err(Error::QuadratureFailure { a, b, estimate, tol });
    }
    Ok(Quadrature { value: total, error_estimate: st.error_accum, evaluations: st.evaluations })
}
