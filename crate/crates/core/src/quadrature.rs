//! Adaptive Simpson quadrature on a finite interval.

use crate::error::{Error, Result};

/// Deepest bisection level before giving up.
pub const MAX_DEPTH: u32 = 48;
/// Interval-split budget per integral.
pub const MAX_SPLITS: usize = 200_000;

/// Integrates `f` over `[a, b]` to absolute tolerance `tol` using
/// Richardson-corrected adaptive Simpson.
pub fn adaptive_simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: f64) -> Result<f64> {
    let fa = f(a);
    let fb = f(b);
    let m = 0.5 * (a + b);
    let fm = f(m);
    let whole = simpson(a, b, fa, fm, fb);
    let mut state = State {
        failed: !whole.is_finite(),
        splits: 0,
    };
    let value = if state.failed {
        f64::NAN
    } else {
        recurse(&f, a, b, fa, fm, fb, whole, tol, MAX_DEPTH, &mut state)
    };
    if state.failed || !value.is_finite() {
        return Err(Error::Quadrature(format!(
            "no convergence on [{a}, {b}] to tolerance {tol:e}"
        )));
    }
    Ok(value)
}

struct State {
    failed: bool,
    splits: usize,
}

fn simpson(a: f64, b: f64, fa: f64, fm: f64, fb: f64) -> f64 {
    (b - a) / 6.0 * (fa + 4.0 * fm + fb)
}

#[allow(clippy::too_many_arguments)]
fn recurse<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
    state: &mut State,
) -> f64 {
    state.splits += 1;
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = simpson(a, m, fa, flm, fm);
    let right = simpson(m, b, fm, frm, fb);
    let delta = left + right - whole;
    if !delta.is_finite() {
        state.failed = true;
        return f64::NAN;
    }
    if delta.abs() <= 15.0 * tol {
        return left + right + delta / 15.0;
    }
    if depth == 0 || state.splits >= MAX_SPLITS || state.failed {
        state.failed = true;
        return left + right + delta / 15.0;
    }
    recurse(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1, state)
        + recurse(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1, state)
}
