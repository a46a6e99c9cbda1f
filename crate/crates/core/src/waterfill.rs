//! Budget-constrained allocations of the form `T_n(ν)`, non-increasing in the
//! multiplier `ν`, solved for `Σ T_n(ν) = K` by bisection.
//!
//! Every closed-form update in the crate (projection, BSUM step, best
//! response, equal-cache relaxation) is an instance of this.

use crate::error::{Error, Result};
use crate::model::CachingMarginals;

/// Target budget residual `|Σ T_n − K|`.
pub const BUDGET_RESIDUAL: f64 = 1e-10;
const MAX_BISECTIONS: usize = 400;

/// Finds `ν ∈ [lo, hi]` with `Σ alloc(n, ν) = budget` and returns the
/// allocation. `alloc` must be continuous and non-increasing in `ν`, with
/// `Σ alloc(·, lo) ≥ budget ≥ Σ alloc(·, hi)`.
pub fn solve_multiplier<F>(n: usize, budget: f64, mut lo: f64, mut hi: f64, alloc: F) -> (f64, Vec<f64>)
where
    F: Fn(usize, f64) -> f64,
{
    let eval = |nu: f64| -> (f64, Vec<f64>) {
        let t: Vec<f64> = (0..n).map(|i| alloc(i, nu)).collect();
        (t.iter().sum(), t)
    };
    let mut best = eval(0.5 * (lo + hi));
    let mut best_nu = 0.5 * (lo + hi);
    for _ in 0..MAX_BISECTIONS {
        let mid = 0.5 * (lo + hi);
        let (sum, t) = eval(mid);
        if (sum - budget).abs() < (best.0 - budget).abs() {
            best = (sum, t);
            best_nu = mid;
        }
        if (sum - budget).abs() <= 0.01 * BUDGET_RESIDUAL || mid <= lo || mid >= hi {
            break;
        }
        if sum > budget {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    (best_nu, best.1)
}

/// Spreads the residual budget over the coordinates strictly inside
/// `(0, 1)`, keeping the box. Used to remove bisection round-off.
pub(crate) fn polish_budget(t: &mut [f64], budget: f64) {
    for _ in 0..4 {
        let residual = budget - t.iter().sum::<f64>();
        if residual == 0.0 {
            return;
        }
        let free: Vec<usize> = (0..t.len()).filter(|&i| t[i] > 0.0 && t[i] < 1.0).collect();
        if free.is_empty() {
            return;
        }
        let step = residual / free.len() as f64;
        for i in free {
            t[i] = (t[i] + step).clamp(0.0, 1.0);
        }
    }
}

/// Euclidean projection of `v` onto `{t : 0 ≤ t_n ≤ 1, Σ t_n = K}`:
/// `t_n = min{[v_n − ν]⁺, 1}`.
pub fn project_capped_simplex(v: &[f64], budget: usize) -> Result<CachingMarginals> {
    if budget < 1 || budget >= v.len() {
        return Err(Error::Domain(format!(
            "projection needs 1 <= K < N, got K = {budget}, N = {}",
            v.len()
        )));
    }
    if let Some(x) = v.iter().find(|x| !x.is_finite()) {
        return Err(Error::Domain(format!("cannot project non-finite value {x}")));
    }
    let k = budget as f64;
    let lo = v.iter().copied().fold(f64::INFINITY, f64::min) - 1.0;
    let hi = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let clip = |x: f64, nu: f64| (x - nu).clamp(0.0, 1.0);
    let (nu, _) = solve_multiplier(v.len(), k, lo, hi, |i, nu| clip(v[i], nu));
    // The active set is now known; solve for ν exactly on it.
    let (mut free_sum, mut free, mut capped) = (0.0, 0usize, 0usize);
    for &x in v {
        let t = x - nu;
        if t >= 1.0 {
            capped += 1;
        } else if t > 0.0 {
            free += 1;
            free_sum += x;
        }
    }
    let nu = if free > 0 {
        (free_sum - (k - capped as f64)) / free as f64
    } else {
        nu
    };
    let mut t: Vec<f64> = v.iter().map(|&x| clip(x, nu)).collect();
    polish_budget(&mut t, k);
    CachingMarginals::from_solver(t, budget)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
        a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
    }

    #[test]
    fn feasible_point_is_fixed() {
        let v = [0.2, 0.7, 0.1, 1.0];
        let t = project_capped_simplex(&v, 2).unwrap();
        assert!(close(t.as_slice(), &v, 1e-12));
    }

    #[test]
    fn hand_solved_interior() {
        let t = project_capped_simplex(&[0.9, 0.8, 0.1], 1).unwrap();
        assert!(close(t.as_slice(), &[0.55, 0.45, 0.0], 1e-12), "{t:?}");
    }

    #[test]
    fn hand_solved_with_cap() {
        let t = project_capped_simplex(&[1.2, 0.9, 0.5, 0.2], 2).unwrap();
        assert!(close(t.as_slice(), &[1.0, 0.7, 0.3, 0.0], 1e-12), "{t:?}");
    }

    #[test]
    fn rejects_bad_budget() {
        assert!(project_capped_simplex(&[0.5, 0.5], 2).is_err());
        assert!(project_capped_simplex(&[0.5, 0.5], 0).is_err());
    }

    #[test]
    fn multiplier_finds_linear_root() {
        let (nu, t) = solve_multiplier(3, 1.5, -10.0, 10.0, |_, nu| (1.0 - nu).clamp(0.0, 1.0));
        assert!((nu - 0.5).abs() < 1e-9);
        assert!((t.iter().sum::<f64>() - 1.5).abs() < 1e-10);
    }

    proptest! {
        #[test]
        fn projection_is_feasible_and_nearest(
            v in prop::collection::vec(-2.0f64..3.0, 3..12),
            k_frac in 0.0f64..1.0,
            probe in prop::collection::vec(0.0f64..1.0, 12),
        ) {
            let n = v.len();
            let k = 1 + ((n - 2) as f64 * k_frac) as usize;
            let t = project_capped_simplex(&v, k).unwrap();
            let t = t.as_slice();
            prop_assert!((t.iter().sum::<f64>() - k as f64).abs() <= 1e-10);
            prop_assert!(t.iter().all(|x| (0.0..=1.0).contains(x)));
            // Any other feasible point is no closer to v.
            let other = project_capped_simplex(&probe[..n], k).unwrap();
            let d = |p: &[f64]| p.iter().zip(&v).map(|(a, b)| (a - b).powi(2)).sum::<f64>();
            prop_assert!(d(t) <= d(other.as_slice()) + 1e-9);
        }
    }
}
