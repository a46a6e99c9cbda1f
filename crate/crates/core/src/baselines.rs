//! Reference designs: cache the most popular files, or fill each cache by
//! popularity-proportional draws without replacement.

use std::collections::HashMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1};

use crate::error::{Error, Result};
use crate::model::{CachingMarginals, PopularityModel};

/// Largest library for exact enumeration over subsets.
pub const EXACT_MAX_FILES: usize = 25;
/// Largest cache size for exact enumeration over ordered draws.
pub const EXACT_MAX_PREFIX: usize = 3;
/// Simpson nodes per unit of `ln t` in the quadrature method.
const NODES_PER_LOG_UNIT: f64 = 100.0;

fn check_budget(pop: &PopularityModel, k: usize) -> Result<()> {
    if k < 1 || k >= pop.len() {
        return Err(Error::Domain(format!(
            "cache size must satisfy 1 <= K < N, got K = {k}, N = {}",
            pop.len()
        )));
    }
    Ok(())
}

/// `t_n = 1` for the `K` most popular files (lower index wins ties).
pub fn most_popular_marginals(pop: &PopularityModel, k: usize) -> Result<CachingMarginals> {
    check_budget(pop, k)?;
    let mut t = vec![0.0; pop.len()];
    for &n in pop.ranking().iter().take(k) {
        t[n] = 1.0;
    }
    CachingMarginals::new(t, k)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum IidMethod {
    /// Enumeration of draw orders; needs `N ≤ 25` or `K ≤ 3`.
    Exact,
    /// One-dimensional integral over the exponential-race representation.
    Quadrature,
    MonteCarlo { draws: u64, seed: u64 },
}

/// Inclusion probabilities, with per-file standard errors for Monte Carlo.
#[derive(Debug, Clone, PartialEq)]
pub struct IidMarginals {
    pub marginals: CachingMarginals,
    pub std_error: Option<Vec<f64>>,
}

/// Inclusion probabilities when a cache is filled by `K` successive draws,
/// each proportional to popularity among the files not yet drawn.
pub fn iid_popularity_marginals(
    pop: &PopularityModel,
    k: usize,
    method: IidMethod,
) -> Result<IidMarginals> {
    check_budget(pop, k)?;
    let a = pop.probs();
    match method {
        IidMethod::Exact => {
            let t = if k <= EXACT_MAX_PREFIX {
                exact_by_prefixes(a, k)
            } else if a.len() <= EXACT_MAX_FILES {
                exact_by_subsets(a, k)
            } else {
                return Err(Error::TooLarge(format!(
                    "exact enumeration needs N <= {EXACT_MAX_FILES} or K <= {EXACT_MAX_PREFIX} \
                     (got N = {}, K = {k}); use the quadrature or Monte Carlo method",
                    a.len()
                )));
            };
            Ok(IidMarginals {
                marginals: normalized(t, k)?,
                std_error: None,
            })
        }
        IidMethod::Quadrature => Ok(IidMarginals {
            marginals: normalized(race_quadrature(a, k), k)?,
            std_error: None,
        }),
        IidMethod::MonteCarlo { draws, seed } => race_monte_carlo(a, k, draws, seed),
    }
}

/// Removes round-off so the budget holds to machine precision.
fn normalized(mut t: Vec<f64>, k: usize) -> Result<CachingMarginals> {
    let sum: f64 = t.iter().sum();
    for x in &mut t {
        *x = (*x * k as f64 / sum).min(1.0);
    }
    CachingMarginals::from_solver(t, k)
}

/// Depth-first walk over ordered draw sequences of length `K`.
fn exact_by_prefixes(a: &[f64], k: usize) -> Vec<f64> {
    fn walk(a: &[f64], k: usize, chosen: &mut Vec<usize>, removed: f64, prob: f64, t: &mut [f64]) {
        if chosen.len() == k {
            for &i in chosen.iter() {
                t[i] += prob;
            }
            return;
        }
        for i in 0..a.len() {
            if chosen.contains(&i) {
                continue;
            }
            chosen.push(i);
            walk(a, k, chosen, removed + a[i], prob * a[i] / (1.0 - removed), t);
            chosen.pop();
        }
    }
    let mut t = vec![0.0; a.len()];
    walk(a, k, &mut Vec::with_capacity(k), 0.0, 1.0, &mut t);
    t
}

/// Level-by-level recursion over unordered drawn sets:
/// `P(S) = Σ_{x∈S} P(S∖{x}) a_x / (1 − a(S∖{x}))`.
fn exact_by_subsets(a: &[f64], k: usize) -> Vec<f64> {
    let mass = |mask: u32| -> f64 {
        (0..a.len()).filter(|i| mask & (1 << i) != 0).map(|i| a[i]).sum()
    };
    let mut level: HashMap<u32, f64> = HashMap::from([(0u32, 1.0)]);
    for _ in 0..k {
        let mut next: HashMap<u32, f64> = HashMap::with_capacity(level.len() * 2);
        for (&mask, &p) in &level {
            let rest = 1.0 - mass(mask);
            for (i, &ai) in a.iter().enumerate() {
                if mask & (1 << i) == 0 {
                    *next.entry(mask | (1 << i)).or_insert(0.0) += p * ai / rest;
                }
            }
        }
        level = next;
    }
    let mut t = vec![0.0; a.len()];
    for (mask, p) in level {
        for (i, ti) in t.iter_mut().enumerate() {
            if mask & (1 << i) != 0 {
                *ti += p;
            }
        }
    }
    t
}

/// With independent keys `E_n / a_n`, the `K` smallest keys form a cache with
/// exactly the sequential-draw law. Hence
/// `t_i = ∫₀^∞ a_i e^{−a_i s} Pr[fewer than K other keys below s] ds`,
/// evaluated by Simpson's rule in `ln s`.
fn race_quadrature(a: &[f64], k: usize) -> Vec<f64> {
    let n = a.len();
    let a_max = a.iter().copied().fold(0.0, f64::max);
    let a_min = a.iter().copied().fold(f64::INFINITY, f64::min);
    // Below lo every integrand carries < 1e-14 mass; above hi every key has
    // fallen (e^{−40}).
    let (lo, hi) = ((1e-14 / a_max).ln(), (40.0 / a_min).ln());
    let mut steps = ((hi - lo) * NODES_PER_LOG_UNIT).ceil() as usize;
    steps += steps % 2;
    let h = (hi - lo) / steps as f64;
    let mut t = vec![0.0; n];
    let mut prefix = vec![0.0; (n + 1) * k];
    let mut suffix_cdf = vec![0.0; (n + 1) * k];
    let mut p = vec![0.0; n];
    for node in 0..=steps {
        let s = (lo + h * node as f64).exp();
        let weight = match node {
            0 => 1.0,
            _ if node == steps => 1.0,
            _ if node % 2 == 1 => 4.0,
            _ => 2.0,
        } * h / 3.0;
        for (pj, aj) in p.iter_mut().zip(a) {
            *pj = -(-aj * s).exp_m1();
        }
        // prefix[i][c] = Pr[c of the first i keys are below s], c < K.
        prefix[..k].fill(0.0);
        prefix[0] = 1.0;
        for i in 0..n {
            let (cur, next) = prefix[i * k..(i + 2) * k].split_at_mut(k);
            next[0] = cur[0] * (1.0 - p[i]);
            for c in 1..k {
                next[c] = cur[c] * (1.0 - p[i]) + cur[c - 1] * p[i];
            }
        }
        // suffix over files i.., stored as a CDF in c.
        let mut dist = vec![0.0; k];
        dist[0] = 1.0;
        let cdf = |d: &[f64], out: &mut [f64]| {
            let mut acc = 0.0;
            for (o, x) in out.iter_mut().zip(d) {
                acc += x;
                *o = acc;
            }
        };
        cdf(&dist, &mut suffix_cdf[n * k..]);
        for i in (0..n).rev() {
            for c in (1..k).rev() {
                dist[c] = dist[c] * (1.0 - p[i]) + dist[c - 1] * p[i];
            }
            dist[0] *= 1.0 - p[i];
            cdf(&dist, &mut suffix_cdf[i * k..(i + 1) * k]);
        }
        for i in 0..n {
            let pre = &prefix[i * k..(i + 1) * k];
            let suf = &suffix_cdf[(i + 1) * k..(i + 2) * k];
            let fewer: f64 = (0..k).map(|c| pre[c] * suf[k - 1 - c]).sum();
            // ds = s d(ln s)
            t[i] += weight * a[i] * s * (-a[i] * s).exp() * fewer;
        }
    }
    t
}

fn race_monte_carlo(a: &[f64], k: usize, draws: u64, seed: u64) -> Result<IidMarginals> {
    if draws == 0 {
        return Err(Error::Domain("Monte Carlo needs at least one draw".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut counts = vec![0u64; a.len()];
    let mut keys: Vec<(f64, usize)> = vec![(0.0, 0); a.len()];
    for _ in 0..draws {
        for (i, key) in keys.iter_mut().enumerate() {
            let e: f64 = Exp1.sample(&mut rng);
            *key = (e / a[i], i);
        }
        keys.select_nth_unstable_by(k - 1, |x, y| x.0.total_cmp(&y.0));
        for &(_, i) in &keys[..k] {
            counts[i] += 1;
        }
    }
    let d = draws as f64;
    let t: Vec<f64> = counts.iter().map(|&c| c as f64 / d).collect();
    let se = t.iter().map(|p| (p * (1.0 - p) / d).sqrt()).collect();
    Ok(IidMarginals {
        marginals: CachingMarginals::from_solver(t, k)?,
        std_error: Some(se),
    })
}
