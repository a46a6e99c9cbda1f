//! Drawing the content of one cache.

use rand::Rng;

use crate::error::Result;
use crate::model::{CachingMarginals, CombinationDistribution};

/// How the caches of one tier are filled.
#[derive(Debug, Clone, PartialEq)]
pub enum CacheDesign {
    /// Only the marginals are given; caches are drawn by the interval method.
    Marginals(CachingMarginals),
    /// An explicit distribution over `K`-subsets.
    Combinations(CombinationDistribution),
}

impl CacheDesign {
    pub fn cache_size(&self) -> usize {
        match self {
            CacheDesign::Marginals(t) => t.budget(),
            CacheDesign::Combinations(d) => d.cache_size(),
        }
    }

    pub fn n_files(&self) -> usize {
        match self {
            CacheDesign::Marginals(t) => t.len(),
            CacheDesign::Combinations(d) => d.n_files(),
        }
    }

    /// The combination distribution the sampler realizes.
    pub fn combinations(&self) -> Result<CombinationDistribution> {
        match self {
            CacheDesign::Marginals(t) => combinations_from_marginals(t),
            CacheDesign::Combinations(d) => Ok(d.clone()),
        }
    }
}

/// Precomputed cumulative tables for repeated draws.
#[derive(Debug, Clone)]
pub(crate) enum CacheSampler {
    Interval { ends: Vec<f64>, k: usize },
    Categorical { cumulative: Vec<f64>, subsets: Vec<Vec<usize>> },
}

impl CacheSampler {
    pub(crate) fn new(design: &CacheDesign) -> Self {
        match design {
            CacheDesign::Marginals(t) => CacheSampler::Interval {
                ends: interval_ends(t),
                k: t.budget(),
            },
            CacheDesign::Combinations(d) => {
                let mut acc = 0.0;
                let mut cumulative = Vec::with_capacity(d.entries().len());
                let mut subsets = Vec::with_capacity(d.entries().len());
                for (s, p) in d.entries() {
                    acc += p;
                    cumulative.push(acc);
                    subsets.push(s.clone());
                }
                CacheSampler::Categorical { cumulative, subsets }
            }
        }
    }

    /// Appends one cache (sorted file indices) to `out`.
    pub(crate) fn draw<R: Rng>(&self, rng: &mut R, out: &mut Vec<usize>) {
        match self {
            CacheSampler::Interval { ends, k } => select_interval(ends, *k, rng.gen::<f64>(), out),
            CacheSampler::Categorical { cumulative, subsets } => {
                let u = rng.gen::<f64>() * cumulative[cumulative.len() - 1];
                let i = cumulative.partition_point(|&c| c <= u).min(subsets.len() - 1);
                out.extend_from_slice(&subsets[i]);
            }
        }
    }
}

/// Right ends of the intervals `[S_{n−1}, S_n)` laid end to end, rescaled so
/// the last one is exactly `K`.
fn interval_ends(t: &CachingMarginals) -> Vec<f64> {
    let k = t.budget() as f64;
    let total: f64 = t.as_slice().iter().sum();
    let mut acc = 0.0;
    let mut ends: Vec<f64> = t
        .as_slice()
        .iter()
        .map(|x| {
            acc += x;
            acc * k / total
        })
        .collect();
    if let Some(last) = ends.last_mut() {
        *last = k;
    }
    ends
}

/// Files whose intervals contain one of `u, u+1, …, u+K−1`.
fn select_interval(ends: &[f64], k: usize, u: f64, out: &mut Vec<usize>) {
    let start = out.len();
    let mut file = 0;
    for m in 0..k {
        let point = u + m as f64;
        while file < ends.len() && ends[file] <= point {
            file += 1;
        }
        if file >= ends.len() {
            break;
        }
        out.push(file);
        file += 1;
    }
    // Round-off can leave the last point past the final interval; fill from
    // the top with files not yet chosen.
    let mut back = ends.len();
    while out.len() - start < k && back > 0 {
        back -= 1;
        if !out[start..].contains(&back) {
            out.push(back);
        }
    }
    out[start..].sort_unstable();
}

/// Draws one cache of `K` distinct files whose inclusion probabilities are
/// exactly the given marginals (systematic / interval sampling).
pub fn sample_cache<R: Rng>(marginals: &CachingMarginals, rng: &mut R) -> Vec<usize> {
    let mut out = Vec::with_capacity(marginals.budget());
    select_interval(&interval_ends(marginals), marginals.budget(), rng.gen::<f64>(), &mut out);
    out
}

/// Draws one cache from an explicit combination distribution.
pub fn sample_combination<R: Rng>(dist: &CombinationDistribution, rng: &mut R) -> Vec<usize> {
    let mut out = Vec::with_capacity(dist.cache_size());
    CacheSampler::new(&CacheDesign::Combinations(dist.clone())).draw(rng, &mut out);
    out
}

/// The distribution over `K`-subsets induced by the interval method: the
/// selected set only changes where `u` crosses the fractional part of a
/// cumulative sum, so at most `N + 1` subsets carry positive probability.
pub fn combinations_from_marginals(t: &CachingMarginals) -> Result<CombinationDistribution> {
    let ends = interval_ends(t);
    let mut cuts: Vec<f64> = ends.iter().map(|e| e.fract()).collect();
    cuts.push(0.0);
    cuts.push(1.0);
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    let mut entries: Vec<(Vec<usize>, f64)> = Vec::new();
    for w in cuts.windows(2) {
        let width = w[1] - w[0];
        if width <= 0.0 {
            continue;
        }
        let mut subset = Vec::with_capacity(t.budget());
        select_interval(&ends, t.budget(), 0.5 * (w[0] + w[1]), &mut subset);
        match entries.iter_mut().find(|(s, _)| *s == subset) {
            Some((_, p)) => *p += width,
            None => entries.push((subset, width)),
        }
    }
    let total: f64 = entries.iter().map(|(_, p)| p).sum();
    for (_, p) in &mut entries {
        *p /= total;
    }
    CombinationDistribution::new(entries, t.budget(), t.len())
}
