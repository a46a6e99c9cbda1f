use crate::error::{Error, Result};
use crate::model::{marginals_from_combinations, CachingMarginals, CombinationDistribution};
use crate::model::{NetworkConfig, PopularityModel, Tier};

use super::b_coeff;

/// Distribution of the number of distinct files the serving POA transmits;
/// `probs()[k − 1] = Pr[load = k]` for `k = 1..=K_j`.
#[derive(Debug, Clone, PartialEq)]
pub struct LoadPmf {
    probs: Vec<f64>,
}

impl LoadPmf {
    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn mean(&self) -> f64 {
        self.probs
            .iter()
            .enumerate()
            .map(|(i, p)| (i + 1) as f64 * p)
            .sum()
    }
}

/// Distribution of the number of successes among independent Bernoulli
/// trials with the given success probabilities, by O(K²) convolution.
pub fn poisson_binomial(success: &[f64]) -> Vec<f64> {
    let mut dist = vec![0.0; success.len() + 1];
    dist[0] = 1.0;
    for (i, &p) in success.iter().enumerate() {
        for k in (1..=i + 1).rev() {
            dist[k] = dist[k] * (1.0 - p) + dist[k - 1] * p;
        }
        dist[0] *= 1.0 - p;
    }
    dist
}

/// Conditional load p.m.f. at the POA serving a request for `file`
/// (zero-based) in tier `tier`, whose caches follow `dist_j`; `t_jbar` are the
/// other tier's marginals.
pub fn load_pmf(
    cfg: &NetworkConfig,
    pop: &PopularityModel,
    tier: Tier,
    dist_j: &CombinationDistribution,
    t_jbar: &CachingMarginals,
    file: usize,
) -> Result<LoadPmf> {
    let t_j = marginals_from_combinations(dist_j);
    let b = no_request_probs(cfg, pop, tier, t_j.as_slice(), t_jbar.as_slice());
    load_pmf_from(&b, dist_j, t_j.as_slice()[file], file)
}

/// `b_{j,m}` for every file cached with positive probability in tier `tier`;
/// other entries are unused and set to 1.
pub(crate) fn no_request_probs(
    cfg: &NetworkConfig,
    pop: &PopularityModel,
    tier: Tier,
    t_j: &[f64],
    t_jbar: &[f64],
) -> Vec<f64> {
    t_j.iter()
        .zip(t_jbar)
        .enumerate()
        .map(|(m, (&tj, &tb))| {
            if tj > 0.0 {
                b_coeff(cfg, pop, tier, m, tj, tb)
            } else {
                1.0
            }
        })
        .collect()
}

/// Mixture over the combinations containing `file` of the Poisson-binomial
/// count of other cached files that are also requested.
pub(crate) fn load_pmf_from(
    b: &[f64],
    dist_j: &CombinationDistribution,
    t_jn: f64,
    file: usize,
) -> Result<LoadPmf> {
    if !(t_jn > 0.0) {
        return Err(Error::Domain(format!(
            "file {} is never cached in this tier, so it has no serving POA",
            file + 1
        )));
    }
    let k = dist_j.cache_size();
    let mut probs = vec![0.0; k];
    let mut success = Vec::with_capacity(k);
    for (subset, p) in dist_j.entries() {
        if *p == 0.0 || subset.binary_search(&file).is_err() {
            continue;
        }
        success.clear();
        success.extend(subset.iter().filter(|&&m| m != file).map(|&m| 1.0 - b[m]));
        for (slot, q) in probs.iter_mut().zip(poisson_binomial(&success)) {
            *slot += p / t_jn * q;
        }
    }
    Ok(LoadPmf { probs })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Explicit enumeration over every subset of the other cached files.
    fn enumerate_subsets(success: &[f64]) -> Vec<f64> {
        let n = success.len();
        let mut dist = vec![0.0; n + 1];
        for mask in 0u32..(1 << n) {
            let mut prob = 1.0;
            for (i, p) in success.iter().enumerate() {
                prob *= if mask & (1 << i) != 0 { *p } else { 1.0 - p };
            }
            dist[mask.count_ones() as usize] += prob;
        }
        dist
    }

    #[test]
    fn single_file_cache_has_unit_load() {
        let dist = CombinationDistribution::uniform(4, 1).unwrap();
        let b = vec![0.3; 4];
        let pmf = load_pmf_from(&b, &dist, 0.25, 2).unwrap();
        assert_eq!(pmf.probs(), &[1.0]);
    }

    #[test]
    fn single_combination_is_one_bernoulli() {
        let dist = CombinationDistribution::new(vec![(vec![0, 3], 1.0)], 2, 5).unwrap();
        let b = vec![0.9, 0.8, 0.7, 0.35, 0.5];
        let pmf = load_pmf_from(&b, &dist, 1.0, 0).unwrap();
        assert!((pmf.probs()[0] - 0.35).abs() < 1e-15);
        assert!((pmf.probs()[1] - 0.65).abs() < 1e-15);
    }

    #[test]
    fn uncached_file_is_an_error() {
        let dist = CombinationDistribution::new(vec![(vec![0, 1], 1.0)], 2, 3).unwrap();
        assert!(load_pmf_from(&[0.5; 3], &dist, 0.0, 2).is_err());
    }

    #[test]
    fn k4_matches_enumeration() {
        let success = [0.13, 0.58, 0.91];
        let dp = poisson_binomial(&success);
        let brute = enumerate_subsets(&success);
        for (a, b) in dp.iter().zip(&brute) {
            assert!((a - b).abs() <= 1e-12);
        }
    }

    #[test]
    fn uniform_mixture_sums_to_one() {
        let cfg = NetworkConfig::verification(120.0, 3e-5);
        let pop = PopularityModel::zipf(10, 1.0).unwrap();
        let d1 = CombinationDistribution::uniform(10, 3).unwrap();
        let t2 = CachingMarginals::uniform(10, 2).unwrap();
        for n in 0..10 {
            let pmf = load_pmf(&cfg, &pop, Tier::One, &d1, &t2, n).unwrap();
            assert_eq!(pmf.probs().len(), 3);
            assert!((pmf.probs().iter().sum::<f64>() - 1.0).abs() < 1e-10);
            assert!(pmf.mean() >= 1.0 && pmf.mean() <= 3.0);
        }
    }

    proptest! {
        #[test]
        fn dp_matches_enumeration(success in prop::collection::vec(0.0f64..=1.0, 0..6)) {
            let dp = poisson_binomial(&success);
            let brute = enumerate_subsets(&success);
            for (a, b) in dp.iter().zip(&brute) {
                prop_assert!((a - b).abs() <= 1e-12);
            }
            prop_assert!((dp.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }
}
