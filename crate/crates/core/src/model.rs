//! Domain types shared by every part of the crate: physical-layer parameters,
//! file popularity, per-tier caching marginals and explicit combination
//! distributions.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance on `Σ a_n = 1`.
pub const POPULARITY_SUM_TOL: f64 = 1e-12;
/// Tolerance on `Σ t_n = K` for caching marginals.
pub const BUDGET_TOL: f64 = 1e-9;
/// Tolerance on `Σ p_i = 1` for combination distributions.
pub const DISTRIBUTION_SUM_TOL: f64 = 1e-12;
/// Largest number of subsets an explicit combination distribution may hold.
pub const MAX_COMBINATIONS: usize = 1_000_000;

/// One of the two tiers of points of attachment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Tier {
    One,
    Two,
}

impl Tier {
    pub const BOTH: [Tier; 2] = [Tier::One, Tier::Two];

    /// The competing tier.
    pub fn other(self) -> Tier {
        match self {
            Tier::One => Tier::Two,
            Tier::Two => Tier::One,
        }
    }

    /// Zero-based index, for `[T; 2]` arrays.
    pub fn index(self) -> usize {
        match self {
            Tier::One => 0,
            Tier::Two => 1,
        }
    }

    /// Tier updated at (one-based) iteration `t` of the alternating schemes:
    /// `j = ((t + 1) mod 2) + 1`.
    pub fn for_iteration(t: usize) -> Tier {
        if (t + 1) % 2 == 0 {
            Tier::One
        } else {
            Tier::Two
        }
    }
}

impl fmt::Display for Tier {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tier::One => f.write_str("1"),
            Tier::Two => f.write_str("2"),
        }
    }
}

/// Physical-layer parameters and cache sizes of the two-tier network.
///
/// Densities are per m², powers and noise in watts, bandwidth in Hz and the
/// target rate in bit/s. Only `tau / w` enters the success test.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkConfig {
    pub lambda1: f64,
    pub lambda2: f64,
    pub lambda_u: f64,
    pub p1: f64,
    pub p2: f64,
    pub alpha: f64,
    pub w: f64,
    pub tau: f64,
    pub n0: f64,
    pub n_files: usize,
    pub k1: usize,
    pub k2: usize,
}

impl NetworkConfig {
    pub fn lambda(&self, tier: Tier) -> f64 {
        match tier {
            Tier::One => self.lambda1,
            Tier::Two => self.lambda2,
        }
    }

    pub fn power(&self, tier: Tier) -> f64 {
        match tier {
            Tier::One => self.p1,
            Tier::Two => self.p2,
        }
    }

    pub fn cache_size(&self, tier: Tier) -> usize {
        match tier {
            Tier::One => self.k1,
            Tier::Two => self.k2,
        }
    }

    /// `σ_j = P_j / P_{j̄}`; derived on every call so it can never go stale.
    pub fn sigma(&self, tier: Tier) -> f64 {
        self.power(tier) / self.power(tier.other())
    }

    pub fn sigma1(&self) -> f64 {
        self.sigma(Tier::One)
    }

    pub fn sigma2(&self) -> f64 {
        self.sigma(Tier::Two)
    }

    /// `2^{kτ/W} − 1`, the SINR threshold for load `k`.
    pub fn sinr_threshold(&self, load: usize) -> f64 {
        (load as f64 * self.tau / self.w).exp2() - 1.0
    }

    /// Returns a copy with the noise set from `P₂/N₀` given in dB.
    pub fn with_snr_db(&self, snr_db: f64) -> NetworkConfig {
        NetworkConfig {
            n0: self.p2 / 10f64.powf(snr_db / 10.0),
            ..self.clone()
        }
    }

    pub fn with_cache_sizes(&self, k1: usize, k2: usize) -> NetworkConfig {
        NetworkConfig {
            k1,
            k2,
            ..self.clone()
        }
    }

    /// Parameters of the two-tier verification setup: `N = 10`, `K = (3, 2)`,
    /// `P₁ = 10^{1.5} P₂`, at `P₂/N₀ = snr_db` and user density `lambda_u`.
    pub fn verification(snr_db: f64, lambda_u: f64) -> NetworkConfig {
        NetworkConfig {
            lambda1: 5e-7,
            lambda2: 3e-6,
            lambda_u,
            p1: 10f64.powf(1.5),
            p2: 1.0,
            alpha: 4.0,
            w: 20e6,
            tau: 35e4,
            n0: 0.0,
            n_files: 10,
            k1: 3,
            k2: 2,
        }
        .with_snr_db(snr_db)
    }

    /// Large-library setup used by the design comparisons: `N = 500`,
    /// `τ = 4·10⁴`, `P₁ = 10^{1.6} P₂`, noise-free and full load.
    pub fn large_scale(k1: usize, k2: usize) -> NetworkConfig {
        NetworkConfig {
            lambda1: 5e-7,
            lambda2: 3e-6,
            lambda_u: f64::INFINITY,
            p1: 10f64.powf(1.6),
            p2: 1.0,
            alpha: 4.0,
            w: 20e6,
            tau: 4e4,
            n0: 0.0,
            n_files: 500,
            k1,
            k2,
        }
    }
}

/// A violated configuration invariant.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigIssue {
    pub field: &'static str,
    pub message: String,
}

impl fmt::Display for ConfigIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.message)
    }
}

fn issue(field: &'static str, message: impl Into<String>) -> ConfigIssue {
    ConfigIssue {
        field,
        message: message.into(),
    }
}

/// Checks every invariant of `cfg` and `pop`, reporting all violations.
pub fn validate_config(
    cfg: &NetworkConfig,
    pop: &PopularityModel,
) -> std::result::Result<(), Vec<ConfigIssue>> {
    let mut issues = Vec::new();
    let positive = [
        ("lambda1", cfg.lambda1),
        ("lambda2", cfg.lambda2),
        ("p1", cfg.p1),
        ("p2", cfg.p2),
        ("w", cfg.w),
    ];
    for (field, v) in positive {
        if !(v > 0.0 && v.is_finite()) {
            issues.push(issue(field, format!("must be positive and finite, got {v}")));
        }
    }
    // lambda_u = +inf is the full-load limit and is accepted.
    if !(cfg.lambda_u >= 0.0) {
        issues.push(issue("lambda_u", format!("must be nonnegative, got {}", cfg.lambda_u)));
    }
    for (field, v) in [("tau", cfg.tau), ("n0", cfg.n0)] {
        if !(v >= 0.0 && v.is_finite()) {
            issues.push(issue(field, format!("must be nonnegative and finite, got {v}")));
        }
    }
    if !(cfg.alpha > 2.0 && cfg.alpha.is_finite()) {
        issues.push(issue("alpha", format!("alpha must exceed 2, got {}", cfg.alpha)));
    }
    if cfg.n_files < 2 {
        issues.push(issue("n_files", format!("need at least 2 files, got {}", cfg.n_files)));
    }
    for (field, k) in [("k1", cfg.k1), ("k2", cfg.k2)] {
        if k < 1 {
            issues.push(issue(field, "cache size must be at least 1"));
        } else if k >= cfg.n_files {
            issues.push(issue(
                field,
                format!("cache size must be < N (got {k}, N = {})", cfg.n_files),
            ));
        }
    }
    if pop.len() != cfg.n_files {
        issues.push(issue(
            "popularity",
            format!("has {} entries but n_files = {}", pop.len(), cfg.n_files),
        ));
    }
    if issues.is_empty() {
        Ok(())
    } else {
        Err(issues)
    }
}

/// File request probabilities `a_n`, each in `(0, 1)`, summing to one.
#[derive(Debug, Clone, PartialEq)]
pub struct PopularityModel {
    a: Vec<f64>,
}

impl PopularityModel {
    /// Zipf law `a_n ∝ n^{−γ}`.
    pub fn zipf(n_files: usize, gamma: f64) -> Result<Self> {
        if n_files < 2 {
            return Err(Error::Domain(format!("zipf needs at least 2 files, got {n_files}")));
        }
        if !(gamma >= 0.0 && gamma.is_finite()) {
            return Err(Error::Domain(format!("zipf exponent must be >= 0, got {gamma}")));
        }
        let weights: Vec<f64> = (1..=n_files).map(|n| (n as f64).powf(-gamma)).collect();
        let total: f64 = weights.iter().sum();
        Self::explicit(weights.into_iter().map(|w| w / total).collect())
    }

    /// An explicit probability vector. Ties are allowed.
    pub fn explicit(a: Vec<f64>) -> Result<Self> {
        if a.len() < 2 {
            return Err(Error::InvalidPopularity("need at least 2 files".into()));
        }
        if let Some((n, v)) = a.iter().enumerate().find(|(_, v)| !(**v > 0.0 && **v < 1.0)) {
            return Err(Error::InvalidPopularity(format!(
                "a[{}] = {v} is outside (0, 1)",
                n + 1
            )));
        }
        let sum: f64 = a.iter().sum();
        if (sum - 1.0).abs() > POPULARITY_SUM_TOL {
            return Err(Error::InvalidPopularity(format!("probabilities sum to {sum}, not 1")));
        }
        Ok(PopularityModel { a })
    }

    pub fn probs(&self) -> &[f64] {
        &self.a
    }

    pub fn len(&self) -> usize {
        self.a.len()
    }

    pub fn is_empty(&self) -> bool {
        self.a.is_empty()
    }

    /// File indices from most to least popular; ties keep the lower index first.
    pub fn ranking(&self) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..self.a.len()).collect();
        idx.sort_by(|&i, &j| self.a[j].total_cmp(&self.a[i]).then(i.cmp(&j)));
        idx
    }
}

/// Per-tier caching probabilities `T_{j,n}` on the capped simplex
/// `{t : 0 ≤ t_n ≤ 1, Σ t_n = K}`.
#[derive(Debug, Clone, PartialEq)]
pub struct CachingMarginals {
    t: Vec<f64>,
    budget: usize,
}

impl CachingMarginals {
    pub fn new(t: Vec<f64>, budget: usize) -> Result<Self> {
        if let Some((n, v)) = t.iter().enumerate().find(|(_, v)| !(**v >= 0.0 && **v <= 1.0)) {
            return Err(Error::InvalidMarginals(format!("t[{}] = {v} is outside [0, 1]", n + 1)));
        }
        let sum: f64 = t.iter().sum();
        if (sum - budget as f64).abs() > BUDGET_TOL {
            return Err(Error::InvalidMarginals(format!(
                "marginals sum to {sum}, expected cache size {budget}"
            )));
        }
        Ok(CachingMarginals { t, budget })
    }

    /// Like [`CachingMarginals::new`], but first clamps entries within
    /// rounding distance of the box into `[0, 1]`.
    pub(crate) fn from_solver(mut t: Vec<f64>, budget: usize) -> Result<Self> {
        for v in &mut t {
            if *v < 0.0 && *v > -1e-12 {
                *v = 0.0;
            } else if *v > 1.0 && *v < 1.0 + 1e-12 {
                *v = 1.0;
            }
        }
        Self::new(t, budget)
    }

    /// `t_n = K / N` for every file.
    pub fn uniform(n_files: usize, budget: usize) -> Result<Self> {
        if budget > n_files {
            return Err(Error::InvalidMarginals(format!(
                "cache size {budget} exceeds file count {n_files}"
            )));
        }
        Self::new(vec![budget as f64 / n_files as f64; n_files], budget)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.t
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.t
    }

    pub fn budget(&self) -> usize {
        self.budget
    }

    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    /// `max_n |t_n − u_n|`.
    pub fn max_abs_diff(&self, other: &CachingMarginals) -> f64 {
        self.t
            .iter()
            .zip(&other.t)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// An explicit caching distribution over `K`-subsets of the library.
///
/// File indices are zero-based and each subset is stored sorted.
#[derive(Debug, Clone, PartialEq)]
pub struct CombinationDistribution {
    entries: Vec<(Vec<usize>, f64)>,
    cache_size: usize,
    n_files: usize,
}

impl CombinationDistribution {
    pub fn new(entries: Vec<(Vec<usize>, f64)>, cache_size: usize, n_files: usize) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::InvalidDistribution("no combinations given".into()));
        }
        if entries.len() > MAX_COMBINATIONS {
            return Err(Error::TooLarge(format!(
                "{} combinations exceed the limit of {MAX_COMBINATIONS}",
                entries.len()
            )));
        }
        let mut normalized = Vec::with_capacity(entries.len());
        let mut total = 0.0;
        for (mut subset, p) in entries {
            subset.sort_unstable();
            if subset.len() != cache_size {
                return Err(Error::InvalidDistribution(format!(
                    "subset {subset:?} has {} files, expected {cache_size}",
                    subset.len()
                )));
            }
            if subset.windows(2).any(|w| w[0] == w[1]) {
                return Err(Error::InvalidDistribution(format!(
                    "subset {subset:?} repeats a file"
                )));
            }
            if subset.last().is_some_and(|&m| m >= n_files) {
                return Err(Error::InvalidDistribution(format!(
                    "subset {subset:?} references a file beyond N = {n_files}"
                )));
            }
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::InvalidDistribution(format!("probability {p} outside [0, 1]")));
            }
            total += p;
            normalized.push((subset, p));
        }
        if (total - 1.0).abs() > DISTRIBUTION_SUM_TOL {
            return Err(Error::InvalidDistribution(format!(
                "probabilities sum to {total}, not 1"
            )));
        }
        Ok(CombinationDistribution {
            entries: normalized,
            cache_size,
            n_files,
        })
    }

    /// Equal probability on every one of the `C(N, K)` subsets.
    pub fn uniform(n_files: usize, cache_size: usize) -> Result<Self> {
        if cache_size == 0 || cache_size > n_files {
            return Err(Error::Domain(format!(
                "cache size {cache_size} invalid for {n_files} files"
            )));
        }
        let count = binomial(n_files, cache_size);
        if count > MAX_COMBINATIONS as f64 {
            return Err(Error::TooLarge(format!(
                "C({n_files}, {cache_size}) = {count} combinations exceed the limit of {MAX_COMBINATIONS}"
            )));
        }
        let subsets = k_subsets(n_files, cache_size);
        let p = 1.0 / subsets.len() as f64;
        let entries = subsets.into_iter().map(|s| (s, p)).collect();
        Self::new(entries, cache_size, n_files)
    }

    pub fn entries(&self) -> &[(Vec<usize>, f64)] {
        &self.entries
    }

    pub fn cache_size(&self) -> usize {
        self.cache_size
    }

    pub fn n_files(&self) -> usize {
        self.n_files
    }
}

/// `t_n = Σ_{i : n ∈ subset_i} p_i`.
pub fn marginals_from_combinations(dist: &CombinationDistribution) -> CachingMarginals {
    let mut t = vec![0.0; dist.n_files];
    for (subset, p) in &dist.entries {
        for &n in subset {
            t[n] += p;
        }
    }
    // Each subset contributes exactly K units of mass, so the budget holds up
    // to the rounding of Σ p_i, which construction bounds by 1e-12 · K.
    CachingMarginals::from_solver(t.into_iter().map(|v| v.min(1.0)).collect(), dist.cache_size)
        .expect("combination distribution always induces feasible marginals")
}

/// All `k`-subsets of `{0, …, n−1}` in lexicographic order.
pub fn k_subsets(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    if k > n {
        return out;
    }
    let mut current: Vec<usize> = (0..k).collect();
    loop {
        out.push(current.clone());
        // Find the rightmost position that can still advance.
        let mut i = k;
        while i > 0 && current[i - 1] == n - k + i - 1 {
            i -= 1;
        }
        if i == 0 {
            return out;
        }
        current[i - 1] += 1;
        for j in i..k {
            current[j] = current[j - 1] + 1;
        }
    }
}

/// `C(n, k)` as a float (exact for the sizes we enumerate).
pub fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fig2() -> (NetworkConfig, PopularityModel) {
        (
            NetworkConfig::verification(120.0, 1e-5),
            PopularityModel::zipf(10, 1.0).unwrap(),
        )
    }

    #[test]
    fn valid_config_passes() {
        let (cfg, pop) = fig2();
        assert!(validate_config(&cfg, &pop).is_ok());
    }

    #[test]
    fn alpha_two_is_rejected() {
        let (mut cfg, pop) = fig2();
        cfg.alpha = 2.0;
        let issues = validate_config(&cfg, &pop).unwrap_err();
        assert_eq!(issues.len(), 1);
        assert!(issues[0].message.contains("alpha must exceed 2"));
    }

    #[test]
    fn cache_equal_to_library_is_rejected() {
        let (mut cfg, pop) = fig2();
        cfg.k1 = cfg.n_files;
        let issues = validate_config(&cfg, &pop).unwrap_err();
        assert_eq!(issues[0].field, "k1");
        assert!(issues[0].message.contains("cache size must be < N"));
    }

    #[test]
    fn every_violation_is_reported() {
        let (mut cfg, pop) = fig2();
        cfg.alpha = 1.5;
        cfg.k2 = 0;
        cfg.lambda1 = -1.0;
        cfg.n_files = 11;
        let issues = validate_config(&cfg, &pop).unwrap_err();
        let fields: Vec<_> = issues.iter().map(|i| i.field).collect();
        assert_eq!(fields, ["lambda1", "alpha", "k2", "popularity"]);
    }

    #[test]
    fn sigma_is_derived() {
        let (cfg, _) = fig2();
        assert!((cfg.sigma1() * cfg.sigma2() - 1.0).abs() < 1e-15);
        assert!((cfg.sigma1() - 10f64.powf(1.5)).abs() < 1e-12);
    }

    #[test]
    fn zipf_is_strictly_decreasing_and_normalized() {
        let pop = PopularityModel::zipf(50, 0.8).unwrap();
        let a = pop.probs();
        assert!(a.windows(2).all(|w| w[0] > w[1]));
        assert!((a.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn explicit_popularity_accepts_ties() {
        let pop = PopularityModel::explicit(vec![0.4, 0.3, 0.3]).unwrap();
        assert_eq!(pop.ranking(), vec![0, 1, 2]);
        assert!(PopularityModel::explicit(vec![0.5, 0.6]).is_err());
        assert!(PopularityModel::explicit(vec![1.0, 0.0]).is_err());
    }

    #[test]
    fn uniform_over_pairs_of_three() {
        let dist = CombinationDistribution::uniform(3, 2).unwrap();
        assert_eq!(dist.entries().len(), 3);
        let t = marginals_from_combinations(&dist);
        for v in t.as_slice() {
            assert!((v - 2.0 / 3.0).abs() < 1e-15);
        }
    }

    #[test]
    fn degenerate_distribution() {
        let dist = CombinationDistribution::new(vec![(vec![0, 1], 1.0)], 2, 3).unwrap();
        assert_eq!(marginals_from_combinations(&dist).as_slice(), &[1.0, 1.0, 0.0]);
    }

    #[test]
    fn two_subset_distribution() {
        let dist =
            CombinationDistribution::new(vec![(vec![0, 1], 0.7), (vec![0, 2], 0.3)], 2, 3).unwrap();
        let t = marginals_from_combinations(&dist);
        let expected = [1.0, 0.7, 0.3];
        for (v, e) in t.as_slice().iter().zip(expected) {
            assert!((v - e).abs() < 1e-15);
        }
    }

    #[test]
    fn combination_validation() {
        assert!(CombinationDistribution::new(vec![(vec![0, 0], 1.0)], 2, 3).is_err());
        assert!(CombinationDistribution::new(vec![(vec![0, 3], 1.0)], 2, 3).is_err());
        assert!(CombinationDistribution::new(vec![(vec![0], 1.0)], 2, 3).is_err());
        assert!(CombinationDistribution::new(vec![(vec![0, 1], 0.5)], 2, 3).is_err());
        assert!(matches!(
            CombinationDistribution::uniform(60, 30),
            Err(Error::TooLarge(_))
        ));
    }

    #[test]
    fn subsets_are_enumerated_completely() {
        let s = k_subsets(5, 3);
        assert_eq!(s.len(), 10);
        assert_eq!(s[0], vec![0, 1, 2]);
        assert_eq!(s[9], vec![2, 3, 4]);
        assert_eq!(binomial(10, 3), 120.0);
    }

    #[test]
    fn tier_schedule_starts_with_tier_one() {
        assert_eq!(Tier::for_iteration(1), Tier::One);
        assert_eq!(Tier::for_iteration(2), Tier::Two);
        assert_eq!(Tier::for_iteration(3), Tier::One);
    }

    #[test]
    fn marginals_validation() {
        assert!(CachingMarginals::new(vec![0.5, 0.5, 1.0], 2).is_ok());
        assert!(CachingMarginals::new(vec![0.5, 0.6, 1.0], 2).is_err());
        assert!(CachingMarginals::new(vec![-0.1, 1.1, 1.0], 2).is_err());
    }
}
