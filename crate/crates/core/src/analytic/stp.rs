use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{marginals_from_combinations, CachingMarginals, CombinationDistribution};
use crate::model::{NetworkConfig, PopularityModel, Tier};

use super::load::{load_pmf_from, no_request_probs};
use super::{f_jk_with, theta_coeffs, theta_table, ThetaCoefficients};

/// Total successful transmission probability and its per-tier split.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StpBreakdown {
    pub q_total: f64,
    pub q_tier1: f64,
    pub q_tier2: f64,
}

impl StpBreakdown {
    pub fn from_tiers(q_tier1: f64, q_tier2: f64) -> Self {
        StpBreakdown {
            q_total: q_tier1 + q_tier2,
            q_tier1,
            q_tier2,
        }
    }

    pub fn tier(&self, tier: Tier) -> f64 {
        match tier {
            Tier::One => self.q_tier1,
            Tier::Two => self.q_tier2,
        }
    }
}

/// General-region STP for explicit combination distributions in both tiers,
/// under finite noise and user density.
pub fn stp_general(
    cfg: &NetworkConfig,
    pop: &PopularityModel,
    dist1: &CombinationDistribution,
    dist2: &CombinationDistribution,
) -> Result<StpBreakdown> {
    check_design_shape(cfg, pop, dist1, dist2)?;
    let t = [
        marginals_from_combinations(dist1),
        marginals_from_combinations(dist2),
    ];
    let dists = [dist1, dist2];
    let mut q = [0.0; 2];
    for tier in Tier::BOTH {
        let (t_j, t_jbar) = (t[tier.index()].as_slice(), t[tier.other().index()].as_slice());
        let thetas = theta_table(cfg, tier)?;
        let b = no_request_probs(cfg, pop, tier, t_j, t_jbar);
        let mut total = 0.0;
        for (n, &a_n) in pop.probs().iter().enumerate() {
            let (x, y) = (t_j[n], t_jbar[n]);
            if x == 0.0 {
                continue;
            }
            let pmf = load_pmf_from(&b, dists[tier.index()], x, n)?;
            let mut success = 0.0;
            for (k, (&p_k, theta)) in pmf.probs().iter().zip(&thetas).enumerate() {
                if p_k > 0.0 {
                    success += p_k * f_jk_with(cfg, tier, k + 1, theta, x, y)?;
                }
            }
            total += a_n * x * success;
        }
        q[tier.index()] = total;
    }
    Ok(StpBreakdown::from_tiers(q[0], q[1]))
}

fn check_design_shape(
    cfg: &NetworkConfig,
    pop: &PopularityModel,
    dist1: &CombinationDistribution,
    dist2: &CombinationDistribution,
) -> Result<()> {
    if pop.len() != cfg.n_files {
        return Err(Error::Domain(format!(
            "popularity has {} files, config has {}",
            pop.len(),
            cfg.n_files
        )));
    }
    for (tier, dist) in [(Tier::One, dist1), (Tier::Two, dist2)] {
        if dist.n_files() != cfg.n_files || dist.cache_size() != cfg.cache_size(tier) {
            return Err(Error::InvalidDistribution(format!(
                "tier {tier} design has N = {}, K = {}; config has N = {}, K = {}",
                dist.n_files(),
                dist.cache_size(),
                cfg.n_files,
                cfg.cache_size(tier)
            )));
        }
    }
    Ok(())
}

/// The high-SNR, full-load objective `q∞(T₁, T₂) = q₁,∞ + q₂,∞` with its
/// coefficients evaluated once.
#[derive(Debug, Clone, PartialEq)]
pub struct AsymptoticModel {
    a: Vec<f64>,
    theta: [ThetaCoefficients; 2],
    budget: [usize; 2],
}

impl AsymptoticModel {
    pub fn new(cfg: &NetworkConfig, pop: &PopularityModel) -> Result<Self> {
        if pop.len() != cfg.n_files {
            return Err(Error::Domain(format!(
                "popularity has {} files, config has {}",
                pop.len(),
                cfg.n_files
            )));
        }
        let theta = [
            theta_coeffs(cfg, Tier::One, cfg.k1)?,
            theta_coeffs(cfg, Tier::Two, cfg.k2)?,
        ];
        Self::from_parts(pop.probs().to_vec(), theta, [cfg.k1, cfg.k2])
    }

    /// Builds the objective from explicit coefficients.
    pub fn from_parts(a: Vec<f64>, theta: [ThetaCoefficients; 2], budget: [usize; 2]) -> Result<Self> {
        for (tier, th) in Tier::BOTH.iter().zip(&theta) {
            if !(th.theta1 > 0.0 && th.theta2 >= 0.0 && th.theta3 >= 0.0) {
                return Err(Error::Domain(format!(
                    "tier {tier} coefficients must satisfy θ₁ > 0, θ₂, θ₃ ≥ 0; got {th:?}"
                )));
            }
        }
        Ok(AsymptoticModel { a, theta, budget })
    }

    pub fn popularity(&self) -> &[f64] {
        &self.a
    }

    pub fn theta(&self, tier: Tier) -> &ThetaCoefficients {
        &self.theta[tier.index()]
    }

    pub fn budget(&self, tier: Tier) -> usize {
        self.budget[tier.index()]
    }

    pub fn n_files(&self) -> usize {
        self.a.len()
    }

    /// `q_{j,∞}(T_j, T_{j̄})`; files with `T_{j,n} = 0` contribute nothing.
    pub fn tier_value(&self, tier: Tier, t_j: &[f64], t_jbar: &[f64]) -> f64 {
        let th = self.theta(tier);
        self.a
            .iter()
            .zip(t_j.iter().zip(t_jbar))
            .map(|(&a, (&x, &y))| if x == 0.0 { 0.0 } else { a * x / th.denominator(x, y) })
            .sum()
    }

    pub fn value(&self, t1: &[f64], t2: &[f64]) -> StpBreakdown {
        StpBreakdown::from_tiers(
            self.tier_value(Tier::One, t1, t2),
            self.tier_value(Tier::Two, t2, t1),
        )
    }

    pub fn total(&self, t1: &[f64], t2: &[f64]) -> f64 {
        self.value(t1, t2).q_total
    }

    /// `∂q∞/∂T_{j,n}`: own-tier gain minus the interference the file adds to
    /// the other tier.
    pub fn partial(&self, tier: Tier, t_j: &[f64], t_jbar: &[f64]) -> Vec<f64> {
        let own = self.theta(tier);
        let other = self.theta(tier.other());
        self.a
            .iter()
            .zip(t_j.iter().zip(t_jbar))
            .map(|(&a, (&x, &y))| {
                let den_own = own.denominator(x, y);
                let den_other = other.denominator(y, x);
                let gain = a * (own.theta2 * y + own.theta3) / (den_own * den_own);
                let loss = if y == 0.0 {
                    0.0
                } else {
                    a * other.theta2 * y / (den_other * den_other)
                };
                gain - loss
            })
            .collect()
    }

    /// Gradient with respect to `(T₁, T₂)`.
    pub fn gradient(&self, t1: &[f64], t2: &[f64]) -> (Vec<f64>, Vec<f64>) {
        (self.partial(Tier::One, t1, t2), self.partial(Tier::Two, t2, t1))
    }
}

/// Asymptotic STP of marginals `(t1, t2)`.
pub fn stp_asymptotic(
    cfg: &NetworkConfig,
    pop: &PopularityModel,
    t1: &CachingMarginals,
    t2: &CachingMarginals,
) -> Result<StpBreakdown> {
    let model = AsymptoticModel::new(cfg, pop)?;
    Ok(model.value(t1.as_slice(), t2.as_slice()))
}

/// Gradient of the asymptotic STP with respect to `(T₁, T₂)`.
pub fn grad_asymptotic(
    cfg: &NetworkConfig,
    pop: &PopularityModel,
    t1: &CachingMarginals,
    t2: &CachingMarginals,
) -> Result<(Vec<f64>, Vec<f64>)> {
    if !(cfg.tau > 0.0) {
        return Err(Error::Domain("gradient requires a positive target rate".into()));
    }
    let model = AsymptoticModel::new(cfg, pop)?;
    Ok(model.gradient(t1.as_slice(), t2.as_slice()))
}
