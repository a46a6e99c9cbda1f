//! Closed-form and quadrature-based performance expressions.
//!
//! Every function here is a pure function of its inputs. The interference
//! geometry of a tier at a given file load is summarized by three
//! [`ThetaCoefficients`]; the successful transmission probability (STP) of a
//! file is then an integral over the serving distance which has the closed
//! form `1 / (θ₁x + θ₂y + θ₃)` in the noise-free limit.

mod load;
mod stp;

pub use load::{load_pmf, poisson_binomial, LoadPmf};
pub use stp::{grad_asymptotic, stp_asymptotic, stp_general, AsymptoticModel, StpBreakdown};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{NetworkConfig, PopularityModel, Tier};
use crate::quadrature::adaptive_simpson;
use crate::special::{beta_fn, beta_inc_comp};

/// Upper limit of the substituted serving-distance integral; `e^{−40} < 1e-17`.
pub const SUBSTITUTED_UPPER: f64 = 40.0;
/// Mean Voronoi cell area shape constant of the user-load approximation.
pub const VORONOI_SHAPE: f64 = 3.5;

/// Interference coefficients for one (tier, load) pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ThetaCoefficients {
    pub theta1: f64,
    pub theta2: f64,
    pub theta3: f64,
}

impl ThetaCoefficients {
    /// `θ₁x + θ₂y + θ₃`.
    pub fn denominator(&self, x: f64, y: f64) -> f64 {
        self.theta1 * x + self.theta2 * y + self.theta3
    }
}

/// θ coefficients of tier `tier` when its serving POA transmits `load` files.
pub fn theta_coeffs(cfg: &NetworkConfig, tier: Tier, load: usize) -> Result<ThetaCoefficients> {
    if load < 1 || load > cfg.cache_size(tier) {
        return Err(Error::Domain(format!(
            "load {load} outside 1..={} for tier {tier}",
            cfg.cache_size(tier)
        )));
    }
    let delta = 2.0 / cfg.alpha;
    let rate = load as f64 * cfg.tau / cfg.w;
    let threshold = rate.exp2() - 1.0;
    let full = beta_fn(delta, 1.0 - delta)?;
    let upper = beta_inc_comp(delta, 1.0 - delta, (-rate).exp2())?;
    let ratio = cfg.lambda(tier.other()) / cfg.lambda(tier);
    let sigma_other = cfg.sigma(tier.other());
    let own = delta * threshold.powf(delta);
    let cross = delta * ratio * (sigma_other * threshold).powf(delta);
    Ok(ThetaCoefficients {
        theta1: own * (upper - full) + 1.0,
        theta2: cross * (upper - full) + ratio * sigma_other.powf(delta),
        theta3: own * full + cross * full,
    })
}

/// θ coefficients for every load `1..=K_j` of a tier.
pub fn theta_table(cfg: &NetworkConfig, tier: Tier) -> Result<Vec<ThetaCoefficients>> {
    (1..=cfg.cache_size(tier))
        .map(|k| theta_coeffs(cfg, tier, k))
        .collect()
}

/// `λ_{j̄} (P_{j̄}/P_j)^{2/α}`, the competing tier's weight in association.
fn competing_weight(cfg: &NetworkConfig, tier: Tier) -> f64 {
    cfg.lambda(tier.other()) * cfg.sigma(tier.other()).powf(2.0 / cfg.alpha)
}

/// Probability that a user requesting a file cached with probabilities
/// `(t_jn, t_jbarn)` associates with tier `tier`. Zero when neither tier
/// caches the file.
pub fn association_prob(cfg: &NetworkConfig, tier: Tier, t_jn: f64, t_jbarn: f64) -> f64 {
    let own = cfg.lambda(tier) * t_jn;
    if own == 0.0 {
        return 0.0;
    }
    own / (own + competing_weight(cfg, tier) * t_jbarn)
}

/// `Â_{j,m} = λ_j / (λ_j T_{j,m} + λ_{j̄} T_{j̄,m} σ_{j̄}^{2/α})`.
pub fn association_hat(cfg: &NetworkConfig, tier: Tier, t_jm: f64, t_jbarm: f64) -> f64 {
    cfg.lambda(tier) / (cfg.lambda(tier) * t_jm + competing_weight(cfg, tier) * t_jbarm)
}

/// Probability that no other user served by the typical user's POA requests
/// file `file` (zero-based).
pub fn b_coeff(
    cfg: &NetworkConfig,
    pop: &PopularityModel,
    tier: Tier,
    file: usize,
    t_jm: f64,
    t_jbarm: f64,
) -> f64 {
    let a_hat = association_hat(cfg, tier, t_jm, t_jbarm);
    b_from_parts(pop.probs()[file], cfg.lambda_u, cfg.lambda(tier), a_hat)
}

fn b_from_parts(a_m: f64, lambda_u: f64, lambda_j: f64, a_hat: f64) -> f64 {
    (1.0 + a_m * lambda_u * a_hat / (VORONOI_SHAPE * lambda_j)).powf(-VORONOI_SHAPE)
}

/// Conditional success probability of a tier-`tier` transmission at file load
/// `load`, given caching probabilities `x = T_{j,n}` and `y = T_{j̄,n}`,
/// divided by the association probability (i.e. the `f_{j,k}` kernel).
pub fn f_jk(cfg: &NetworkConfig, tier: Tier, load: usize, x: f64, y: f64) -> Result<f64> {
    let theta = theta_coeffs(cfg, tier, load)?;
    f_jk_with(cfg, tier, load, &theta, x, y)
}

/// [`f_jk`] with precomputed coefficients.
pub fn f_jk_with(
    cfg: &NetworkConfig,
    tier: Tier,
    load: usize,
    theta: &ThetaCoefficients,
    x: f64,
    y: f64,
) -> Result<f64> {
    let den = theta.denominator(x, y);
    if !(den > 0.0) {
        return Err(Error::Domain(format!(
            "theta denominator must be positive, got {den} at (x, y) = ({x}, {y})"
        )));
    }
    // s = πλ_j D d² turns the distance integral into ∫ e^{−s} e^{−c s^{α/2}} ds / D.
    let noise = cfg.sinr_threshold(load) * cfg.n0 / cfg.power(tier);
    let c = noise * (std::f64::consts::PI * cfg.lambda(tier) * den).powf(-cfg.alpha / 2.0);
    let half_alpha = cfg.alpha / 2.0;
    let integrand = |s: f64| (-s - c * s.powf(half_alpha)).exp();
    let mut value = adaptive_simpson(integrand, 0.0, SUBSTITUTED_UPPER, 1e-13)?;
    if value < 1e-3 {
        value = adaptive_simpson(integrand, 0.0, SUBSTITUTED_UPPER, 1e-10 * value.max(1e-300))?;
    }
    Ok(value / den)
}
