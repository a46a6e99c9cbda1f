//! Two operators, one per tier, each maximizing its own asymptotic STP: best
//! responses, best-response dynamics and Nash-equilibrium checks.

use crate::analytic::{theta_coeffs, AsymptoticModel, StpBreakdown, ThetaCoefficients};
use crate::error::{Error, Result};
use crate::joint::{closed_form_update, uniform_init, OptimizerTrace, SolverOptions, Status, TraceRecord};
use crate::model::{CachingMarginals, NetworkConfig, PopularityModel, Tier};

/// Threshold on the convergence product below which best-response dynamics
/// provably converge.
pub const CONDITION_BOUND: f64 = 4.0;

#[derive(Debug, Clone, PartialEq)]
pub struct GameResult {
    pub t1: CachingMarginals,
    pub t2: CachingMarginals,
    pub utilities: StpBreakdown,
    pub trace: OptimizerTrace,
    pub status: Status,
    pub iterations: usize,
    pub condition_value: f64,
    pub condition_holds: bool,
}

/// The unique maximizer of tier `tier`'s own utility against `t_jbar`.
pub fn best_response_with_model(
    model: &AsymptoticModel,
    tier: Tier,
    t_jbar: &CachingMarginals,
) -> Result<CachingMarginals> {
    if t_jbar.len() != model.n_files() || t_jbar.budget() != model.budget(tier.other()) {
        return Err(Error::InvalidMarginals(format!(
            "opponent strategy must have {} entries summing to {}",
            model.n_files(),
            model.budget(tier.other())
        )));
    }
    let zero = vec![0.0; model.n_files()];
    closed_form_update(model, tier, t_jbar.as_slice(), &zero)
}

pub fn best_response(
    cfg: &NetworkConfig,
    pop: &PopularityModel,
    tier: Tier,
    t_jbar: &CachingMarginals,
) -> Result<CachingMarginals> {
    require_positive_rate(cfg)?;
    best_response_with_model(&AsymptoticModel::new(cfg, pop)?, tier, t_jbar)
}

fn require_positive_rate(cfg: &NetworkConfig) -> Result<()> {
    if cfg.tau > 0.0 {
        Ok(())
    } else {
        Err(Error::Domain("the game needs a positive target rate (θ₃ > 0)".into()))
    }
}

/// `max{1, |1 − θ₁/θ₃|}` for each tier, multiplied; returns `(value, value < 4)`.
pub fn condition_from_thetas(
    tier1: &ThetaCoefficients,
    tier2: &ThetaCoefficients,
) -> Result<(f64, bool)> {
    let factor = |th: &ThetaCoefficients| -> Result<f64> {
        if !(th.theta3 > 0.0) {
            return Err(Error::Domain("convergence condition needs θ₃ > 0".into()));
        }
        Ok((1.0 - th.theta1 / th.theta3).abs().max(1.0))
    };
    let value = factor(tier1)? * factor(tier2)?;
    Ok((value, value < CONDITION_BOUND))
}

/// The sufficient condition for best-response dynamics to converge, at the
/// full-load coefficients of `cfg`.
pub fn convergence_condition(cfg: &NetworkConfig) -> Result<(f64, bool)> {
    condition_from_thetas(
        &theta_coeffs(cfg, Tier::One, cfg.k1)?,
        &theta_coeffs(cfg, Tier::Two, cfg.k2)?,
    )
}

/// Alternating best responses (tier 1 first) until no caching probability
/// differs by more than `tol` from its value two updates earlier.
pub fn best_response_dynamics_with_model(
    model: &AsymptoticModel,
    init: (CachingMarginals, CachingMarginals),
    opts: SolverOptions,
    condition: (f64, bool),
) -> Result<GameResult> {
    let (mut t1, mut t2) = init;
    if t1.len() != model.n_files() || t2.len() != model.n_files() {
        return Err(Error::InvalidMarginals("initial strategies have the wrong length".into()));
    }
    let mut trace = OptimizerTrace::default();
    trace.records.push(TraceRecord {
        iteration: 0,
        objective: model.total(t1.as_slice(), t2.as_slice()),
        max_change: 0.0,
        tier: None,
    });
    // Change of the tier updated at t−1, so that after updating at t the pair
    // (T₁, T₂) can be compared with its state two updates back.
    let mut previous_change = f64::INFINITY;
    let mut status = Status::MaxIterations;
    let mut iterations = opts.max_iter;
    for t in 1..=opts.max_iter {
        let tier = Tier::for_iteration(t);
        let change = match tier {
            Tier::One => {
                let next = best_response_with_model(model, tier, &t2)?;
                std::mem::replace(&mut t1, next).max_abs_diff(&t1)
            }
            Tier::Two => {
                let next = best_response_with_model(model, tier, &t1)?;
                std::mem::replace(&mut t2, next).max_abs_diff(&t2)
            }
        };
        trace.records.push(TraceRecord {
            iteration: t,
            objective: model.total(t1.as_slice(), t2.as_slice()),
            max_change: change,
            tier: Some(tier),
        });
        if change.max(previous_change) <= opts.tol {
            status = Status::Converged;
            iterations = t;
            break;
        }
        previous_change = change;
    }
    let utilities = model.value(t1.as_slice(), t2.as_slice());
    Ok(GameResult {
        t1,
        t2,
        utilities,
        trace,
        status,
        iterations,
        condition_value: condition.0,
        condition_holds: condition.1,
    })
}

pub fn best_response_dynamics(
    cfg: &NetworkConfig,
    pop: &PopularityModel,
    init: Option<(CachingMarginals, CachingMarginals)>,
    opts: SolverOptions,
) -> Result<GameResult> {
    require_positive_rate(cfg)?;
    let model = AsymptoticModel::new(cfg, pop)?;
    let init = match init {
        Some(i) => i,
        None => uniform_init(cfg)?,
    };
    best_response_dynamics_with_model(&model, init, opts, convergence_condition(cfg)?)
}

/// Whether `(t1, t2)` is a Nash equilibrium: each strategy is within `tol`
/// (max norm) of the best response to the other.
pub fn verify_ne_with_model(
    model: &AsymptoticModel,
    t1: &CachingMarginals,
    t2: &CachingMarginals,
    tol: f64,
) -> Result<bool> {
    let r1 = best_response_with_model(model, Tier::One, t2)?;
    let r2 = best_response_with_model(model, Tier::Two, t1)?;
    Ok(r1.max_abs_diff(t1) <= tol && r2.max_abs_diff(t2) <= tol)
}

pub fn verify_ne(
    cfg: &NetworkConfig,
    pop: &PopularityModel,
    t1: &CachingMarginals,
    t2: &CachingMarginals,
    tol: f64,
) -> Result<bool> {
    require_positive_rate(cfg)?;
    verify_ne_with_model(&AsymptoticModel::new(cfg, pop)?, t1, t2, tol)
}
