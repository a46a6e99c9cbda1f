//! Joint caching design for a single operator controlling both tiers:
//! projected gradient ascent, block successive lower-bound maximization
//! (BSUM), and the exact water-filling solution when both tiers have the
//! same cache size.

use serde::Serialize;

use crate::analytic::{theta_coeffs, AsymptoticModel, StpBreakdown};
use crate::error::{Error, Result};
use crate::model::{CachingMarginals, NetworkConfig, PopularityModel, Tier};
use crate::waterfill::{polish_budget, project_capped_simplex, solve_multiplier};

pub const DEFAULT_TOL: f64 = 1e-9;
pub const DEFAULT_MAX_ITER: usize = 10_000;

/// Iteration controls shared by the iterative solvers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            tol: DEFAULT_TOL,
            max_iter: DEFAULT_MAX_ITER,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Status {
    Converged,
    MaxIterations,
}

/// One iteration: objective after the update, the largest change of any
/// caching probability, and the tier that moved (`None` when both did).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TraceRecord {
    pub iteration: usize,
    pub objective: f64,
    pub max_change: f64,
    pub tier: Option<Tier>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct OptimizerTrace {
    pub records: Vec<TraceRecord>,
}

impl OptimizerTrace {
    fn push(&mut self, iteration: usize, objective: f64, max_change: f64, tier: Option<Tier>) {
        self.records.push(TraceRecord {
            iteration,
            objective,
            max_change,
            tier,
        });
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Largest decrease between consecutive objective values (0 if none).
    pub fn max_decrease(&self) -> f64 {
        self.records
            .windows(2)
            .map(|w| w[0].objective - w[1].objective)
            .fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerResult {
    pub t1: CachingMarginals,
    pub t2: CachingMarginals,
    pub objective: StpBreakdown,
    pub trace: OptimizerTrace,
    pub status: Status,
    pub iterations: usize,
}

/// Uniform start `T_{j,n} = K_j / N`.
pub fn uniform_init(cfg: &NetworkConfig) -> Result<(CachingMarginals, CachingMarginals)> {
    Ok((
        CachingMarginals::uniform(cfg.n_files, cfg.k1)?,
        CachingMarginals::uniform(cfg.n_files, cfg.k2)?,
    ))
}

fn require_positive_rate(cfg: &NetworkConfig) -> Result<()> {
    if cfg.tau > 0.0 {
        Ok(())
    } else {
        Err(Error::Domain(
            "the optimizers need a positive target rate (θ₃ > 0)".into(),
        ))
    }
}

fn check_init(model: &AsymptoticModel, t1: &CachingMarginals, t2: &CachingMarginals) -> Result<()> {
    let n = model.n_files();
    if t1.len() != n || t2.len() != n {
        return Err(Error::InvalidMarginals(format!(
            "initial point has {} and {} entries, expected {n}",
            t1.len(),
            t2.len()
        )));
    }
    if t1.budget() != model.budget(Tier::One) || t2.budget() != model.budget(Tier::Two) {
        return Err(Error::InvalidMarginals(format!(
            "initial point budgets ({}, {}) do not match cache sizes ({}, {})",
            t1.budget(),
            t2.budget(),
            model.budget(Tier::One),
            model.budget(Tier::Two)
        )));
    }
    Ok(())
}

fn pick<'a>(tier: Tier, t1: &'a CachingMarginals, t2: &'a CachingMarginals) -> (&'a [f64], &'a [f64]) {
    match tier {
        Tier::One => (t1.as_slice(), t2.as_slice()),
        Tier::Two => (t2.as_slice(), t1.as_slice()),
    }
}

/// Linear coefficient `c_n` of the other tier's utility, linearized in `T_j`
/// at the current point: `a_n θ₂,j̄ T_{j̄,n} / den_{j̄,n}²`.
fn coupling(model: &AsymptoticModel, tier: Tier, t_j: &[f64], t_jbar: &[f64]) -> Vec<f64> {
    let other = model.theta(tier.other());
    model
        .popularity()
        .iter()
        .zip(t_j.iter().zip(t_jbar))
        .map(|(&a, (&x, &y))| {
            if y == 0.0 {
                0.0
            } else {
                let den = other.denominator(y, x);
                a * other.theta2 * y / (den * den)
            }
        })
        .collect()
}

/// Maximizes `Σ_n a_n T_n/(θ₁T_n + e_n) − c_n T_n` over the capped simplex of
/// tier `tier`, with `e_n = θ₂ T_{j̄,n} + θ₃`:
/// `T_n = min{[(1/θ₁)√(a_n e_n/(ν + c_n)) − e_n/θ₁]⁺, 1}`.
pub(crate) fn closed_form_update(
    model: &AsymptoticModel,
    tier: Tier,
    t_jbar: &[f64],
    c: &[f64],
) -> Result<CachingMarginals> {
    let th = model.theta(tier);
    let a = model.popularity();
    let budget = model.budget(tier);
    let e: Vec<f64> = t_jbar.iter().map(|&y| th.theta2 * y + th.theta3).collect();
    if e.iter().any(|&v| !(v > 0.0)) {
        return Err(Error::Domain("closed-form update needs θ₂T̄ + θ₃ > 0".into()));
    }
    let alloc = |n: usize, nu: f64| -> f64 {
        let denom = nu + c[n];
        if denom <= 0.0 {
            return 1.0;
        }
        (((a[n] * e[n] / denom).sqrt() - e[n]) / th.theta1).clamp(0.0, 1.0)
    };
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for n in 0..a.len() {
        // ν at which coordinate n sits exactly at its cap, and at zero.
        lo = lo.min(a[n] * e[n] / (th.theta1 + e[n]).powi(2) - c[n]);
        hi = hi.max(a[n] / e[n] - c[n]);
    }
    let pad = 1e-9 * (hi - lo).abs().max(f64::MIN_POSITIVE);
    let (_, mut t) = solve_multiplier(a.len(), budget as f64, lo - pad, hi + pad, alloc);
    polish_budget(&mut t, budget as f64);
    CachingMarginals::from_solver(t, budget)
}

/// Maximizer of the BSUM surrogate for tier `tier`: own utility exact, the
/// other tier's utility linearized at the current point.
pub fn bsum_step(
    model: &AsymptoticModel,
    t1: &CachingMarginals,
    t2: &CachingMarginals,
    tier: Tier,
) -> Result<CachingMarginals> {
    let (t_j, t_jbar) = pick(tier, t1, t2);
    let c = coupling(model, tier, t_j, t_jbar);
    closed_form_update(model, tier, t_jbar, &c)
}

/// The BSUM surrogate `g_j(T_j; T₁(t), T₂(t))`.
pub fn surrogate(
    model: &AsymptoticModel,
    t1: &CachingMarginals,
    t2: &CachingMarginals,
    tier: Tier,
    candidate: &[f64],
) -> f64 {
    let (t_j, t_jbar) = pick(tier, t1, t2);
    let c = coupling(model, tier, t_j, t_jbar);
    let linear: f64 = c
        .iter()
        .zip(candidate.iter().zip(t_j))
        .map(|(c, (x, x0))| c * (x - x0))
        .sum();
    model.tier_value(tier, candidate, t_jbar) + model.tier_value(tier.other(), t_jbar, t_j) - linear
}

fn result(
    model: &AsymptoticModel,
    t1: CachingMarginals,
    t2: CachingMarginals,
    trace: OptimizerTrace,
    status: Status,
    iterations: usize,
) -> OptimizerResult {
    let objective = model.value(t1.as_slice(), t2.as_slice());
    OptimizerResult {
        t1,
        t2,
        objective,
        trace,
        status,
        iterations,
    }
}

/// Alternating BSUM updates (tier 1 first) until the objective changes by at
/// most `tol` over two consecutive updates.
pub fn bsum_with_model(
    model: &AsymptoticModel,
    init: (CachingMarginals, CachingMarginals),
    opts: SolverOptions,
) -> Result<OptimizerResult> {
    let (mut t1, mut t2) = init;
    check_init(model, &t1, &t2)?;
    let mut trace = OptimizerTrace::default();
    let mut history = vec![model.total(t1.as_slice(), t2.as_slice())];
    trace.push(0, history[0], 0.0, None);
    for t in 1..=opts.max_iter {
        let tier = Tier::for_iteration(t);
        let next = bsum_step(model, &t1, &t2, tier)?;
        let change = match tier {
            Tier::One => std::mem::replace(&mut t1, next).max_abs_diff(&t1),
            Tier::Two => std::mem::replace(&mut t2, next).max_abs_diff(&t2),
        };
        let q = model.total(t1.as_slice(), t2.as_slice());
        trace.push(t, q, change, Some(tier));
        history.push(q);
        if t >= 2 && (q - history[t - 2]).abs() <= opts.tol {
            return Ok(result(model, t1, t2, trace, Status::Converged, t));
        }
    }
    Ok(result(model, t1, t2, trace, Status::MaxIterations, opts.max_iter))
}

pub fn bsum(
    cfg: &NetworkConfig,
    pop: &PopularityModel,
    init: Option<(CachingMarginals, CachingMarginals)>,
    opts: SolverOptions,
) -> Result<OptimizerResult> {
    require_positive_rate(cfg)?;
    let model = AsymptoticModel::new(cfg, pop)?;
    let init = match init {
        Some(i) => i,
        None => uniform_init(cfg)?,
    };
    bsum_with_model(&model, init, opts)
}

/// Diminishing stepsize `c / (2 + t^0.55)`.
pub fn gp_stepsize(c: f64, t: usize) -> f64 {
    c / (2.0 + (t as f64).powf(0.55))
}

/// Projected gradient ascent on both tiers simultaneously; stops when no
/// caching probability moves by more than `tol` in one iteration.
pub fn gradient_projection_with_model(
    model: &AsymptoticModel,
    init: (CachingMarginals, CachingMarginals),
    stepsize: f64,
    opts: SolverOptions,
) -> Result<OptimizerResult> {
    if !(stepsize > 0.0 && stepsize.is_finite()) {
        return Err(Error::Domain(format!("stepsize constant must be positive, got {stepsize}")));
    }
    let (mut t1, mut t2) = init;
    check_init(model, &t1, &t2)?;
    let mut trace = OptimizerTrace::default();
    trace.push(0, model.total(t1.as_slice(), t2.as_slice()), 0.0, None);
    for t in 1..=opts.max_iter {
        let eps = gp_stepsize(stepsize, t);
        let (g1, g2) = model.gradient(t1.as_slice(), t2.as_slice());
        let step = |cur: &CachingMarginals, g: &[f64]| -> Vec<f64> {
            cur.as_slice().iter().zip(g).map(|(x, d)| x + eps * d).collect()
        };
        let n1 = project_capped_simplex(&step(&t1, &g1), t1.budget())?;
        let n2 = project_capped_simplex(&step(&t2, &g2), t2.budget())?;
        let change = n1.max_abs_diff(&t1).max(n2.max_abs_diff(&t2));
        t1 = n1;
        t2 = n2;
        trace.push(t, model.total(t1.as_slice(), t2.as_slice()), change, None);
        if change <= opts.tol {
            return Ok(result(model, t1, t2, trace, Status::Converged, t));
        }
    }
    Ok(result(model, t1, t2, trace, Status::MaxIterations, opts.max_iter))
}

pub fn gradient_projection(
    cfg: &NetworkConfig,
    pop: &PopularityModel,
    init: Option<(CachingMarginals, CachingMarginals)>,
    stepsize: f64,
    opts: SolverOptions,
) -> Result<OptimizerResult> {
    require_positive_rate(cfg)?;
    let model = AsymptoticModel::new(cfg, pop)?;
    let init = match init {
        Some(i) => i,
        None => uniform_init(cfg)?,
    };
    gradient_projection_with_model(&model, init, stepsize, opts)
}

/// Stationarity measure `max_j ‖P_{𝒯_j}(T_j + ∇_j q∞) − T_j‖∞`.
pub fn projected_gradient_norm(
    model: &AsymptoticModel,
    t1: &CachingMarginals,
    t2: &CachingMarginals,
) -> Result<f64> {
    let (g1, g2) = model.gradient(t1.as_slice(), t2.as_slice());
    let mut worst: f64 = 0.0;
    for (t, g) in [(t1, g1), (t2, g2)] {
        let moved: Vec<f64> = t.as_slice().iter().zip(&g).map(|(x, d)| x + d).collect();
        worst = worst.max(project_capped_simplex(&moved, t.budget())?.max_abs_diff(t));
    }
    Ok(worst)
}

/// Exact solution when `K₁ = K₂`, via the aggregate `R_n`.
#[derive(Debug, Clone, PartialEq)]
pub struct EqualCacheSolution {
    pub result: OptimizerResult,
    /// `R_n* = P₁^{2/α}λ₁T₁,n + P₂^{2/α}λ₂T₂,n` at the optimum.
    pub r: Vec<f64>,
    /// `P₁^{2/α}λ₁ + P₂^{2/α}λ₂`, the cap on each `R_n`.
    pub r_cap: f64,
    pub nu: f64,
}

pub fn equal_cache_optimal(cfg: &NetworkConfig, pop: &PopularityModel) -> Result<EqualCacheSolution> {
    if cfg.k1 != cfg.k2 {
        return Err(Error::Domain(format!(
            "equal-cache solution requires k1 == k2 (got k1 = {}, k2 = {})",
            cfg.k1, cfg.k2
        )));
    }
    require_positive_rate(cfg)?;
    let model = AsymptoticModel::new(cfg, pop)?;
    let delta = 2.0 / cfg.alpha;
    let w1 = cfg.p1.powf(delta) * cfg.lambda1;
    let cap = w1 + cfg.p2.powf(delta) * cfg.lambda2;
    let theta1 = theta_coeffs(cfg, Tier::One, cfg.k1)?;
    let mu3 = w1 * theta1.theta3;
    let th1 = theta1.theta1;
    let a = pop.probs();
    // Water-fill the normalized r_n = R_n / cap ∈ [0, 1], Σ r_n = K.
    let alloc = |n: usize, nu: f64| -> f64 {
        (((a[n] * mu3 / nu).sqrt() - mu3) / (th1 * cap)).clamp(0.0, 1.0)
    };
    let lo = a.iter().map(|&x| x * mu3 / (th1 * cap + mu3).powi(2)).fold(f64::INFINITY, f64::min);
    let hi = a.iter().map(|&x| x / mu3).fold(f64::NEG_INFINITY, f64::max);
    let (nu, mut r_norm) = solve_multiplier(a.len(), cfg.k1 as f64, 0.5 * lo, 2.0 * hi, alloc);
    polish_budget(&mut r_norm, cfg.k1 as f64);
    let r: Vec<f64> = r_norm.iter().map(|x| x * cap).collect();
    let t1 = CachingMarginals::from_solver(r_norm.clone(), cfg.k1)?;
    let t2 = CachingMarginals::from_solver(r_norm, cfg.k2)?;
    let result = result(&model, t1, t2, OptimizerTrace::default(), Status::Converged, 1);
    Ok(EqualCacheSolution {
        result,
        r,
        r_cap: cap,
        nu,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analytic::ThetaCoefficients;

    fn small(k1: usize, k2: usize, n: usize) -> (NetworkConfig, PopularityModel) {
        let cfg = NetworkConfig {
            n_files: n,
            ..NetworkConfig::verification(120.0, f64::INFINITY)
        }
        .with_cache_sizes(k1, k2);
        (cfg, PopularityModel::zipf(n, 1.0).unwrap())
    }

    fn marg(t: &[f64], k: usize) -> CachingMarginals {
        CachingMarginals::new(t.to_vec(), k).unwrap()
    }

    #[test]
    fn symmetric_step_stays_uniform() {
        let th = ThetaCoefficients { theta1: 0.8, theta2: 0.7, theta3: 0.5 };
        let model = AsymptoticModel::from_parts(vec![0.25; 4], [th, th], [2, 1]).unwrap();
        let t1 = CachingMarginals::uniform(4, 2).unwrap();
        let t2 = CachingMarginals::uniform(4, 1).unwrap();
        let next = bsum_step(&model, &t1, &t2, Tier::One).unwrap();
        for x in next.as_slice() {
            assert!((x - 0.5).abs() < 1e-12);
        }
    }

    #[test]
    fn step_matches_surrogate_grid_two_files() {
        let (cfg, pop) = small(1, 1, 2);
        let model = AsymptoticModel::new(&cfg, &pop).unwrap();
        let t1 = marg(&[0.3, 0.7], 1);
        let t2 = marg(&[0.6, 0.4], 1);
        for tier in Tier::BOTH {
            let step = bsum_step(&model, &t1, &t2, tier).unwrap();
            let (mut best, mut arg) = (f64::NEG_INFINITY, 0.0);
            for i in 0..=10_000 {
                let x = i as f64 * 1e-4;
                let g = surrogate(&model, &t1, &t2, tier, &[x, 1.0 - x]);
                if g > best {
                    best = g;
                    arg = x;
                }
            }
            assert!((step.as_slice()[0] - arg).abs() <= 1e-4, "{tier}: {step:?} vs {arg}");
            let g = surrogate(&model, &t1, &t2, tier, step.as_slice());
            assert!(g >= best - 1e-12);
        }
    }

    #[test]
    fn surrogate_is_tight_and_minorizes() {
        let (cfg, pop) = small(2, 1, 4);
        let model = AsymptoticModel::new(&cfg, &pop).unwrap();
        let t1 = marg(&[0.7, 0.6, 0.4, 0.3], 2);
        let t2 = marg(&[0.1, 0.2, 0.3, 0.4], 1);
        let q = model.total(t1.as_slice(), t2.as_slice());
        assert!((surrogate(&model, &t1, &t2, Tier::One, t1.as_slice()) - q).abs() < 1e-15);
        assert!((surrogate(&model, &t1, &t2, Tier::Two, t2.as_slice()) - q).abs() < 1e-15);
        let probes = [[1.0, 1.0, 0.0, 0.0], [0.0, 0.5, 0.5, 1.0], [0.5; 4]];
        for p in probes {
            let g = surrogate(&model, &t1, &t2, Tier::One, &p);
            assert!(g <= model.total(&p, t2.as_slice()) + 1e-15);
        }
    }

    #[test]
    fn bsum_is_monotone_and_restarts_at_fixed_point() {
        let (cfg, pop) = small(3, 2, 10);
        let res = bsum(&cfg, &pop, None, SolverOptions::default()).unwrap();
        assert_eq!(res.status, Status::Converged);
        assert!(res.trace.max_decrease() <= 1e-12);
        let again = bsum(&cfg, &pop, Some((res.t1.clone(), res.t2.clone())), SolverOptions::default()).unwrap();
        assert!(again.iterations <= 2);
    }

    #[test]
    fn bsum_agrees_with_equal_cache_solution() {
        let (cfg, pop) = small(2, 2, 10);
        let exact = equal_cache_optimal(&cfg, &pop).unwrap();
        let opts = SolverOptions { tol: 1e-13, max_iter: 100_000 };
        let res = bsum(&cfg, &pop, None, opts).unwrap();
        assert!(exact.result.objective.q_total >= res.objective.q_total - 1e-9);
        assert!((exact.result.objective.q_total - res.objective.q_total).abs() <= 1e-6);
    }

    #[test]
    fn equal_cache_rejects_unequal_sizes() {
        let (cfg, pop) = small(3, 2, 10);
        let err = equal_cache_optimal(&cfg, &pop).unwrap_err().to_string();
        assert!(err.contains("k1 == k2"));
    }

    #[test]
    fn equal_cache_uniform_popularity_is_uniform() {
        let (cfg, _) = small(2, 2, 5);
        let pop = PopularityModel::explicit(vec![0.2; 5]).unwrap();
        let sol = equal_cache_optimal(&cfg, &pop).unwrap();
        for x in sol.result.t1.as_slice() {
            assert!((x - 0.4).abs() < 1e-12);
        }
        assert_eq!(sol.result.t1, sol.result.t2);
    }

    #[test]
    fn equal_cache_mapping_and_budget() {
        let (cfg, pop) = small(2, 2, 10);
        let sol = equal_cache_optimal(&cfg, &pop).unwrap();
        let d = 2.0 / cfg.alpha;
        let (w1, w2) = (cfg.p1.powf(d) * cfg.lambda1, cfg.p2.powf(d) * cfg.lambda2);
        for n in 0..10 {
            let lhs = w1 * sol.result.t1.as_slice()[n] + w2 * sol.result.t2.as_slice()[n];
            assert!((lhs - sol.r[n]).abs() <= 1e-9 * sol.r_cap);
        }
        let total: f64 = sol.r.iter().sum();
        assert!((total - 2.0 * sol.r_cap).abs() <= 1e-9 * sol.r_cap);
    }

    #[test]
    fn gradient_projection_approaches_bsum() {
        let (cfg, pop) = small(3, 2, 10);
        let gp = gradient_projection(&cfg, &pop, None, 5.0, SolverOptions { tol: 1e-10, max_iter: 20_000 }).unwrap();
        let bs = bsum(&cfg, &pop, None, SolverOptions::default()).unwrap();
        assert!((gp.objective.q_total - bs.objective.q_total).abs() < 1e-5);
    }

    #[test]
    fn gp_rejects_nonpositive_stepsize() {
        let (cfg, pop) = small(3, 2, 10);
        assert!(gradient_projection(&cfg, &pop, None, 0.0, SolverOptions::default()).is_err());
    }

    #[test]
    fn stepsize_schedule() {
        assert_eq!(gp_stepsize(3.0, 0), 1.5);
        assert!((gp_stepsize(3.0, 1) - 1.0).abs() < 1e-15);
    }
}
