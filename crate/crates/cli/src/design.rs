//! Turning a design name into per-tier caching marginals.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use hetcache::baselines::{iid_popularity_marginals, most_popular_marginals, IidMethod};
use hetcache::config::ExperimentConfig;
use hetcache::game::best_response_dynamics;
use hetcache::joint::{bsum, equal_cache_optimal, gradient_projection, OptimizerTrace, SolverOptions, Status};
use hetcache::model::{binomial, CachingMarginals, CombinationDistribution, MAX_COMBINATIONS};
use hetcache::sim::{combinations_from_marginals, CacheDesign, SimDesign};
use hetcache::Tier;

use crate::args::{Method, SolverArgs};
use crate::output::read_marginals;
use crate::Failure;

#[derive(Debug, Clone, PartialEq)]
pub enum DesignSpec {
    Uniform,
    Joint,
    Ne,
    Equal,
    MostPopular,
    Iid,
    File(PathBuf),
}

impl DesignSpec {
    pub fn parse(s: &str) -> DesignSpec {
        match s {
            "uniform" => DesignSpec::Uniform,
            "joint" => DesignSpec::Joint,
            "ne" => DesignSpec::Ne,
            "equal" => DesignSpec::Equal,
            "most-popular" => DesignSpec::MostPopular,
            "iid" => DesignSpec::Iid,
            other => DesignSpec::File(PathBuf::from(other.strip_prefix("file:").unwrap_or(other))),
        }
    }

    pub fn label(&self) -> String {
        match self {
            DesignSpec::Uniform => "uniform".into(),
            DesignSpec::Joint => "joint".into(),
            DesignSpec::Ne => "ne".into(),
            DesignSpec::Equal => "equal".into(),
            DesignSpec::MostPopular => "most-popular".into(),
            DesignSpec::Iid => "iid".into(),
            DesignSpec::File(p) => p.display().to_string(),
        }
    }
}

/// A concrete design with how it was obtained.
#[derive(Debug, Clone)]
pub struct Resolved {
    pub label: String,
    pub t1: CachingMarginals,
    pub t2: CachingMarginals,
    /// Explicit combination distributions, when the design defines them.
    pub combinations: Option<(CombinationDistribution, CombinationDistribution)>,
    pub iterations: Option<usize>,
    pub status: Option<Status>,
    pub trace: Option<OptimizerTrace>,
}

impl Resolved {
    fn from_marginals(label: String, t1: CachingMarginals, t2: CachingMarginals) -> Resolved {
        Resolved {
            label,
            t1,
            t2,
            combinations: None,
            iterations: None,
            status: None,
            trace: None,
        }
    }

    /// Combination distributions for the general-region analysis; designs
    /// given only by marginals use the interval-sampling distribution, which
    /// is also what the simulator draws from.
    pub fn combinations(&self) -> anyhow::Result<(CombinationDistribution, CombinationDistribution)> {
        match &self.combinations {
            Some(c) => Ok(c.clone()),
            None => Ok((
                combinations_from_marginals(&self.t1)?,
                combinations_from_marginals(&self.t2)?,
            )),
        }
    }

    pub fn sim_design(&self) -> SimDesign {
        match &self.combinations {
            Some((d1, d2)) => SimDesign {
                tier1: CacheDesign::Combinations(d1.clone()),
                tier2: CacheDesign::Combinations(d2.clone()),
            },
            None => SimDesign {
                tier1: CacheDesign::Marginals(self.t1.clone()),
                tier2: CacheDesign::Marginals(self.t2.clone()),
            },
        }
    }

    /// Non-convergence or BSUM monotonicity problems, for `--strict`.
    pub fn problems(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.status == Some(Status::MaxIterations) {
            out.push(format!("{}: stopped at the iteration limit without converging", self.label));
        }
        if let Some(trace) = &self.trace {
            let drop = trace.max_decrease();
            if self.label == "joint" && drop > 1e-12 {
                out.push(format!("{}: objective decreased by {drop:e} between iterations", self.label));
            }
        }
        out
    }
}

fn options(solver: &SolverArgs) -> SolverOptions {
    SolverOptions {
        tol: solver.tol,
        max_iter: solver.max_iter,
    }
}

pub fn resolve(spec: &DesignSpec, exp: &ExperimentConfig, solver: &SolverArgs) -> Result<Resolved, Failure> {
    let cfg = &exp.network;
    let pop = &exp.popularity;
    let label = spec.label();
    let resolved = match spec {
        DesignSpec::Uniform => {
            let t1 = CachingMarginals::uniform(cfg.n_files, cfg.k1).map_err(Failure::validation)?;
            let t2 = CachingMarginals::uniform(cfg.n_files, cfg.k2).map_err(Failure::validation)?;
            let small = |k| binomial(cfg.n_files, k) <= MAX_COMBINATIONS as f64;
            let mut r = Resolved::from_marginals(label, t1, t2);
            if small(cfg.k1) && small(cfg.k2) {
                r.combinations = Some((
                    CombinationDistribution::uniform(cfg.n_files, cfg.k1).map_err(Failure::validation)?,
                    CombinationDistribution::uniform(cfg.n_files, cfg.k2).map_err(Failure::validation)?,
                ));
            }
            r
        }
        DesignSpec::Joint => {
            let res = match solver.method {
                Method::Bsum => bsum(cfg, pop, None, options(solver)),
                Method::Gp => gradient_projection(cfg, pop, None, solver.stepsize, options(solver)),
            }
            .map_err(Failure::validation)?;
            let mut r = Resolved::from_marginals(label, res.t1, res.t2);
            r.iterations = Some(res.iterations);
            r.status = Some(res.status);
            r.trace = Some(res.trace);
            r
        }
        DesignSpec::Ne => {
            let res = best_response_dynamics(cfg, pop, None, options(solver)).map_err(Failure::validation)?;
            let mut r = Resolved::from_marginals(label, res.t1, res.t2);
            r.iterations = Some(res.iterations);
            r.status = Some(res.status);
            r.trace = Some(res.trace);
            r
        }
        DesignSpec::Equal => {
            let sol = equal_cache_optimal(cfg, pop).map_err(Failure::validation)?;
            let mut r = Resolved::from_marginals(label, sol.result.t1, sol.result.t2);
            r.iterations = Some(sol.result.iterations);
            r
        }
        DesignSpec::MostPopular => Resolved::from_marginals(
            label,
            most_popular_marginals(pop, cfg.k1).map_err(Failure::validation)?,
            most_popular_marginals(pop, cfg.k2).map_err(Failure::validation)?,
        ),
        DesignSpec::Iid => {
            let iid = |k| -> Result<CachingMarginals, Failure> {
                Ok(iid_popularity_marginals(pop, k, IidMethod::Quadrature)
                    .map_err(Failure::validation)?
                    .marginals)
            };
            Resolved::from_marginals(label, iid(cfg.k1)?, iid(cfg.k2)?)
        }
        DesignSpec::File(path) => {
            let (t1, t2) = load_marginals(path, exp).map_err(Failure::Validation)?;
            Resolved::from_marginals(label, t1, t2)
        }
    };
    Ok(resolved)
}

fn load_marginals(path: &Path, exp: &ExperimentConfig) -> anyhow::Result<(CachingMarginals, CachingMarginals)> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("cannot read marginals file {}", path.display()))?;
    let (t1, t2) = read_marginals(&text).with_context(|| format!("in {}", path.display()))?;
    let cfg = &exp.network;
    if t1.len() != cfg.n_files {
        bail!("{} lists {} files but the config has n_files = {}", path.display(), t1.len(), cfg.n_files);
    }
    let build = |t: Vec<f64>, tier: Tier| {
        CachingMarginals::new(t, cfg.cache_size(tier))
            .with_context(|| format!("tier {tier} column of {}", path.display()))
    };
    Ok((build(t1, Tier::One)?, build(t2, Tier::Two)?))
}
