//! Command-line experiment runner: analytic evaluation, optimization,
//! the caching game, simulation and parameter sweeps, all as CSV.

pub mod args;
pub mod design;
pub mod output;

use std::ffi::OsString;
use std::path::Path;

use anyhow::Context;
use clap::Parser;
use hetcache::analytic::{stp_asymptotic, stp_general};
use hetcache::config::{ExperimentConfig, PopularitySpec};
use hetcache::game::best_response_dynamics;
use hetcache::joint::{bsum, equal_cache_optimal, gradient_projection, OptimizerResult};
use hetcache::sim::{estimate_stp, SimWindow};
use rayon::prelude::*;
use tracing::{info, warn};

use args::{Cli, Command, Common, Method, Metric, Region, SimArgs, SolverArgs, SweepParam};
use design::{resolve, DesignSpec, Resolved};
use output::{emit, format_marginals, trace_path, write_rows, write_trace, Row};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INVALID: i32 = 1;
pub const EXIT_NOT_CONVERGED: i32 = 2;

/// Why a command did not succeed.
#[derive(Debug)]
pub enum Failure {
    /// Bad input: configuration, flags, files, or an infeasible request.
    Validation(anyhow::Error),
    /// `--strict` checks that failed after the results were written.
    Strict(Vec<String>),
}

impl Failure {
    pub fn validation<E: Into<anyhow::Error>>(e: E) -> Failure {
        Failure::Validation(e.into())
    }
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Failure {
        Failure::Validation(e)
    }
}

type Outcome = Result<(), Failure>;

fn init_logging() {
    let filter = tracing_subscriber::EnvFilter::try_from_env("HETCACHE_LOG")
        .unwrap_or_else(|_| tracing_subscriber::EnvFilter::new("error"));
    let _ = tracing_subscriber::fmt()
        .with_env_filter(filter)
        .with_writer(std::io::stderr)
        .with_target(false)
        .try_init();
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_INVALID } else { EXIT_OK };
        }
    };
    init_logging();
    match execute(cli.command) {
        Ok(()) => EXIT_OK,
        Err(Failure::Validation(e)) => {
            eprintln!("error: {e:#}");
            EXIT_INVALID
        }
        Err(Failure::Strict(problems)) => {
            for p in problems {
                eprintln!("error: {p}");
            }
            EXIT_NOT_CONVERGED
        }
    }
}

fn execute(command: Command) -> Outcome {
    match command {
        Command::Analyze { common, design, region } => analyze(&common, &design.design, &design.solver, region),
        Command::Simulate { common, design, sim } => simulate(&common, &design.design, &design.solver, sim),
        Command::OptimizeJoint { common, solver, trace } => optimize_joint(&common, &solver, trace.as_deref()),
        Command::OptimizeEqual { common } => optimize_equal(&common),
        Command::Game { common, solver, trace } => game(&common, &solver, trace.as_deref()),
        Command::Sweep {
            common,
            solver,
            sim,
            param,
            values,
            designs,
            metric,
        } => sweep(&common, &solver, sim, param, &values, &designs, metric),
    }
}

fn load(common: &Common) -> Result<ExperimentConfig, Failure> {
    let exp = ExperimentConfig::from_path(&common.config).map_err(Failure::validation)?;
    match common.snr_db {
        Some(db) => exp.with_network(exp.network.with_snr_db(db)).map_err(Failure::validation),
        None => Ok(exp),
    }
}

fn jobs(common: &Common) -> Result<usize, Failure> {
    match common.jobs {
        Some(0) => Err(Failure::validation(anyhow::anyhow!("--jobs must be at least 1"))),
        Some(j) => Ok(j),
        None => Ok(std::thread::available_parallelism().map_or(1, |n| n.get())),
    }
}

fn check_solver(solver: &SolverArgs) -> Outcome {
    if !(solver.tol > 0.0) || !solver.tol.is_finite() {
        return Err(Failure::validation(anyhow::anyhow!("--tol must be positive, got {}", solver.tol)));
    }
    if solver.max_iter == 0 {
        return Err(Failure::validation(anyhow::anyhow!("--max-iter must be at least 1")));
    }
    if solver.method == Method::Gp && !(solver.stepsize > 0.0 && solver.stepsize.is_finite()) {
        return Err(Failure::validation(anyhow::anyhow!(
            "--stepsize must be positive, got {}",
            solver.stepsize
        )));
    }
    Ok(())
}

fn check_sim(sim: &SimArgs) -> Outcome {
    if sim.trials == 0 {
        return Err(Failure::validation(anyhow::anyhow!("--trials must be at least 1")));
    }
    if !(sim.window_scale > 0.0 && sim.window_scale.is_finite()) {
        return Err(Failure::validation(anyhow::anyhow!(
            "--window-scale must be positive, got {}",
            sim.window_scale
        )));
    }
    Ok(())
}

/// Reports problems found by the convergence checks; fatal under `--strict`.
fn finish(strict: bool, problems: Vec<String>) -> Outcome {
    if problems.is_empty() {
        return Ok(());
    }
    if strict {
        return Err(Failure::Strict(problems));
    }
    for p in &problems {
        warn!("{p}");
    }
    Ok(())
}

fn analytic_row(
    exp: &ExperimentConfig,
    d: &Resolved,
    general: bool,
    param: &str,
    value: String,
) -> Result<Row, Failure> {
    let q = if general {
        let (c1, c2) = d.combinations()?;
        stp_general(&exp.network, &exp.popularity, &c1, &c2).map_err(Failure::validation)?
    } else {
        stp_asymptotic(&exp.network, &exp.popularity, &d.t1, &d.t2).map_err(Failure::validation)?
    };
    Ok(Row::analytic(param, value, &d.label, q, d.iterations))
}

fn analyze(common: &Common, design: &str, solver: &SolverArgs, region: Region) -> Outcome {
    check_solver(solver)?;
    let exp = load(common)?;
    let d = resolve(&DesignSpec::parse(design), &exp, solver)?;
    let mut rows = Vec::new();
    if matches!(region, Region::General | Region::Both) {
        rows.push(analytic_row(&exp, &d, true, "region", "general".into())?);
    }
    if matches!(region, Region::Asymptotic | Region::Both) {
        rows.push(analytic_row(&exp, &d, false, "region", "asymptotic".into())?);
    }
    emit(common.out.as_deref(), |w| write_rows(w, &rows))?;
    finish(common.strict, d.problems())
}

fn simulate(common: &Common, design: &str, solver: &SolverArgs, sim: SimArgs) -> Outcome {
    check_solver(solver)?;
    check_sim(&sim)?;
    let exp = load(common)?;
    let jobs = jobs(common)?;
    let d = resolve(&DesignSpec::parse(design), &exp, solver)?;
    let row = simulated_row(&exp, &d, sim, jobs, "metric", "simulation".into())?;
    emit(common.out.as_deref(), |w| write_rows(w, &[row]))?;
    finish(common.strict, d.problems())
}

fn simulated_row(
    exp: &ExperimentConfig,
    d: &Resolved,
    sim: SimArgs,
    jobs: usize,
    param: &str,
    value: String,
) -> Result<Row, Failure> {
    let window = SimWindow::for_config(&exp.network).scaled(sim.window_scale);
    info!(side = window.side, trials = sim.trials, jobs, design = %d.label, "simulating");
    let report = estimate_stp(
        &exp.network,
        &exp.popularity,
        &d.sim_design(),
        window,
        sim.trials,
        sim.seed,
        jobs,
    )
    .map_err(Failure::validation)?;
    Ok(Row::simulated(param, value, &d.label, &report, d.iterations))
}

fn optimizer_header(design: &str, r: &OptimizerResult) -> Vec<String> {
    vec![
        format!("design: {design}"),
        format!("objective: {} (tier 1: {}, tier 2: {})", r.objective.q_total, r.objective.q_tier1, r.objective.q_tier2),
        format!("status: {:?}, iterations: {}", r.status, r.iterations),
        "columns: n t1 t2".into(),
    ]
}

fn write_marginals_and_trace(
    common: &Common,
    trace: Option<&Path>,
    text: &str,
    records: &hetcache::joint::OptimizerTrace,
) -> Outcome {
    emit(common.out.as_deref(), |w| Ok(w.write_all(text.as_bytes())?))?;
    if let Some(path) = trace_path(trace, common.out.as_deref()) {
        emit(Some(&path), |w| write_trace(w, records))?;
        info!(path = %path.display(), "wrote trace");
    }
    Ok(())
}

fn optimize_joint(common: &Common, solver: &SolverArgs, trace: Option<&Path>) -> Outcome {
    check_solver(solver)?;
    let exp = load(common)?;
    let opts = hetcache::joint::SolverOptions {
        tol: solver.tol,
        max_iter: solver.max_iter,
    };
    let (res, name) = match solver.method {
        Method::Bsum => (bsum(&exp.network, &exp.popularity, None, opts), "joint (bsum)"),
        Method::Gp => (
            gradient_projection(&exp.network, &exp.popularity, None, solver.stepsize, opts),
            "joint (gradient projection)",
        ),
    };
    let res = res.map_err(Failure::validation)?;
    let text = format_marginals(&optimizer_header(name, &res), &res.t1, &res.t2);
    write_marginals_and_trace(common, trace, &text, &res.trace)?;
    let mut problems = Vec::new();
    if res.status != hetcache::joint::Status::Converged {
        problems.push(format!("{name}: no convergence within {} iterations", solver.max_iter));
    }
    let drop = res.trace.max_decrease();
    if solver.method == Method::Bsum && drop > 1e-12 {
        problems.push(format!("{name}: objective decreased by {drop:e} between iterations"));
    }
    finish(common.strict, problems)
}

fn optimize_equal(common: &Common) -> Outcome {
    let exp = load(common)?;
    let sol = equal_cache_optimal(&exp.network, &exp.popularity).map_err(Failure::validation)?;
    let mut header = optimizer_header("equal", &sol.result);
    header.insert(3, format!("multiplier: {}, r_cap: {}", sol.nu, sol.r_cap));
    let text = format_marginals(&header, &sol.result.t1, &sol.result.t2);
    emit(common.out.as_deref(), |w| Ok(w.write_all(text.as_bytes())?))?;
    Ok(())
}

fn game(common: &Common, solver: &SolverArgs, trace: Option<&Path>) -> Outcome {
    check_solver(solver)?;
    let exp = load(common)?;
    let opts = hetcache::joint::SolverOptions {
        tol: solver.tol,
        max_iter: solver.max_iter,
    };
    let res = best_response_dynamics(&exp.network, &exp.popularity, None, opts).map_err(Failure::validation)?;
    let header = vec![
        "design: ne".to_string(),
        format!(
            "utilities: tier 1: {}, tier 2: {} (total {})",
            res.utilities.q_tier1, res.utilities.q_tier2, res.utilities.q_total
        ),
        format!("status: {:?}, iterations: {}", res.status, res.iterations),
        format!(
            "convergence condition: {} (bound {}, {})",
            res.condition_value,
            hetcache::game::CONDITION_BOUND,
            if res.condition_holds { "holds" } else { "does not hold" }
        ),
        "columns: n t1 t2".into(),
    ];
    let text = format_marginals(&header, &res.t1, &res.t2);
    write_marginals_and_trace(common, trace, &text, &res.trace)?;
    let mut problems = Vec::new();
    if res.status != hetcache::joint::Status::Converged {
        problems.push(format!("ne: no convergence within {} iterations", solver.max_iter));
    }
    finish(common.strict, problems)
}

/// The experiment at one sweep point.
fn sweep_point(base: &ExperimentConfig, param: SweepParam, v: f64) -> anyhow::Result<ExperimentConfig> {
    let integer = |v: f64| -> anyhow::Result<usize> {
        if v >= 1.0 && v.fract() == 0.0 && v < 1e9 {
            Ok(v as usize)
        } else {
            anyhow::bail!("{} must be a positive integer, got {v}", param.name())
        }
    };
    let net = &base.network;
    let exp = match param {
        SweepParam::SnrDb => base.with_network(net.with_snr_db(v))?,
        SweepParam::LambdaU => {
            let mut n = net.clone();
            n.lambda_u = v;
            base.with_network(n)?
        }
        SweepParam::K1 => base.with_network(net.with_cache_sizes(integer(v)?, net.k2))?,
        SweepParam::K2 => base.with_network(net.with_cache_sizes(net.k1, integer(v)?))?,
        SweepParam::Gamma => base.with_popularity(PopularitySpec::Zipf(v))?,
    };
    Ok(exp)
}

fn sweep(
    common: &Common,
    solver: &SolverArgs,
    sim: SimArgs,
    param: SweepParam,
    values: &[f64],
    designs: &[String],
    metric: Metric,
) -> Outcome {
    check_solver(solver)?;
    if metric == Metric::Simulation {
        check_sim(&sim)?;
    }
    let base = load(common)?;
    let jobs = jobs(common)?;
    let specs: Vec<DesignSpec> = designs.iter().map(|d| DesignSpec::parse(d.trim())).collect();
    // Every point is validated before any work starts.
    let points = values
        .iter()
        .map(|&v| {
            sweep_point(&base, param, v)
                .with_context(|| format!("sweep point {} = {v}", param.name()))
                .map(|e| (v, e))
        })
        .collect::<anyhow::Result<Vec<_>>>()?;

    let evaluate = |(v, exp): &(f64, ExperimentConfig), spec: &DesignSpec, sim_jobs: usize| {
        let d = resolve(spec, exp, solver)?;
        let row = match metric {
            Metric::Asymptotic => analytic_row(exp, &d, false, param.name(), v.to_string())?,
            Metric::General => analytic_row(exp, &d, true, param.name(), v.to_string())?,
            Metric::Simulation => simulated_row(exp, &d, sim, sim_jobs, param.name(), v.to_string())?,
        };
        Ok::<_, Failure>((row, d.problems()))
    };
    let tasks: Vec<(usize, usize)> = (0..points.len())
        .flat_map(|p| (0..specs.len()).map(move |s| (p, s)))
        .collect();
    // Simulations parallelize internally; analytic points run side by side.
    let results: Vec<Result<(Row, Vec<String>), Failure>> = if metric == Metric::Simulation {
        tasks.iter().map(|&(p, s)| evaluate(&points[p], &specs[s], jobs)).collect()
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build()
            .context("cannot start worker pool")?;
        pool.install(|| tasks.par_iter().map(|&(p, s)| evaluate(&points[p], &specs[s], 1)).collect())
    };
    let mut rows = Vec::with_capacity(results.len());
    let mut problems = Vec::new();
    for r in results {
        let (row, p) = r?;
        problems.extend(p.into_iter().map(|m| format!("{} = {}: {m}", row.param, row.value)));
        rows.push(row);
    }
    emit(common.out.as_deref(), |w| write_rows(w, &rows))?;
    finish(common.strict, problems)
}
