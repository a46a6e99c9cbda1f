//! Result tables, marginals files and trace files.

use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use hetcache::analytic::StpBreakdown;
use hetcache::joint::OptimizerTrace;
use hetcache::model::CachingMarginals;
use hetcache::sim::SimReport;

/// One line of the long-format result table.
#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub param: String,
    pub value: String,
    pub design: String,
    pub q: StpBreakdown,
    pub ci: Option<(f64, f64)>,
    pub iters: Option<usize>,
    pub seed: Option<u64>,
}

impl Row {
    pub fn analytic(param: &str, value: String, design: &str, q: StpBreakdown, iters: Option<usize>) -> Row {
        Row {
            param: param.into(),
            value,
            design: design.into(),
            q,
            ci: None,
            iters,
            seed: None,
        }
    }

    pub fn simulated(param: &str, value: String, design: &str, r: &SimReport, iters: Option<usize>) -> Row {
        Row {
            param: param.into(),
            value,
            design: design.into(),
            q: StpBreakdown {
                q_total: r.total.mean,
                q_tier1: r.tier1.mean,
                q_tier2: r.tier2.mean,
            },
            ci: Some((r.total.ci_low, r.total.ci_high)),
            iters,
            seed: Some(r.total.seed),
        }
    }
}

pub const HEADER: [&str; 10] = [
    "param", "value", "design", "q_total", "q1", "q2", "ci_low", "ci_high", "iters", "seed",
];

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

pub fn write_rows<W: Write>(out: W, rows: &[Row]) -> anyhow::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(HEADER)?;
    for r in rows {
        w.write_record([
            r.param.clone(),
            r.value.clone(),
            r.design.clone(),
            r.q.q_total.to_string(),
            r.q.q_tier1.to_string(),
            r.q.q_tier2.to_string(),
            opt(r.ci.map(|c| c.0)),
            opt(r.ci.map(|c| c.1)),
            opt(r.iters),
            opt(r.seed),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Header lines (without `#`) followed by `n t1 t2`, `n` counted from 1.
pub fn format_marginals(header: &[String], t1: &CachingMarginals, t2: &CachingMarginals) -> String {
    let mut s = String::new();
    for h in header {
        s.push_str("# ");
        s.push_str(h);
        s.push('\n');
    }
    for (n, (a, b)) in t1.as_slice().iter().zip(t2.as_slice()).enumerate() {
        s.push_str(&format!("{} {} {}\n", n + 1, a, b));
    }
    s
}

/// Parses a marginals file. Blank lines and `#` comments are ignored; the
/// leading index column is optional but must count up from 1 when present.
pub fn read_marginals(text: &str) -> anyhow::Result<(Vec<f64>, Vec<f64>)> {
    let (mut t1, mut t2) = (Vec::new(), Vec::new());
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split(|c: char| c.is_whitespace() || c == ',').filter(|f| !f.is_empty()).collect();
        let parse = |f: &str| {
            f.parse::<f64>()
                .with_context(|| format!("line {}: {f:?} is not a number", lineno + 1))
        };
        let (a, b) = match fields.as_slice() {
            [a, b] => (parse(a)?, parse(b)?),
            [n, a, b] => {
                let expect = t1.len() + 1;
                if n.parse::<usize>().ok() != Some(expect) {
                    bail!("line {}: expected file index {expect}, found {n:?}", lineno + 1);
                }
                (parse(a)?, parse(b)?)
            }
            _ => bail!("line {}: expected `n t1 t2` or `t1 t2`", lineno + 1),
        };
        t1.push(a);
        t2.push(b);
    }
    if t1.is_empty() {
        bail!("no caching probabilities found");
    }
    Ok((t1, t2))
}

pub fn write_trace<W: Write>(out: W, trace: &OptimizerTrace) -> anyhow::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["iteration", "objective", "max_change", "tier"])?;
    for r in &trace.records {
        w.write_record([
            r.iteration.to_string(),
            r.objective.to_string(),
            r.max_change.to_string(),
            opt(r.tier.map(|t| t.index() + 1)),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Default trace location next to the main output.
pub fn trace_path(explicit: Option<&Path>, out: Option<&Path>) -> Option<PathBuf> {
    explicit.map(Path::to_path_buf).or_else(|| {
        out.map(|o| {
            let mut s = o.as_os_str().to_owned();
            s.push(".trace.csv");
            PathBuf::from(s)
        })
    })
}

/// Writes to `path`, or standard output when absent.
pub fn emit(path: Option<&Path>, f: impl FnOnce(&mut dyn Write) -> anyhow::Result<()>) -> anyhow::Result<()> {
    match path {
        Some(p) => {
            let file = std::fs::File::create(p).with_context(|| format!("cannot create {}", p.display()))?;
            let mut w = std::io::BufWriter::new(file);
            f(&mut w)?;
            w.flush()?;
        }
        None => {
            let stdout = std::io::stdout();
            let mut w = stdout.lock();
            f(&mut w)?;
            w.flush()?;
        }
    }
    Ok(())
}
