use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use hetcache::analytic::stp_general;
use hetcache::config::ExperimentConfig;
use hetcache::model::CombinationDistribution;

fn config(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name)
}

fn hetcache(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hetcache"))
        .args(args)
        .env_remove("HETCACHE_LOG")
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

/// `(design, value, q_total)` per data row.
fn rows(csv: &str) -> Vec<(String, String, f64)> {
    csv.lines()
        .skip(1)
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            (f[2].to_string(), f[1].to_string(), f[3].parse().unwrap())
        })
        .collect()
}

#[test]
fn analyze_uniform_matches_library() {
    let path = config("verification.json");
    let o = hetcache(&["analyze", "--config", path.to_str().unwrap(), "--region", "general"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let exp = ExperimentConfig::from_path(&path).unwrap();
    let d1 = CombinationDistribution::uniform(10, 3).unwrap();
    let d2 = CombinationDistribution::uniform(10, 2).unwrap();
    let lib = stp_general(&exp.network, &exp.popularity, &d1, &d2).unwrap();
    let r = rows(&stdout(&o));
    assert_eq!(r.len(), 1);
    assert_eq!(r[0].0, "uniform");
    assert_eq!(r[0].2, lib.q_total);
}

#[test]
fn snr_override_changes_general_value_only() {
    let path = config("verification.json");
    let base = rows(&stdout(&hetcache(&["analyze", "--config", path.to_str().unwrap()])));
    let loud = rows(&stdout(&hetcache(&[
        "analyze",
        "--config",
        path.to_str().unwrap(),
        "--snr-db",
        "100",
    ])));
    assert_ne!(base[0].2, loud[0].2);
    assert_eq!(base[1].2, loud[1].2);
}

#[test]
fn optimize_equal_names_the_constraint() {
    let o = hetcache(&["optimize-equal", "--config", config("large_scale.json").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("k1 == k2"), "{}", stderr(&o));
    assert!(o.stdout.is_empty());
}

#[test]
fn usage_errors_exit_one_and_help_exits_zero() {
    let o = hetcache(&["analyze", "--config", "x.json", "--no-such-flag"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("Usage"));
    assert_eq!(hetcache(&["--help"]).status.code(), Some(0));
    let o = hetcache(&["simulate", "--config", config("verification.json").to_str().unwrap(), "--trials", "0"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn invalid_config_reports_every_problem() {
    let dir = tempfile::tempdir().unwrap();
    let text = std::fs::read_to_string(config("verification.json"))
        .unwrap()
        .replace("\"alpha\": 4.0", "\"alpha\": 1.5")
        .replace("\"k1\": 3", "\"k1\": 12");
    let path = dir.path().join("bad.json");
    std::fs::write(&path, text).unwrap();
    let o = hetcache(&["analyze", "--config", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    let err = stderr(&o);
    assert!(err.contains("alpha") && err.contains("k1"), "{err}");
}

#[test]
fn strict_turns_non_convergence_into_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("joint.txt");
    let cfg = config("large_scale.json");
    let args = [
        "optimize-joint",
        "--config",
        cfg.to_str().unwrap(),
        "--max-iter",
        "3",
        "--out",
        out.to_str().unwrap(),
    ];
    assert_eq!(hetcache(&args).status.code(), Some(0));
    let mut strict = args.to_vec();
    strict.push("--strict");
    let o = hetcache(&strict);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("no convergence"));
    // Results are still written.
    assert!(out.exists());
}

#[test]
fn joint_marginals_file_round_trips_as_a_design() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("joint.txt");
    let cfg = config("verification.json");
    let o = hetcache(&[
        "optimize-joint",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "--strict",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = std::fs::read_to_string(&out).unwrap();
    assert!(text.starts_with("# design: joint"));
    assert_eq!(text.lines().filter(|l| !l.starts_with('#')).count(), 10);

    let trace = std::fs::read_to_string(dir.path().join("joint.txt.trace.csv")).unwrap();
    let objective: Vec<f64> = trace.lines().skip(1).map(|l| l.split(',').nth(1).unwrap().parse().unwrap()).collect();
    assert!(objective.windows(2).all(|w| w[1] >= w[0] - 1e-12));

    let from_file = rows(&stdout(&hetcache(&[
        "analyze",
        "--config",
        cfg.to_str().unwrap(),
        "--region",
        "asymptotic",
        "--design",
        out.to_str().unwrap(),
    ])));
    let direct = rows(&stdout(&hetcache(&[
        "analyze",
        "--config",
        cfg.to_str().unwrap(),
        "--region",
        "asymptotic",
        "--design",
        "joint",
    ])));
    assert!((from_file[0].2 - direct[0].2).abs() < 1e-12);
    assert!(*objective.last().unwrap() - direct[0].2 < 1e-12);
}

#[test]
fn game_reports_condition() {
    let o = hetcache(&["game", "--config", config("large_scale.json").to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    assert!(text.contains("convergence condition") && text.contains("holds"), "{text}");
}

#[test]
fn simulation_is_reproducible() {
    let cfg = config("verification.json");
    let run = |seed: &str, jobs: &str| {
        stdout(&hetcache(&[
            "simulate",
            "--config",
            cfg.to_str().unwrap(),
            "--trials",
            "1500",
            "--seed",
            seed,
            "--jobs",
            jobs,
        ]))
    };
    let a = run("5", "1");
    assert_eq!(a, run("5", "3"));
    assert_ne!(a, run("6", "1"));
    let line = a.lines().nth(1).unwrap();
    let f: Vec<&str> = line.split(',').collect();
    let (q, lo, hi): (f64, f64, f64) = (f[3].parse().unwrap(), f[6].parse().unwrap(), f[7].parse().unwrap());
    assert!(lo <= q && q <= hi);
    assert_eq!(f[9], "5");
}

#[test]
fn gamma_sweep_is_monotone_per_design() {
    let o = hetcache(&[
        "sweep",
        "--config",
        config("large_scale.json").to_str().unwrap(),
        "--param",
        "gamma",
        "--values",
        "0.4,0.8,1.2",
        "--jobs",
        "2",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let r = rows(&stdout(&o));
    assert_eq!(r.len(), 12);
    for design in ["joint", "ne", "most-popular", "iid"] {
        let q: Vec<f64> = r.iter().filter(|x| x.0 == design).map(|x| x.2).collect();
        assert_eq!(q.len(), 3);
        assert!(q.windows(2).all(|w| w[1] >= w[0] - 1e-9), "{design}: {q:?}");
    }
    // Rows come in sweep order, designs in the order given.
    assert_eq!(r[0].1, "0.4");
    assert_eq!(r[0].0, "joint");
    assert_eq!(r[11].1, "1.2");
}

#[test]
fn sweep_rejects_non_integer_cache_size() {
    let o = hetcache(&[
        "sweep",
        "--config",
        config("verification.json").to_str().unwrap(),
        "--param",
        "k1",
        "--values",
        "2,3.5",
    ]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("k1 must be a positive integer"));
}
