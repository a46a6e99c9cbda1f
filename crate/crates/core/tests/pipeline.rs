use hetcache::analytic::{stp_asymptotic, stp_general};
use hetcache::baselines::most_popular_marginals;
use hetcache::config::{ExperimentConfig, PopularitySpec};
use hetcache::game::{best_response_dynamics, verify_ne};
use hetcache::joint::{bsum, gradient_projection, SolverOptions, Status};
use hetcache::model::{CombinationDistribution, NetworkConfig};
use hetcache::sim::{combinations_from_marginals, estimate_stp, CacheDesign, SimDesign, SimWindow};
use proptest::prelude::*;

fn verification() -> ExperimentConfig {
    ExperimentConfig::new(NetworkConfig::verification(120.0, 1e-5), PopularitySpec::Zipf(1.0)).unwrap()
}

#[test]
fn optimized_designs_beat_uniform_and_simulate_close_to_analysis() {
    let exp = verification();
    let (cfg, pop) = (&exp.network, &exp.popularity);
    let joint = bsum(cfg, pop, None, SolverOptions::default()).unwrap();
    assert_eq!(joint.status, Status::Converged);

    let uniform = (
        CombinationDistribution::uniform(10, 3).unwrap(),
        CombinationDistribution::uniform(10, 2).unwrap(),
    );
    let q_uniform = stp_general(cfg, pop, &uniform.0, &uniform.1).unwrap().q_total;
    let d1 = combinations_from_marginals(&joint.t1).unwrap();
    let d2 = combinations_from_marginals(&joint.t2).unwrap();
    let q_joint = stp_general(cfg, pop, &d1, &d2).unwrap().q_total;
    assert!(q_joint > q_uniform, "{q_joint} vs {q_uniform}");

    let design = SimDesign {
        tier1: CacheDesign::Marginals(joint.t1.clone()),
        tier2: CacheDesign::Marginals(joint.t2.clone()),
    };
    let report = estimate_stp(cfg, pop, &design, SimWindow::for_config(cfg), 4000, 11, 2).unwrap();
    assert!((report.total.mean - q_joint).abs() < 0.05, "{} vs {q_joint}", report.total.mean);
    let split = report.tier1.mean + report.tier2.mean;
    assert!((split - report.total.mean).abs() < 1e-12);
}

#[test]
fn both_joint_methods_reach_the_same_value() {
    let exp = verification();
    let (cfg, pop) = (&exp.network, &exp.popularity);
    let a = bsum(cfg, pop, None, SolverOptions::default()).unwrap();
    let opts = SolverOptions {
        tol: 1e-10,
        max_iter: 20_000,
    };
    let b = gradient_projection(cfg, pop, None, 500.0, opts).unwrap();
    assert!((a.objective.q_total - b.objective.q_total).abs() < 1e-6);
}

#[test]
fn equilibrium_is_stable_and_no_better_than_joint() {
    let exp = verification();
    let (cfg, pop) = (&exp.network, &exp.popularity);
    let ne = best_response_dynamics(cfg, pop, None, SolverOptions::default()).unwrap();
    assert!(ne.condition_holds);
    assert!(verify_ne(cfg, pop, &ne.t1, &ne.t2, 1e-6).unwrap());
    let joint = bsum(cfg, pop, None, SolverOptions::default()).unwrap();
    assert!(joint.objective.q_total >= ne.utilities.q_total - 1e-9);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    // More skew concentrates requests on cached files.
    #[test]
    fn most_popular_improves_with_skew(g in 0.1f64..1.4, dg in 0.05f64..0.5) {
        let base = verification();
        let eval = |gamma: f64| {
            let exp = base.with_popularity(PopularitySpec::Zipf(gamma)).unwrap();
            let t1 = most_popular_marginals(&exp.popularity, 3).unwrap();
            let t2 = most_popular_marginals(&exp.popularity, 2).unwrap();
            stp_asymptotic(&exp.network, &exp.popularity, &t1, &t2).unwrap().q_total
        };
        prop_assert!(eval(g + dg) >= eval(g) - 1e-12);
    }

    #[test]
    fn config_round_trips_through_json(db in 80.0f64..160.0, k1 in 1usize..9, k2 in 1usize..9, g in 0.0f64..2.0) {
        let net = NetworkConfig::verification(db, 1e-5).with_cache_sizes(k1, k2);
        let exp = ExperimentConfig::new(net, PopularitySpec::Zipf(g)).unwrap();
        let again = ExperimentConfig::from_json(&exp.to_json()).unwrap();
        prop_assert_eq!(again, exp);
    }
}
