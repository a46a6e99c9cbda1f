//! Monte Carlo simulation of the two-tier cached network, used to validate
//! the analytic STP.
//!
//! Each trial draws both POA processes on a torus centred on the typical
//! user, fills every cache independently, picks the typical request, and
//! decides success from the multicast rate at the serving POA. Other users
//! only matter through the load they put on the serving POA, so for each
//! other file in its cache we draw that file's requesters (a thinned PPP) and
//! stop at the first one that associates with it.

mod cache;

pub use cache::{combinations_from_marginals, sample_cache, sample_combination, CacheDesign};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, Poisson};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{NetworkConfig, PopularityModel, Tier};

use cache::CacheSampler;

/// Expected POAs per tier the default window must hold.
pub const MIN_EXPECTED_POAS: f64 = 200.0;
/// Largest expected user count a window may hold.
pub const MAX_EXPECTED_USERS: f64 = 1e6;
/// 97.5% standard-normal quantile.
const Z_95: f64 = 1.959_963_984_540_054;

/// Square simulation window with wrap-around edges.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SimWindow {
    pub side: f64,
}

impl SimWindow {
    /// Smallest window expected to hold at least 200 POAs of each tier.
    pub fn for_config(cfg: &NetworkConfig) -> SimWindow {
        let side = Tier::BOTH
            .iter()
            .map(|&t| (MIN_EXPECTED_POAS / cfg.lambda(t)).sqrt())
            .fold(0.0, f64::max);
        SimWindow { side }
    }

    pub fn scaled(self, factor: f64) -> SimWindow {
        SimWindow {
            side: self.side * factor,
        }
    }

    pub fn area(&self) -> f64 {
        self.side * self.side
    }

    /// Wrap-around distance between two points of the window.
    pub fn distance(&self, a: [f64; 2], b: [f64; 2]) -> f64 {
        let wrap = |d: f64| {
            let d = d.abs() % self.side;
            d.min(self.side - d)
        };
        wrap(a[0] - b[0]).hypot(wrap(a[1] - b[1]))
    }

    fn uniform_point<R: Rng>(&self, rng: &mut R) -> [f64; 2] {
        let h = 0.5 * self.side;
        [rng.gen_range(-h..h), rng.gen_range(-h..h)]
    }
}

/// Homogeneous PPP of intensity `density` on the window.
pub fn sample_ppp<R: Rng>(window: &SimWindow, density: f64, rng: &mut R) -> Vec<[f64; 2]> {
    let count = poisson_count(density * window.area(), rng);
    (0..count).map(|_| window.uniform_point(rng)).collect()
}

fn poisson_count<R: Rng>(mean: f64, rng: &mut R) -> usize {
    if mean > 0.0 {
        Poisson::new(mean).map(|p| p.sample(rng) as usize).unwrap_or(0)
    } else {
        0
    }
}

/// A POA with its position and cache (sorted file indices).
#[derive(Debug, Clone, PartialEq)]
pub struct Poa {
    pub tier: Tier,
    pub position: [f64; 2],
    pub cache: Vec<usize>,
}

impl Poa {
    pub fn caches(&self, file: usize) -> bool {
        self.cache.binary_search(&file).is_ok()
    }
}

/// One realization of both tiers.
#[derive(Debug, Clone, PartialEq)]
pub struct Deployment {
    pub window: SimWindow,
    pub poas: Vec<Poa>,
    /// `P_j^{−1/α}` per tier; association minimizes distance times this.
    scale: [f64; 2],
}

impl Deployment {
    pub fn new(cfg: &NetworkConfig, window: SimWindow, poas: Vec<Poa>) -> Deployment {
        Deployment {
            window,
            poas,
            scale: power_scale(cfg),
        }
    }

    fn effective_distance(&self, poa: &Poa, at: [f64; 2]) -> f64 {
        self.window.distance(poa.position, at) * self.scale[poa.tier.index()]
    }

    /// Index of the POA with the largest received power `P_j d^{−α}` among
    /// those caching `file`, as seen from `at`.
    pub fn serving(&self, file: usize, at: [f64; 2]) -> Option<usize> {
        self.poas
            .iter()
            .enumerate()
            .filter(|(_, p)| p.caches(file))
            .map(|(i, p)| (i, self.effective_distance(p, at)))
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .map(|(i, _)| i)
    }
}

fn power_scale(cfg: &NetworkConfig) -> [f64; 2] {
    [cfg.p1.powf(-1.0 / cfg.alpha), cfg.p2.powf(-1.0 / cfg.alpha)]
}

/// What happened to the typical user in one trial.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TrialOutcome {
    pub file: usize,
    pub served: bool,
    pub tier: Option<Tier>,
    pub load: usize,
    pub sinr: f64,
    pub success: bool,
}

/// Per-tier cache designs.
#[derive(Debug, Clone, PartialEq)]
pub struct SimDesign {
    pub tier1: CacheDesign,
    pub tier2: CacheDesign,
}

impl SimDesign {
    pub fn tier(&self, tier: Tier) -> &CacheDesign {
        match tier {
            Tier::One => &self.tier1,
            Tier::Two => &self.tier2,
        }
    }
}

/// Everything a trial needs that does not depend on the random draw.
pub struct Simulator {
    cfg: NetworkConfig,
    window: SimWindow,
    popularity: Vec<f64>,
    request_cdf: Vec<f64>,
    samplers: [CacheSampler; 2],
    scale: [f64; 2],
}

impl Simulator {
    pub fn new(
        cfg: &NetworkConfig,
        pop: &PopularityModel,
        design: &SimDesign,
        window: SimWindow,
    ) -> Result<Simulator> {
        if !cfg.lambda_u.is_finite() {
            return Err(Error::Domain("simulation needs a finite user density".into()));
        }
        if cfg.lambda_u * window.area() > MAX_EXPECTED_USERS {
            return Err(Error::TooLarge(format!(
                "window holds {:.0} users on average, limit is {MAX_EXPECTED_USERS:.0}",
                cfg.lambda_u * window.area()
            )));
        }
        if !(window.side > 0.0 && window.side.is_finite()) {
            return Err(Error::Domain(format!("window side must be positive, got {}", window.side)));
        }
        for tier in Tier::BOTH {
            let d = design.tier(tier);
            if d.n_files() != pop.len() || d.cache_size() != cfg.cache_size(tier) {
                return Err(Error::InvalidDistribution(format!(
                    "tier {tier} design has N = {}, K = {}; expected N = {}, K = {}",
                    d.n_files(),
                    d.cache_size(),
                    pop.len(),
                    cfg.cache_size(tier)
                )));
            }
        }
        let mut acc = 0.0;
        let request_cdf = pop
            .probs()
            .iter()
            .map(|a| {
                acc += a;
                acc
            })
            .collect();
        Ok(Simulator {
            cfg: cfg.clone(),
            window,
            popularity: pop.probs().to_vec(),
            request_cdf,
            samplers: [CacheSampler::new(&design.tier1), CacheSampler::new(&design.tier2)],
            scale: power_scale(cfg),
        })
    }

    pub fn window(&self) -> SimWindow {
        self.window
    }

    /// Draws POAs of both tiers with their caches.
    pub fn deploy<R: Rng>(&self, rng: &mut R) -> Deployment {
        let mut poas = Vec::new();
        for tier in Tier::BOTH {
            for position in sample_ppp(&self.window, self.cfg.lambda(tier), rng) {
                let mut cache = Vec::with_capacity(self.cfg.cache_size(tier));
                self.samplers[tier.index()].draw(rng, &mut cache);
                poas.push(Poa { tier, position, cache });
            }
        }
        Deployment {
            window: self.window,
            poas,
            scale: self.scale,
        }
    }

    fn request<R: Rng>(&self, rng: &mut R) -> usize {
        let u = rng.gen::<f64>() * self.request_cdf[self.request_cdf.len() - 1];
        self.request_cdf
            .partition_point(|&c| c <= u)
            .min(self.request_cdf.len() - 1)
    }

    /// One independent trial driven by `rng`.
    pub fn trial<R: Rng>(&self, rng: &mut R) -> TrialOutcome {
        let deployment = self.deploy(rng);
        let file = self.request(rng);
        let origin = [0.0, 0.0];
        let Some(serving) = deployment.serving(file, origin) else {
            return TrialOutcome {
                file,
                served: false,
                tier: None,
                load: 0,
                sinr: 0.0,
                success: false,
            };
        };
        let poa = &deployment.poas[serving];
        let mut load = 1;
        for &other in poa.cache.iter().filter(|&&m| m != file) {
            if self.has_requester(&deployment, serving, other, rng) {
                load += 1;
            }
        }
        debug_assert!(load <= self.cfg.cache_size(poa.tier));
        let mut signal = 0.0;
        let mut interference = 0.0;
        for (i, p) in deployment.poas.iter().enumerate() {
            let fading: f64 = Exp1.sample(rng);
            let d = self.window.distance(p.position, origin);
            let power = self.cfg.power(p.tier) * fading * d.powf(-self.cfg.alpha);
            if i == serving {
                signal = power;
            } else {
                interference += power;
            }
        }
        let sinr = signal / (interference + self.cfg.n0);
        let success = sinr >= self.cfg.sinr_threshold(load);
        TrialOutcome {
            file,
            served: true,
            tier: Some(poa.tier),
            load,
            sinr,
            success,
        }
    }

    /// Whether at least one user requesting `file` associates with POA
    /// `serving`.
    fn has_requester<R: Rng>(
        &self,
        deployment: &Deployment,
        serving: usize,
        file: usize,
        rng: &mut R,
    ) -> bool {
        let mean = self.popularity[file] * self.cfg.lambda_u * self.window.area();
        let users = poisson_count(mean, rng);
        if users == 0 {
            return false;
        }
        let index = CompetitorIndex::new(deployment, serving, file);
        let target = &deployment.poas[serving];
        let target_scale = self.scale[target.tier.index()];
        for _ in 0..users {
            let at = self.window.uniform_point(rng);
            let own = self.window.distance(target.position, at) * target_scale;
            if !index.beaten(deployment, at, own) {
                return true;
            }
        }
        false
    }
}

/// Bucket grid over the POAs (other than the serving one) that cache a given
/// file, so most users can be ruled out by a nearby competitor.
struct CompetitorIndex {
    cells: usize,
    cell_side: f64,
    buckets: Vec<Vec<usize>>,
    all: Vec<usize>,
}

impl CompetitorIndex {
    fn new(deployment: &Deployment, serving: usize, file: usize) -> Self {
        let all: Vec<usize> = deployment
            .poas
            .iter()
            .enumerate()
            .filter(|&(i, p)| i != serving && p.caches(file))
            .map(|(i, _)| i)
            .collect();
        let side = deployment.window.side;
        // About a quarter of a competitor per cell, so a 3×3 block nearly
        // always holds one.
        let cells = ((all.len() as f64 / 4.0).sqrt().floor() as usize).clamp(1, 256);
        let cell_side = side / cells as f64;
        let mut buckets = vec![Vec::new(); cells * cells];
        for &i in &all {
            let (cx, cy) = Self::cell_of(deployment.poas[i].position, side, cell_side, cells);
            buckets[cy * cells + cx].push(i);
        }
        CompetitorIndex {
            cells,
            cell_side,
            buckets,
            all,
        }
    }

    fn cell_of(p: [f64; 2], side: f64, cell_side: f64, cells: usize) -> (usize, usize) {
        let h = 0.5 * side;
        let c = |v: f64| (((v + h) / cell_side) as usize).min(cells - 1);
        (c(p[0]), c(p[1]))
    }

    /// Whether some competitor has effective distance below `own` from `at`.
    fn beaten(&self, deployment: &Deployment, at: [f64; 2], own: f64) -> bool {
        let beats = |i: usize| deployment.effective_distance(&deployment.poas[i], at) < own;
        let (cx, cy) = Self::cell_of(at, deployment.window.side, self.cell_side, self.cells);
        let n = self.cells as isize;
        for dy in -1..=1isize {
            for dx in -1..=1isize {
                let x = (cx as isize + dx).rem_euclid(n) as usize;
                let y = (cy as isize + dy).rem_euclid(n) as usize;
                if self.buckets[y * self.cells + x].iter().any(|&i| beats(i)) {
                    return true;
                }
            }
        }
        self.all.iter().any(|&i| beats(i))
    }
}

/// A proportion estimate with a 95% normal-approximation interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StpEstimate {
    pub mean: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub trials: u64,
    pub seed: u64,
}

impl StpEstimate {
    pub fn from_counts(successes: u64, trials: u64, seed: u64) -> StpEstimate {
        let mean = successes as f64 / trials as f64;
        let half = Z_95 * (mean * (1.0 - mean) / trials as f64).sqrt();
        StpEstimate {
            mean,
            ci_low: (mean - half).max(0.0),
            ci_high: (mean + half).min(1.0),
            trials,
            seed,
        }
    }

    pub fn half_width(&self) -> f64 {
        0.5 * (self.ci_high - self.ci_low)
    }
}

/// Overall and per-tier estimates; `tier1.mean + tier2.mean = total.mean`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SimReport {
    pub total: StpEstimate,
    pub tier1: StpEstimate,
    pub tier2: StpEstimate,
    pub served_fraction: f64,
    pub window: SimWindow,
}

/// Random stream of trial `index` under `seed`, independent of scheduling.
pub fn trial_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

#[derive(Debug, Clone, Copy, Default)]
struct Counts {
    success: [u64; 2],
    served: u64,
}

impl Counts {
    fn add(mut self, o: &TrialOutcome) -> Counts {
        if o.served {
            self.served += 1;
        }
        if let (true, Some(t)) = (o.success, o.tier) {
            self.success[t.index()] += 1;
        }
        self
    }

    fn merge(self, other: Counts) -> Counts {
        Counts {
            success: [self.success[0] + other.success[0], self.success[1] + other.success[1]],
            served: self.served + other.served,
        }
    }
}

/// Estimates the STP from `trials` independent trials on `jobs` worker
/// threads. The result depends only on `(seed, trials)` and the inputs.
pub fn estimate_stp(
    cfg: &NetworkConfig,
    pop: &PopularityModel,
    design: &SimDesign,
    window: SimWindow,
    trials: u64,
    seed: u64,
    jobs: usize,
) -> Result<SimReport> {
    if trials == 0 {
        return Err(Error::Domain("need at least one trial".into()));
    }
    let sim = Simulator::new(cfg, pop, design, window)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::Domain(format!("cannot start worker pool: {e}")))?;
    let counts = pool.install(|| {
        (0..trials)
            .into_par_iter()
            .map(|i| sim.trial(&mut trial_rng(seed, i)))
            .fold(Counts::default, |c, o| c.add(&o))
            .reduce(Counts::default, Counts::merge)
    });
    Ok(SimReport {
        total: StpEstimate::from_counts(counts.success[0] + counts.success[1], trials, seed),
        tier1: StpEstimate::from_counts(counts.success[0], trials, seed),
        tier2: StpEstimate::from_counts(counts.success[1], trials, seed),
        served_fraction: counts.served as f64 / trials as f64,
        window,
    })
}
