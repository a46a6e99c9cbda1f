//! Probabilistic caching in two-tier heterogeneous wireless networks:
//! analytic successful-transmission probability, joint and competitive cache
//! design, and a Monte Carlo network simulator.

pub mod analytic;
pub mod baselines;
pub mod config;
pub mod error;
pub mod game;
pub mod joint;
pub mod model;
pub mod quadrature;
pub mod sim;
pub mod special;
pub mod waterfill;

pub use error::{Error, Result};
pub use model::{
    CachingMarginals, CombinationDistribution, NetworkConfig, PopularityModel, Tier,
};
