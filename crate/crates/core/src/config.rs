//! JSON experiment configuration: `NetworkConfig` fields as flat keys plus a
//! `popularity` entry.
//!
//! ```json
//! { "lambda1": 5e-7, "lambda2": 3e-6, "lambda_u": 1e-5, "p1": 31.6227766, "p2": 1.0,
//!   "alpha": 4.0, "w": 2e7, "tau": 3.5e5, "snr_db": 120, "n_files": 10, "k1": 3, "k2": 2,
//!   "popularity": { "zipf": 1.0 } }
//! ```
//!
//! Noise is given either as `n0` (watts) or as `snr_db` (`P₂/N₀` in dB).
//! `lambda_u` may be the string `"inf"` for the full-load limit.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{validate_config, ConfigIssue, NetworkConfig, PopularityModel};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", deny_unknown_fields)]
pub enum PopularitySpec {
    Zipf(f64),
    Explicit(Vec<f64>),
}

impl PopularitySpec {
    pub fn build(&self, n_files: usize) -> Result<PopularityModel> {
        match self {
            PopularitySpec::Zipf(g) => PopularityModel::zipf(n_files, *g),
            PopularitySpec::Explicit(a) => PopularityModel::explicit(a.clone()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
enum Density {
    Value(f64),
    Text(String),
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    lambda1: f64,
    lambda2: f64,
    lambda_u: Density,
    p1: f64,
    p2: f64,
    alpha: f64,
    w: f64,
    tau: f64,
    #[serde(default)]
    n0: Option<f64>,
    #[serde(default)]
    snr_db: Option<f64>,
    n_files: usize,
    k1: usize,
    k2: usize,
    popularity: PopularitySpec,
}

/// A validated network and popularity model.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub network: NetworkConfig,
    pub popularity_spec: PopularitySpec,
    pub popularity: PopularityModel,
}

impl ExperimentConfig {
    pub fn new(network: NetworkConfig, popularity_spec: PopularitySpec) -> Result<Self> {
        let popularity = match popularity_spec.build(network.n_files) {
            Ok(p) => p,
            Err(e) => {
                return Err(Error::InvalidConfig(vec![ConfigIssue {
                    field: "popularity",
                    message: e.to_string(),
                }]))
            }
        };
        validate_config(&network, &popularity).map_err(Error::InvalidConfig)?;
        Ok(ExperimentConfig {
            network,
            popularity_spec,
            popularity,
        })
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let raw: RawConfig = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        let lambda_u = match &raw.lambda_u {
            Density::Value(v) => *v,
            Density::Text(s) if matches!(s.to_ascii_lowercase().as_str(), "inf" | "infinity") => {
                f64::INFINITY
            }
            Density::Text(s) => {
                return Err(Error::Parse(format!("lambda_u must be a number or \"inf\", got {s:?}")))
            }
        };
        let network = NetworkConfig {
            lambda1: raw.lambda1,
            lambda2: raw.lambda2,
            lambda_u,
            p1: raw.p1,
            p2: raw.p2,
            alpha: raw.alpha,
            w: raw.w,
            tau: raw.tau,
            n0: raw.n0.unwrap_or(0.0),
            n_files: raw.n_files,
            k1: raw.k1,
            k2: raw.k2,
        };
        let network = match (raw.n0, raw.snr_db) {
            (Some(_), Some(_)) => {
                return Err(Error::InvalidConfig(vec![ConfigIssue {
                    field: "snr_db",
                    message: "give either n0 or snr_db, not both".into(),
                }]))
            }
            (None, Some(db)) => network.with_snr_db(db),
            _ => network,
        };
        Self::new(network, raw.popularity)
    }

    pub fn from_path(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Parse(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    /// Serializes back to the file format, with noise as `n0`.
    pub fn to_json(&self) -> String {
        let mut v = serde_json::to_value(&self.network).expect("config serializes");
        if self.network.lambda_u.is_infinite() {
            v["lambda_u"] = serde_json::Value::String("inf".into());
        }
        v["popularity"] = serde_json::to_value(&self.popularity_spec).expect("popularity serializes");
        serde_json::to_string_pretty(&v).expect("value serializes")
    }

    /// Same experiment with another popularity law.
    pub fn with_popularity(&self, spec: PopularitySpec) -> Result<Self> {
        Self::new(self.network.clone(), spec)
    }

    pub fn with_network(&self, network: NetworkConfig) -> Result<Self> {
        Self::new(network, self.popularity_spec.clone())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const FIG2: &str = r#"{
        "lambda1": 5e-7, "lambda2": 3e-6, "lambda_u": 1e-5,
        "p1": 31.622776601683793, "p2": 1.0, "alpha": 4.0,
        "w": 2e7, "tau": 3.5e5, "snr_db": 120,
        "n_files": 10, "k1": 3, "k2": 2,
        "popularity": {"zipf": 1.0}
    }"#;

    #[test]
    fn parses_and_converts_snr() {
        let c = ExperimentConfig::from_json(FIG2).unwrap();
        assert!((c.network.n0 - 1e-12).abs() < 1e-24);
        assert_eq!(c.popularity.len(), 10);
    }

    #[test]
    fn infinite_user_density_round_trips() {
        let text = FIG2.replace("1e-5", "\"inf\"");
        let c = ExperimentConfig::from_json(&text).unwrap();
        assert!(c.network.lambda_u.is_infinite());
        let again = ExperimentConfig::from_json(&c.to_json()).unwrap();
        assert_eq!(again, c);
    }

    #[test]
    fn reports_every_violation() {
        let text = FIG2.replace("\"alpha\": 4.0", "\"alpha\": 2.0").replace("\"k1\": 3", "\"k1\": 10");
        match ExperimentConfig::from_json(&text) {
            Err(Error::InvalidConfig(issues)) => {
                assert_eq!(issues.len(), 2, "{issues:?}");
                let all = issues.iter().map(|i| i.message.clone()).collect::<Vec<_>>().join("|");
                assert!(all.contains("alpha must exceed 2"));
                assert!(all.contains("cache size must be < N"));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn rejects_unknown_keys_and_double_noise() {
        assert!(matches!(
            ExperimentConfig::from_json(&FIG2.replace("\"w\"", "\"bandwidth\"")),
            Err(Error::Parse(_))
        ));
        let both = FIG2.replace("\"snr_db\": 120", "\"snr_db\": 120, \"n0\": 0.0");
        assert!(matches!(ExperimentConfig::from_json(&both), Err(Error::InvalidConfig(_))));
    }

    #[test]
    fn explicit_popularity() {
        let text = FIG2
            .replace("{\"zipf\": 1.0}", "{\"explicit\": [0.5, 0.3, 0.2]}")
            .replace("\"n_files\": 10", "\"n_files\": 3")
            .replace("\"k1\": 3", "\"k1\": 2")
            .replace("\"k2\": 2", "\"k2\": 1");
        let c = ExperimentConfig::from_json(&text).unwrap();
        assert_eq!(c.popularity.probs(), &[0.5, 0.3, 0.2]);
    }
}
