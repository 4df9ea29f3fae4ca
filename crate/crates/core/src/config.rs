use std::time::Duration;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("{key} must lie in {bound}")]
    OutOfRange { key: &'static str, bound: &'static str },
    #[error("malformed config: {0}")]
    Parse(String),
    #[error("cannot read config: {0}")]
    Io(String),
}

/// Limits on the best-first path search. Both limits apply when set; the
/// step limit counts dequeued frontier nodes and is reproducible.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct SearchBudget {
    pub max_steps: Option<u64>,
    pub max_time: Option<Duration>,
}

impl SearchBudget {
    pub const UNLIMITED: Self = Self {
        max_steps: None,
        max_time: None,
    };

    pub fn steps(n: u64) -> Self {
        Self {
            max_steps: Some(n),
            max_time: None,
        }
    }
}

/// Engine parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct TrustConfig {
    /// Trusted-neighbour threshold on edge weights.
    pub trust_threshold: f64,
    /// Minimum advisor path trust for a path to be aggregated (strict).
    pub path_trust_threshold: f64,
    pub search_budget: SearchBudget,
    /// Exponential decay rate of ratings in direct trust.
    pub direct_decay_rate: f64,
    /// Exponential recency rate of the propagation probability.
    pub recency_rate: f64,
    /// Per-hop decay applied when only one indirect path survives.
    pub path_decay: f64,
    pub damping: f64,
    pub tolerance: f64,
    pub max_iter: u32,
    pub pagerank_time_budget: Option<Duration>,
    /// Reputation returned when no agent qualifies for the reputation graph.
    pub neutral_reputation: f64,
}

impl Default for TrustConfig {
    fn default() -> Self {
        Self {
            trust_threshold: 0.5,
            path_trust_threshold: 0.5,
            search_budget: SearchBudget::UNLIMITED,
            direct_decay_rate: 0.01,
            recency_rate: 0.01,
            path_decay: 0.9,
            damping: 0.85,
            tolerance: 1e-10,
            max_iter: 1000,
            pagerank_time_budget: None,
            neutral_reputation: 0.5,
        }
    }
}

/// Flat key-value wire form of [`TrustConfig`]. Missing keys take defaults.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub theta_r: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub theta_r_p: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub search_steps: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub search_millis: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda_d: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda_p: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub d: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub q: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_iter: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pagerank_millis: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub neutral_reputation: Option<f64>,
}

impl TrustConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        fn check(ok: bool, key: &'static str, bound: &'static str) -> Result<(), ConfigError> {
            if ok {
                Ok(())
            } else {
                Err(ConfigError::OutOfRange { key, bound })
            }
        }
        let unit = |x: f64| (0.0..=1.0).contains(&x);
        check(unit(self.trust_threshold), "theta_r", "[0,1]")?;
        check(unit(self.path_trust_threshold), "theta_r_p", "[0,1]")?;
        check(
            self.direct_decay_rate.is_finite() && self.direct_decay_rate >= 0.0,
            "lambda_d",
            "[0,inf)",
        )?;
        check(
            self.recency_rate.is_finite() && self.recency_rate >= 0.0,
            "lambda_p",
            "[0,inf)",
        )?;
        check(self.path_decay > 0.0 && self.path_decay <= 1.0, "d", "(0,1]")?;
        check(self.damping > 0.0 && self.damping < 1.0, "q", "(0,1)")?;
        check(
            self.tolerance.is_finite() && self.tolerance > 0.0,
            "epsilon",
            "(0,inf)",
        )?;
        check(self.max_iter > 0, "max_iter", "[1,inf)")?;
        check(unit(self.neutral_reputation), "neutral_reputation", "[0,1]")?;
        Ok(())
    }

    /// Applies the keys present in `file` over the defaults and validates.
    pub fn from_file(file: &ConfigFile) -> Result<Self, ConfigError> {
        let d = Self::default();
        let config = Self {
            trust_threshold: file.theta_r.unwrap_or(d.trust_threshold),
            path_trust_threshold: file.theta_r_p.unwrap_or(d.path_trust_threshold),
            search_budget: SearchBudget {
                max_steps: file.search_steps,
                max_time: file.search_millis.map(Duration::from_millis),
            },
            direct_decay_rate: file.lambda_d.unwrap_or(d.direct_decay_rate),
            recency_rate: file.lambda_p.unwrap_or(d.recency_rate),
            path_decay: file.d.unwrap_or(d.path_decay),
            damping: file.q.unwrap_or(d.damping),
            tolerance: file.epsilon.unwrap_or(d.tolerance),
            max_iter: file.max_iter.unwrap_or(d.max_iter),
            pagerank_time_budget: file.pagerank_millis.map(Duration::from_millis),
            neutral_reputation: file.neutral_reputation.unwrap_or(d.neutral_reputation),
        };
        config.validate()?;
        Ok(config)
    }

    /// Fully populated wire form.
    pub fn to_file(&self) -> ConfigFile {
        ConfigFile {
            theta_r: Some(self.trust_threshold),
            theta_r_p: Some(self.path_trust_threshold),
            search_steps: self.search_budget.max_steps,
            search_millis: self.search_budget.max_time.map(|t| t.as_millis() as u64),
            lambda_d: Some(self.direct_decay_rate),
            lambda_p: Some(self.recency_rate),
            d: Some(self.path_decay),
            q: Some(self.damping),
            epsilon: Some(self.tolerance),
            max_iter: Some(self.max_iter),
            pagerank_millis: self.pagerank_time_budget.map(|t| t.as_millis() as u64),
            neutral_reputation: Some(self.neutral_reputation),
        }
    }

    /// Hex SHA-256 of the canonical JSON form.
    pub fn digest(&self) -> String {
        let json = serde_json::to_vec(&self.to_file()).expect("config serializes");
        hex::encode(Sha256::digest(&json))
    }
}
