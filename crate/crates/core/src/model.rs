//! Domain model: agents, task categories, interactions and the environment
//! graph snapshot built from an interaction log.
//!
//! An [`Environment`] is immutable once built. Every edge `i -> j` carries
//! per-category statistics over the interactions `i -> j` that happened
//! strictly before the snapshot time, and an overall weight equal to the
//! unweighted mean of the per-category decayed trust values.

use std::borrow::Borrow;
use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::direct::decayed_mean;
use crate::error::{Result, TrustError};

/// Opaque, non-empty agent identifier.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct AgentId(String);

impl AgentId {
    pub fn new(id: impl Into<String>) -> Self {
        Self(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for AgentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for AgentId {
    fn from(s: &str) -> Self {
        Self(s.to_owned())
    }
}

impl From<String> for AgentId {
    fn from(s: String) -> Self {
        Self(s)
    }
}

impl Borrow<str> for AgentId {
    fn borrow(&self) -> &str {
        &self.0
    }
}

/// Task category label; categories compare by exact string equality.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TaskCategory(String);

impl TaskCategory {
    pub fn new(name: impl Into<String>) -> Self {
        Self(name.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for TaskCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for TaskCategory {
    fn from(s: &str) -> Self {
        Self(s.to_owned())
    }
}

impl From<String> for TaskCategory {
    fn from(s: String) -> Self {
        Self(s)
    }
}

/// One timestamped rating of `trustee` by `trustor` on a task of `category`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Interaction {
    pub trustor: AgentId,
    pub trustee: AgentId,
    pub rating: f64,
    pub category: TaskCategory,
    pub time: f64,
}

impl Interaction {
    pub fn new(
        trustor: impl Into<AgentId>,
        trustee: impl Into<AgentId>,
        rating: f64,
        category: impl Into<TaskCategory>,
        time: f64,
    ) -> Self {
        Self {
            trustor: trustor.into(),
            trustee: trustee.into(),
            rating,
            category: category.into(),
            time,
        }
    }

    /// Checks the field invariants, returning a description of the first
    /// violated one.
    pub fn check(&self) -> std::result::Result<(), String> {
        if self.trustor.as_str().is_empty() {
            return Err("trustor must be non-empty".into());
        }
        if self.trustee.as_str().is_empty() {
            return Err("trustee must be non-empty".into());
        }
        if self.category.as_str().is_empty() {
            return Err("category must be non-empty".into());
        }
        if !(0.0..=1.0).contains(&self.rating) {
            return Err(format!("rating {} outside [0,1]", self.rating));
        }
        if self.trustor == self.trustee {
            return Err(format!("self-interaction by `{}`", self.trustor));
        }
        if !self.time.is_finite() || self.time < 0.0 {
            return Err(format!("time {} must be finite and non-negative", self.time));
        }
        Ok(())
    }

    /// Canonical total order on (time, trustor, trustee, category, rating).
    pub fn canonical_cmp(&self, other: &Self) -> Ordering {
        self.time
            .total_cmp(&other.time)
            .then_with(|| self.trustor.cmp(&other.trustor))
            .then_with(|| self.trustee.cmp(&other.trustee))
            .then_with(|| self.category.cmp(&other.category))
            .then_with(|| self.rating.total_cmp(&other.rating))
    }
}

/// Validates a whole log, reporting the index of the first bad record.
pub fn validate_log(log: &[Interaction]) -> Result<()> {
    for (index, interaction) in log.iter().enumerate() {
        interaction
            .check()
            .map_err(|reason| TrustError::InvalidInteraction { index, reason })?;
    }
    Ok(())
}

/// Agent profile: categories completed before the snapshot (`completed`) and
/// categories the agent is able to perform (`able`).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AgentProfile {
    pub id: AgentId,
    #[serde(default)]
    pub completed: BTreeSet<TaskCategory>,
    #[serde(default)]
    pub able: BTreeSet<TaskCategory>,
}

impl AgentProfile {
    pub fn new(id: impl Into<AgentId>) -> Self {
        Self {
            id: id.into(),
            completed: BTreeSet::new(),
            able: BTreeSet::new(),
        }
    }

    pub fn with_able<I, C>(mut self, categories: I) -> Self
    where
        I: IntoIterator<Item = C>,
        C: Into<TaskCategory>,
    {
        self.able.extend(categories.into_iter().map(Into::into));
        self
    }
}

/// Statistics of the interactions `i -> j` on a single category.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoryStats {
    pub count: u64,
    /// Decay-weighted mean rating at the snapshot time.
    pub decayed_trust: f64,
    /// Plain arithmetic mean rating.
    pub mean_rating: f64,
    pub last_time: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeStats {
    /// Unweighted mean of `decayed_trust` over the categories present.
    pub weight: f64,
    pub per_category: BTreeMap<TaskCategory, CategoryStats>,
}

impl EdgeStats {
    pub fn count(&self) -> u64 {
        self.per_category.values().map(|s| s.count).sum()
    }
}

/// How often, and how recently, an agent took part in a category
/// (as trustor or trustee).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CategoryActivity {
    pub count: u64,
    pub last_time: f64,
}

/// Immutable weighted directed graph snapshot at `snapshot_time`.
#[derive(Debug, Clone, PartialEq)]
pub struct Environment {
    pub(crate) snapshot_time: f64,
    pub(crate) decay_rate: f64,
    pub(crate) agents: BTreeMap<AgentId, AgentProfile>,
    pub(crate) edges: BTreeMap<AgentId, BTreeMap<AgentId, EdgeStats>>,
    pub(crate) activity: BTreeMap<AgentId, BTreeMap<TaskCategory, CategoryActivity>>,
}

impl Environment {
    /// Builds the snapshot from a log alone.
    pub fn build(log: &[Interaction], snapshot_time: f64, decay_rate: f64) -> Result<Self> {
        Self::build_with_profiles(log, &[], snapshot_time, decay_rate)
    }

    /// Builds the snapshot from a log plus declared agent profiles. Declared
    /// agents appear even without any interaction history.
    ///
    /// Only interactions with `time < snapshot_time` contribute. The result
    /// does not depend on the order of `log`.
    pub fn build_with_profiles(
        log: &[Interaction],
        profiles: &[AgentProfile],
        snapshot_time: f64,
        decay_rate: f64,
    ) -> Result<Self> {
        if !snapshot_time.is_finite() {
            return Err(TrustError::InvalidParameter(format!(
                "snapshot time {snapshot_time} must be finite"
            )));
        }
        if !(decay_rate.is_finite() && decay_rate >= 0.0) {
            return Err(TrustError::InvalidParameter(format!(
                "decay rate {decay_rate} must be finite and non-negative"
            )));
        }
        validate_log(log)?;

        let mut agents: BTreeMap<AgentId, AgentProfile> = BTreeMap::new();
        for profile in profiles {
            let entry = agents
                .entry(profile.id.clone())
                .or_insert_with(|| AgentProfile::new(profile.id.clone()));
            entry.completed.extend(profile.completed.iter().cloned());
            entry.able.extend(profile.able.iter().cloned());
        }

        let mut active: Vec<&Interaction> =
            log.iter().filter(|i| i.time < snapshot_time).collect();
        active.sort_by(|a, b| a.canonical_cmp(b));

        let mut grouped: BTreeMap<(&AgentId, &AgentId, &TaskCategory), Vec<(f64, f64)>> =
            BTreeMap::new();
        let mut activity: BTreeMap<AgentId, BTreeMap<TaskCategory, CategoryActivity>> =
            BTreeMap::new();

        for i in &active {
            grouped
                .entry((&i.trustor, &i.trustee, &i.category))
                .or_default()
                .push((i.rating, i.time));
            for agent in [&i.trustor, &i.trustee] {
                let profile = agents
                    .entry(agent.clone())
                    .or_insert_with(|| AgentProfile::new(agent.clone()));
                profile.completed.insert(i.category.clone());
                let slot = activity
                    .entry(agent.clone())
                    .or_default()
                    .entry(i.category.clone())
                    .or_insert(CategoryActivity {
                        count: 0,
                        last_time: i.time,
                    });
                slot.count += 1;
                // active is time-sorted, so the last write is the latest
                slot.last_time = i.time;
            }
        }

        // ability is implied by a completed category
        for profile in agents.values_mut() {
            let completed = profile.completed.clone();
            profile.able.extend(completed);
        }

        let mut edges: BTreeMap<AgentId, BTreeMap<AgentId, EdgeStats>> = BTreeMap::new();
        for ((trustor, trustee, category), samples) in grouped {
            let count = samples.len() as u64;
            let decayed_trust = decayed_mean(&samples, decay_rate)
                .expect("group holds at least one sample");
            let mean_rating = samples.iter().map(|&(r, _)| r).sum::<f64>() / count as f64;
            let last_time = samples
                .iter()
                .map(|&(_, t)| t)
                .fold(f64::NEG_INFINITY, f64::max);
            edges
                .entry(trustor.clone())
                .or_default()
                .entry(trustee.clone())
                .or_insert_with(|| EdgeStats {
                    weight: 0.0,
                    per_category: BTreeMap::new(),
                })
                .per_category
                .insert(
                    category.clone(),
                    CategoryStats {
                        count,
                        decayed_trust,
                        mean_rating,
                        last_time,
                    },
                );
        }
        for stats in edges.values_mut().flat_map(|m| m.values_mut()) {
            let n = stats.per_category.len() as f64;
            let total: f64 = stats.per_category.values().map(|s| s.decayed_trust).sum();
            stats.weight = (total / n).clamp(0.0, 1.0);
        }

        Ok(Self {
            snapshot_time,
            decay_rate,
            agents,
            edges,
            activity,
        })
    }

    pub fn snapshot_time(&self) -> f64 {
        self.snapshot_time
    }

    /// Decay rate used to compute per-category decayed trust.
    pub fn decay_rate(&self) -> f64 {
        self.decay_rate
    }

    pub fn agent_count(&self) -> usize {
        self.agents.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.values().map(BTreeMap::len).sum()
    }

    pub fn agents(&self) -> impl Iterator<Item = &AgentProfile> {
        self.agents.values()
    }

    pub fn agent_ids(&self) -> impl Iterator<Item = &AgentId> {
        self.agents.keys()
    }

    pub fn contains(&self, agent: &AgentId) -> bool {
        self.agents.contains_key(agent)
    }

    pub fn profile(&self, agent: &AgentId) -> Option<&AgentProfile> {
        self.agents.get(agent)
    }

    pub(crate) fn require(&self, agent: &AgentId) -> Result<&AgentProfile> {
        self.agents
            .get(agent)
            .ok_or_else(|| TrustError::UnknownAgent(agent.clone()))
    }

    pub fn edge(&self, from: &AgentId, to: &AgentId) -> Option<&EdgeStats> {
        self.edges.get(from).and_then(|m| m.get(to))
    }

    /// Weight `w_{i,j}` of edge `from -> to`, `None` when no edge exists.
    pub fn edge_weight(&self, from: &AgentId, to: &AgentId) -> Result<Option<f64>> {
        self.require(from)?;
        self.require(to)?;
        Ok(self.edge(from, to).map(|e| e.weight))
    }

    /// Out-edges of `from` in agent order.
    pub fn out_edges<'a>(
        &'a self,
        from: &AgentId,
    ) -> impl Iterator<Item = (&'a AgentId, &'a EdgeStats)> + 'a {
        self.edges.get(from).into_iter().flat_map(|m| m.iter())
    }

    /// All edges as `(from, to, stats)` in canonical order.
    pub fn edges(&self) -> impl Iterator<Item = (&AgentId, &AgentId, &EdgeStats)> {
        self.edges
            .iter()
            .flat_map(|(from, m)| m.iter().map(move |(to, s)| (from, to, s)))
    }

    pub fn activity(&self, agent: &AgentId, category: &TaskCategory) -> Option<CategoryActivity> {
        self.activity
            .get(agent)
            .and_then(|m| m.get(category))
            .copied()
    }

    pub fn has_completed(&self, agent: &AgentId, category: &TaskCategory) -> bool {
        self.agents
            .get(agent)
            .is_some_and(|p| p.completed.contains(category))
    }

    pub fn is_able(&self, agent: &AgentId, category: &TaskCategory) -> bool {
        self.agents
            .get(agent)
            .is_some_and(|p| p.able.contains(category))
    }
}
