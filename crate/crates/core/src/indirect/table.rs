use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Result, TrustError};
use crate::model::{AgentId, Environment, TaskCategory};

/// A reached agent. `path` lists its ancestors starting at the trustor; the
/// trustor's own row has an empty path.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableRow {
    pub agent: AgentId,
    pub cum_prob: f64,
    pub cum_trust: f64,
    pub path: Vec<AgentId>,
}

/// An advisor's rating of the trustee, reached along `path` (which ends with
/// the advisor).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrusteeRow {
    pub advisor: AgentId,
    pub rating: f64,
    pub path: Vec<AgentId>,
}

/// Per-query search state and result.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PropagationTable {
    pub trustor: AgentId,
    pub trustee: AgentId,
    pub category: TaskCategory,
    pub time: f64,
    #[serde(with = "rows_as_list")]
    pub rows: BTreeMap<AgentId, TableRow>,
    pub trustee_rows: Vec<TrusteeRow>,
    /// Frontier nodes dequeued and expanded.
    pub expansions: u64,
    /// Search stopped on its budget with a non-empty frontier.
    pub budget_exhausted: bool,
}

mod rows_as_list {
    use super::*;
    use serde::{Deserializer, Serializer};

    pub fn serialize<S: Serializer>(
        rows: &BTreeMap<AgentId, TableRow>,
        s: S,
    ) -> Result<S::Ok, S::Error> {
        s.collect_seq(rows.values())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(
        d: D,
    ) -> Result<BTreeMap<AgentId, TableRow>, D::Error> {
        let rows = Vec::<TableRow>::deserialize(d)?;
        Ok(rows.into_iter().map(|r| (r.agent.clone(), r)).collect())
    }
}

impl PropagationTable {
    pub fn row(&self, agent: &AgentId) -> Option<&TableRow> {
        self.rows.get(agent)
    }

    /// Checks loop-freedom, threshold soundness and the cumulative-trust
    /// products of every stored row.
    pub fn check_invariants(&self, env: &Environment, trust_threshold: f64) -> Result<()> {
        let fail = |msg: String| Err(TrustError::InvariantViolation(msg));

        match self.rows.get(&self.trustor) {
            Some(r) if r.cum_prob == 1.0 && r.cum_trust == 1.0 && r.path.is_empty() => {}
            _ => return fail(format!("trustor row for `{}` malformed", self.trustor)),
        }

        for row in self.rows.values() {
            if row.agent == self.trustee {
                return fail("trustee stored as a table row".into());
            }
            if !(0.0..=1.0).contains(&row.cum_prob) || !(0.0..=1.0).contains(&row.cum_trust) {
                return fail(format!("row `{}` has values outside [0,1]", row.agent));
            }
            if row.agent == self.trustor {
                continue;
            }
            check_chain(env, &self.trustor, &self.trustee, &row.path, trust_threshold)
                .map_err(|m| TrustError::InvariantViolation(format!("row `{}`: {m}", row.agent)))?;
            if row.path.contains(&row.agent) {
                return fail(format!("row `{}` path contains itself", row.agent));
            }
            let parent = row.path.last().expect("non-trustor rows have a parent");
            let w = env
                .edge(parent, &row.agent)
                .map(|e| e.weight)
                .unwrap_or(f64::NAN);
            if !(w >= trust_threshold) {
                return fail(format!("row `{}` hangs off an untrusted edge", row.agent));
            }
            let mut product = 1.0;
            let mut hops = row.path.iter().chain(std::iter::once(&row.agent));
            let mut prev = hops.next().expect("path starts at the trustor");
            for next in hops {
                product *= env.edge(prev, next).map_or(f64::NAN, |e| e.weight);
                prev = next;
            }
            if !((product - row.cum_trust).abs() <= 1e-12) {
                return fail(format!(
                    "row `{}` cum_trust {} differs from path product {product}",
                    row.agent, row.cum_trust
                ));
            }
        }

        for t in &self.trustee_rows {
            if t.path.last() != Some(&t.advisor) {
                return fail(format!("trustee row path does not end at `{}`", t.advisor));
            }
            if !self.rows.contains_key(&t.advisor) {
                return fail(format!("advisor `{}` has no row", t.advisor));
            }
            if !(0.0..=1.0).contains(&t.rating) {
                return fail(format!("advisor `{}` rating outside [0,1]", t.advisor));
            }
            check_chain(env, &self.trustor, &self.trustee, &t.path, trust_threshold).map_err(
                |m| TrustError::InvariantViolation(format!("trustee row via `{}`: {m}", t.advisor)),
            )?;
        }
        Ok(())
    }
}

/// A stored ancestor chain: starts at the trustor, is simple, avoids the
/// trustee and only crosses edges of weight at least `threshold`.
fn check_chain(
    env: &Environment,
    trustor: &AgentId,
    trustee: &AgentId,
    path: &[AgentId],
    threshold: f64,
) -> std::result::Result<(), String> {
    if path.first() != Some(trustor) {
        return Err("path does not start at the trustor".into());
    }
    let mut seen = BTreeSet::new();
    for a in path {
        if a == trustee {
            return Err("path passes through the trustee".into());
        }
        if !seen.insert(a) {
            return Err(format!("path repeats `{a}`"));
        }
    }
    for pair in path.windows(2) {
        let w = env.edge(&pair[0], &pair[1]).map(|e| e.weight);
        if !w.is_some_and(|w| w >= threshold) {
            return Err(format!("edge {} -> {} below threshold", pair[0], pair[1]));
        }
    }
    Ok(())
}
