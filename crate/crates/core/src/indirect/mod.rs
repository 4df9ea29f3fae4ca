//! Indirect trust: best-first discovery of trust propagation paths through
//! trusted neighbours, and aggregation of the advisors' ratings.

mod aggregate;
mod search;
mod table;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Result, TrustError};
use crate::model::{AgentId, Environment, TaskCategory};

pub use aggregate::{aggregate, IndirectTrustResult, PathContribution};
pub use search::find_paths;
pub use table::{PropagationTable, TableRow, TrusteeRow};

/// Out-neighbours `j` of `agent` with `w_{agent,j} >= threshold` that have
/// completed `category`.
pub fn trusted_neighbours(
    env: &Environment,
    agent: &AgentId,
    category: &TaskCategory,
    threshold: f64,
) -> Result<Vec<AgentId>> {
    env.require(agent)?;
    Ok(env
        .out_edges(agent)
        .filter(|(to, edge)| edge.weight >= threshold && env.has_completed(to, category))
        .map(|(to, _)| to.clone())
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PropagationProbability {
    /// Interaction-count factor.
    pub p_n: f64,
    /// Recency factor.
    pub p_t: f64,
    /// Normalized product over the neighbour set.
    pub p: f64,
}

/// Probability that `agent` consults each of `neighbours` on `category`.
///
/// `p_n = ln(1 + n_j) / ln(1 + max_k n_k)` with `n_j` the neighbour's
/// interaction count on the category, `p_t = exp(-rate * (now - last_j))`.
/// The products are normalized to sum to one; if they are all zero the
/// distribution is uniform.
pub fn propagation_probabilities(
    env: &Environment,
    agent: &AgentId,
    neighbours: &[AgentId],
    category: &TaskCategory,
    recency_rate: f64,
) -> Result<BTreeMap<AgentId, PropagationProbability>> {
    env.require(agent)?;
    if neighbours.is_empty() {
        return Err(TrustError::EmptyNeighbourSet);
    }
    let now = env.snapshot_time();
    let stats: Vec<(u64, Option<f64>)> = neighbours
        .iter()
        .map(|n| {
            env.activity(n, category)
                .map_or((0, None), |a| (a.count, Some(a.last_time)))
        })
        .collect();
    let max_count = stats.iter().map(|&(c, _)| c).max().unwrap_or(0);
    let log_max = (max_count as f64).ln_1p();

    let raw: Vec<(f64, f64)> = stats
        .iter()
        .map(|&(count, last)| {
            let p_n = if log_max > 0.0 {
                (count as f64).ln_1p() / log_max
            } else {
                0.0
            };
            let p_t = last.map_or(0.0, |t| (-recency_rate * (now - t)).exp().min(1.0));
            (p_n, p_t)
        })
        .collect();
    let total: f64 = raw.iter().map(|&(n, t)| n * t).sum();
    let uniform = 1.0 / neighbours.len() as f64;

    Ok(neighbours
        .iter()
        .zip(raw)
        .map(|(id, (p_n, p_t))| {
            let p = if total > 0.0 { p_n * p_t / total } else { uniform };
            (id.clone(), PropagationProbability { p_n, p_t, p })
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Interaction;

    fn id(s: &str) -> AgentId {
        AgentId::from(s)
    }

    #[test]
    fn no_out_edges_no_neighbours() {
        let log = [Interaction::new("B", "A", 0.9, "c", 1.0)];
        let env = Environment::build(&log, 10.0, 0.0).unwrap();
        assert!(trusted_neighbours(&env, &id("A"), &"c".into(), 0.5)
            .unwrap()
            .is_empty());
    }

    #[test]
    fn threshold_and_experience_filter() {
        let log = [
            Interaction::new("A", "B", 0.9, "c", 1.0),
            Interaction::new("A", "C", 0.3, "c", 1.0),
            Interaction::new("A", "D", 0.9, "x", 1.0),
        ];
        let env = Environment::build(&log, 10.0, 0.0).unwrap();
        assert_eq!(
            trusted_neighbours(&env, &id("A"), &"c".into(), 0.5).unwrap(),
            vec![id("B")]
        );
        // D is trusted by weight but never worked on c
        let only_d = [Interaction::new("A", "D", 0.9, "x", 1.0)];
        let env = Environment::build(&only_d, 10.0, 0.0).unwrap();
        assert!(trusted_neighbours(&env, &id("A"), &"c".into(), 0.5)
            .unwrap()
            .is_empty());
        assert!(matches!(
            trusted_neighbours(&env, &id("Q"), &"c".into(), 0.5),
            Err(TrustError::UnknownAgent(_))
        ));
    }

    #[test]
    fn probabilities() {
        // B has 1 interaction on c, C has 3, all at the same time
        let log = [
            Interaction::new("A", "B", 0.9, "c", 5.0),
            Interaction::new("A", "C", 0.9, "c", 5.0),
            Interaction::new("X", "C", 0.9, "c", 5.0),
            Interaction::new("Y", "C", 0.9, "c", 5.0),
        ];
        let env = Environment::build(&log, 10.0, 0.0).unwrap();
        let c = TaskCategory::from("c");

        let one = propagation_probabilities(&env, &id("A"), &[id("B")], &c, 0.0).unwrap();
        assert_eq!(one[&id("B")].p, 1.0);

        let both =
            propagation_probabilities(&env, &id("A"), &[id("B"), id("C")], &c, 0.0).unwrap();
        // independent evaluation: ln2/ln4 and ln4/ln4, normalized
        let (b, cc) = (2f64.ln() / 4f64.ln(), 1.0);
        assert!((both[&id("B")].p - b / (b + cc)).abs() < 1e-12);
        assert!((both[&id("B")].p - 1.0 / 3.0).abs() < 1e-4);
        assert!((both[&id("C")].p - 2.0 / 3.0).abs() < 1e-4);

        let sym = propagation_probabilities(&env, &id("A"), &[id("X"), id("Y")], &c, 0.3)
            .unwrap();
        // X and Y both have count 1 and last time 5
        assert_eq!(sym[&id("X")].p, 0.5);
        assert_eq!(sym[&id("Y")].p, 0.5);

        assert_eq!(
            propagation_probabilities(&env, &id("A"), &[], &c, 0.0),
            Err(TrustError::EmptyNeighbourSet)
        );
    }

    #[test]
    fn all_zero_mass_is_uniform() {
        let log = [Interaction::new("A", "B", 0.9, "x", 5.0)];
        let profiles = [crate::model::AgentProfile {
            id: id("B"),
            completed: ["c".into()].into(),
            able: Default::default(),
        }];
        let env = Environment::build_with_profiles(&log, &profiles, 10.0, 0.0).unwrap();
        let p = propagation_probabilities(&env, &id("A"), &[id("B")], &"c".into(), 0.1).unwrap();
        assert_eq!(p[&id("B")].p, 1.0);
    }
}
