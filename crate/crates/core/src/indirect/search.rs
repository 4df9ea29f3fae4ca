use std::collections::{BTreeMap, BTreeSet};
use std::time::Instant;

use crate::config::TrustConfig;
use crate::error::{Result, TrustError};
use crate::model::{AgentId, Environment, TaskCategory};

use super::table::{PropagationTable, TableRow, TrusteeRow};
use super::propagation_probabilities;

/// Builds the propagation table for `trustor -> trustee` on `category`.
///
/// The frontier is expanded best-first by `cum_prob * cum_trust` (ties go
/// to the smaller agent id). Expanding `v` looks at each out-neighbour `u`:
///
/// * `u` is the trustee: `v` becomes an advisor if it rated the trustee on
///   the category, recording the path that reached `v`.
/// * `u` is unvisited, trusted by `v` and experienced in the category: `u`
///   becomes a child of `v`.
/// * `u` is already in the table: it is re-attached under `v` when that is
///   loop-free and raises its cumulative trust. Rows under `u`'s old parent
///   that do not pass through `u` have their `cum_prob` scaled by
///   `1 / (1 - cum_prob(u))`.
///
/// An indirect hop into an agent the trustor trusts directly is never taken.
/// The children of `v` receive probabilities normalized over this expansion.
pub fn find_paths(
    env: &Environment,
    trustor: &AgentId,
    trustee: &AgentId,
    category: &TaskCategory,
    config: &TrustConfig,
) -> Result<PropagationTable> {
    env.require(trustor)?;
    env.require(trustee)?;
    if trustor == trustee {
        return Err(TrustError::SelfEvaluation(trustor.clone()));
    }

    let threshold = config.trust_threshold;
    let budget = config.search_budget;
    let started = budget.max_time.map(|_| Instant::now());

    let mut table = PropagationTable {
        trustor: trustor.clone(),
        trustee: trustee.clone(),
        category: category.clone(),
        time: env.snapshot_time(),
        rows: BTreeMap::new(),
        trustee_rows: Vec::new(),
        expansions: 0,
        budget_exhausted: false,
    };
    table.rows.insert(
        trustor.clone(),
        TableRow {
            agent: trustor.clone(),
            cum_prob: 1.0,
            cum_trust: 1.0,
            path: Vec::new(),
        },
    );
    let mut frontier: BTreeSet<AgentId> = BTreeSet::from([trustor.clone()]);

    let directly_trusted = |agent: &AgentId| {
        env.edge(trustor, agent)
            .is_some_and(|e| e.weight >= threshold)
    };

    while !frontier.is_empty() {
        let out_of_steps = budget.max_steps.is_some_and(|n| table.expansions >= n);
        let out_of_time = match (started, budget.max_time) {
            (Some(t0), Some(limit)) => t0.elapsed() >= limit,
            _ => false,
        };
        if out_of_steps || out_of_time {
            table.budget_exhausted = true;
            break;
        }

        let current = pop_best(&mut frontier, &table.rows);
        table.expansions += 1;

        let (parent_trust, chain) = {
            let row = &table.rows[&current];
            let mut chain = row.path.clone();
            chain.push(current.clone());
            (row.cum_trust, chain)
        };

        let mut children: Vec<(AgentId, f64)> = Vec::new();
        for (next, edge) in env.out_edges(&current) {
            if next == trustee {
                if let Some(stats) = edge.per_category.get(category) {
                    record_advisor(&mut table.trustee_rows, &current, stats.mean_rating, &chain);
                }
                continue;
            }
            let w = edge.weight;
            if w < threshold || !env.has_completed(next, category) {
                continue;
            }
            if &current != trustor && directly_trusted(next) {
                continue;
            }
            match table.rows.get(next) {
                None => children.push((next.clone(), w)),
                Some(old) => {
                    if chain.contains(next) || old.cum_trust >= parent_trust * w {
                        continue;
                    }
                    let old = table.rows.remove(next).expect("row present");
                    renormalize_siblings(&mut table.rows, &old);
                    children.push((next.clone(), w));
                }
            }
        }

        if children.is_empty() {
            continue;
        }
        let ids: Vec<AgentId> = children.iter().map(|(id, _)| id.clone()).collect();
        let probs =
            propagation_probabilities(env, &current, &ids, category, config.recency_rate)?;
        // renormalization may have touched the parent's own probability
        let parent_prob = table.rows[&current].cum_prob;
        for (child, w) in children {
            let p = probs[&child].p;
            table.rows.insert(
                child.clone(),
                TableRow {
                    agent: child.clone(),
                    cum_prob: (parent_prob * p).min(1.0),
                    cum_trust: parent_trust * w,
                    path: chain.clone(),
                },
            );
            frontier.insert(child);
        }
    }

    Ok(table)
}

fn pop_best(frontier: &mut BTreeSet<AgentId>, rows: &BTreeMap<AgentId, TableRow>) -> AgentId {
    let mut best: Option<(&AgentId, f64)> = None;
    // ascending id order: a later agent only wins on a strictly larger score
    for agent in frontier.iter() {
        let row = &rows[agent];
        let score = row.cum_prob * row.cum_trust;
        if best.is_none_or(|(_, s)| score > s) {
            best = Some((agent, score));
        }
    }
    let best = best.expect("frontier is non-empty").0.clone();
    frontier.remove(&best);
    best
}

fn record_advisor(rows: &mut Vec<TrusteeRow>, advisor: &AgentId, rating: f64, chain: &[AgentId]) {
    let row = TrusteeRow {
        advisor: advisor.clone(),
        rating,
        path: chain.to_vec(),
    };
    match rows.iter_mut().find(|r| &r.advisor == advisor) {
        Some(existing) => *existing = row,
        None => rows.push(row),
    }
}

/// Rows hanging under the detached row's old parent, but not under the row
/// itself, take back the probability mass it held.
fn renormalize_siblings(rows: &mut BTreeMap<AgentId, TableRow>, detached: &TableRow) {
    let Some(parent) = detached.path.last() else {
        return;
    };
    let remaining = 1.0 - detached.cum_prob;
    if remaining <= 0.0 {
        return;
    }
    for row in rows.values_mut() {
        if row.path.contains(parent) && !row.path.contains(&detached.agent) {
            row.cum_prob = (row.cum_prob / remaining).min(1.0);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::SearchBudget;
    use crate::model::Interaction;

    fn id(s: &str) -> AgentId {
        AgentId::from(s)
    }

    fn config() -> TrustConfig {
        TrustConfig {
            direct_decay_rate: 0.0,
            ..TrustConfig::default()
        }
    }

    #[test]
    fn direct_neighbour_trustee() {
        let log = [Interaction::new("A", "B", 0.8, "c", 1.0)];
        let env = Environment::build(&log, 10.0, 0.0).unwrap();
        let t = find_paths(&env, &id("A"), &id("B"), &"c".into(), &config()).unwrap();
        assert_eq!(t.trustee_rows.len(), 1);
        assert_eq!(t.trustee_rows[0].advisor, id("A"));
        assert_eq!(t.trustee_rows[0].path, vec![id("A")]);
        t.check_invariants(&env, 0.5).unwrap();
    }

    #[test]
    fn untrusted_intermediate_blocks() {
        let log = [
            Interaction::new("A", "X", 0.2, "c", 1.0),
            Interaction::new("X", "B", 0.9, "c", 1.0),
        ];
        let env = Environment::build(&log, 10.0, 0.0).unwrap();
        let t = find_paths(&env, &id("A"), &id("B"), &"c".into(), &config()).unwrap();
        assert!(t.trustee_rows.is_empty());
        assert_eq!(t.rows.len(), 1);
    }

    #[test]
    fn zero_budget_keeps_only_trustor() {
        let log = [
            Interaction::new("A", "X", 0.9, "c", 1.0),
            Interaction::new("X", "B", 0.9, "c", 1.0),
        ];
        let env = Environment::build(&log, 10.0, 0.0).unwrap();
        let mut c = config();
        c.search_budget = SearchBudget::steps(0);
        let t = find_paths(&env, &id("A"), &id("B"), &"c".into(), &c).unwrap();
        assert_eq!(t.rows.len(), 1);
        assert!(t.rows.contains_key(&id("A")));
        assert!(t.budget_exhausted);
    }

    #[test]
    fn errors() {
        let log = [Interaction::new("A", "B", 0.9, "c", 1.0)];
        let env = Environment::build(&log, 10.0, 0.0).unwrap();
        let c = config();
        assert!(matches!(
            find_paths(&env, &id("A"), &id("Z"), &"c".into(), &c),
            Err(TrustError::UnknownAgent(_))
        ));
        assert!(matches!(
            find_paths(&env, &id("A"), &id("A"), &"c".into(), &c),
            Err(TrustError::SelfEvaluation(_))
        ));
    }

    #[test]
    fn direct_trust_beats_indirect_path() {
        // A trusts C directly; the hop B -> C must not be taken even though
        // it would give C a higher cumulative trust than 0.6.
        let log = [
            Interaction::new("A", "B", 1.0, "c", 1.0),
            Interaction::new("A", "C", 0.6, "c", 1.0),
            Interaction::new("B", "C", 1.0, "c", 1.0),
            Interaction::new("C", "T", 0.7, "c", 1.0),
        ];
        let env = Environment::build(&log, 10.0, 0.0).unwrap();
        let t = find_paths(&env, &id("A"), &id("T"), &"c".into(), &config()).unwrap();
        let c_row = t.row(&id("C")).unwrap();
        assert_eq!(c_row.path, vec![id("A")]);
        assert_eq!(c_row.cum_trust, 0.6);
        t.check_invariants(&env, 0.5).unwrap();
    }

    #[test]
    fn reattachment_improves_trust() {
        // B is found first through the cheaper, higher-probability route
        // A -> P -> B; the better route A -> Q -> R -> B re-attaches it.
        let log = [
            Interaction::new("A", "P", 0.95, "c", 9.0),
            Interaction::new("P", "B", 0.55, "c", 9.0),
            Interaction::new("A", "Q", 0.9, "c", 1.0),
            Interaction::new("Q", "R", 0.9, "c", 1.0),
            Interaction::new("R", "B", 0.9, "c", 1.0),
            Interaction::new("B", "T", 0.8, "c", 1.0),
        ];
        let env = Environment::build(&log, 10.0, 0.0).unwrap();
        let t = find_paths(&env, &id("A"), &id("T"), &"c".into(), &config()).unwrap();
        let b = t.row(&id("B")).unwrap();
        assert_eq!(b.path, vec![id("A"), id("Q"), id("R")]);
        assert!((b.cum_trust - 0.9 * 0.9 * 0.9).abs() < 1e-12);
        assert_eq!(t.trustee_rows.len(), 1);
        assert_eq!(t.trustee_rows[0].path, vec![id("A"), id("Q"), id("R"), id("B")]);
        t.check_invariants(&env, 0.5).unwrap();
    }

    #[test]
    fn cycles_stay_loop_free() {
        let log = [
            Interaction::new("A", "B", 0.9, "c", 1.0),
            Interaction::new("B", "A", 0.9, "c", 1.0),
            Interaction::new("B", "C", 0.9, "c", 1.0),
            Interaction::new("C", "B", 0.95, "c", 1.0),
            Interaction::new("C", "A", 0.9, "c", 1.0),
            Interaction::new("C", "T", 0.6, "c", 1.0),
        ];
        let env = Environment::build(&log, 10.0, 0.0).unwrap();
        let t = find_paths(&env, &id("A"), &id("T"), &"c".into(), &config()).unwrap();
        t.check_invariants(&env, 0.5).unwrap();
        assert_eq!(t.trustee_rows.len(), 1);
        assert_eq!(t.trustee_rows[0].path, vec![id("A"), id("B"), id("C")]);
    }

    #[test]
    fn step_budget_is_deterministic() {
        let log = [
            Interaction::new("A", "B", 0.9, "c", 1.0),
            Interaction::new("A", "C", 0.8, "c", 2.0),
            Interaction::new("B", "D", 0.7, "c", 3.0),
            Interaction::new("C", "D", 0.9, "c", 4.0),
            Interaction::new("D", "T", 0.6, "c", 5.0),
        ];
        let env = Environment::build(&log, 10.0, 0.0).unwrap();
        let mut c = config();
        for steps in 0..6 {
            c.search_budget = SearchBudget::steps(steps);
            let a = find_paths(&env, &id("A"), &id("T"), &"c".into(), &c).unwrap();
            let b = find_paths(&env, &id("A"), &id("T"), &"c".into(), &c).unwrap();
            assert_eq!(a, b);
            assert!(a.expansions <= steps);
            a.check_invariants(&env, 0.5).unwrap();
        }
    }
}
