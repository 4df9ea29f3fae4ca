//! Brute-force reference implementations used to cross-check the engine.
//!
//! Both oracles recompute edge weights and advisor ratings straight from the
//! raw log with plain summation, instead of reading the environment's
//! precomputed statistics. Declared agent profiles are taken from the
//! environment.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::config::{SearchBudget, TrustConfig};
use crate::error::{Result, TrustError};
use crate::indirect::{aggregate, find_paths};
use crate::model::{AgentId, Environment, Interaction, TaskCategory};
use crate::reputation::ReputationModel;
use crate::simgen::{generate, Draws, GenParams, RatingModel};

pub const INDIRECT_AGENT_LIMIT: usize = 12;
pub const REPUTATION_NODE_LIMIT: usize = 200;

/// Graph facts recomputed from the log.
struct RawGraph {
    /// `weight[i][j]`, the mean over categories of decay-weighted means.
    weight: BTreeMap<AgentId, BTreeMap<AgentId, f64>>,
    /// `(i, j, c)` -> plain ratings.
    ratings: BTreeMap<(AgentId, AgentId, TaskCategory), Vec<f64>>,
    /// Categories each agent took part in, in either role.
    participated: BTreeMap<AgentId, BTreeSet<TaskCategory>>,
}

impl RawGraph {
    fn new(log: &[Interaction], now: f64, rate: f64) -> Self {
        let mut sums: BTreeMap<(AgentId, AgentId), BTreeMap<TaskCategory, (f64, f64)>> =
            BTreeMap::new();
        let mut ratings: BTreeMap<(AgentId, AgentId, TaskCategory), Vec<f64>> = BTreeMap::new();
        let mut participated: BTreeMap<AgentId, BTreeSet<TaskCategory>> = BTreeMap::new();
        for i in log.iter().filter(|i| i.time < now) {
            let w = (-rate * (now - i.time)).exp();
            let cell = sums
                .entry((i.trustor.clone(), i.trustee.clone()))
                .or_default()
                .entry(i.category.clone())
                .or_insert((0.0, 0.0));
            cell.0 += w * i.rating;
            cell.1 += w;
            ratings
                .entry((i.trustor.clone(), i.trustee.clone(), i.category.clone()))
                .or_default()
                .push(i.rating);
            for agent in [&i.trustor, &i.trustee] {
                participated
                    .entry(agent.clone())
                    .or_default()
                    .insert(i.category.clone());
            }
        }
        let mut weight: BTreeMap<AgentId, BTreeMap<AgentId, f64>> = BTreeMap::new();
        for ((from, to), per_category) in sums {
            let means: Vec<f64> = per_category.values().map(|&(num, den)| num / den).collect();
            let w = means.iter().sum::<f64>() / means.len() as f64;
            weight.entry(from).or_default().insert(to, w.clamp(0.0, 1.0));
        }
        Self {
            weight,
            ratings,
            participated,
        }
    }

    fn w(&self, from: &AgentId, to: &AgentId) -> Option<f64> {
        self.weight.get(from)?.get(to).copied()
    }
}

/// Best path found for one advisor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleAdvisor {
    pub rating: f64,
    pub path_trust: f64,
    pub hops: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleIndirect {
    pub value: Option<f64>,
    /// Every advisor reachable over a qualifying path, before filtering.
    pub advisors: BTreeMap<AgentId, OracleAdvisor>,
}

/// Indirect trust by exhaustive enumeration of simple paths.
///
/// A hop `v -> u` on the way to an advisor qualifies when `w(v,u) >= θ_r`,
/// `u` has completed the category, `u` is neither trustor nor trustee, and,
/// unless `v` is the trustor, the trustor does not already trust `u`
/// directly. Any reached agent that rated the trustee on the category is an
/// advisor. Each advisor keeps its largest weight product (fewest hops on
/// ties); the trustor's own rating is excluded.
pub fn oracle_indirect(
    env: &Environment,
    log: &[Interaction],
    trustor: &AgentId,
    trustee: &AgentId,
    category: &TaskCategory,
    config: &TrustConfig,
) -> Result<OracleIndirect> {
    if env.agent_count() > INDIRECT_AGENT_LIMIT {
        return Err(TrustError::SizeGuard {
            actual: env.agent_count(),
            limit: INDIRECT_AGENT_LIMIT,
        });
    }
    env.require(trustor)?;
    env.require(trustee)?;
    if trustor == trustee {
        return Err(TrustError::SelfEvaluation(trustor.clone()));
    }
    let graph = RawGraph::new(log, env.snapshot_time(), env.decay_rate());
    let theta = config.trust_threshold;
    let completed = |agent: &AgentId| {
        graph
            .participated
            .get(agent)
            .is_some_and(|s| s.contains(category))
            || env
                .profile(agent)
                .is_some_and(|p| p.completed.contains(category))
    };
    let agents: Vec<AgentId> = env.agent_ids().cloned().collect();

    let mut best: BTreeMap<AgentId, (f64, usize)> = BTreeMap::new();
    let mut path = vec![trustor.clone()];
    let mut saved_trust: Vec<f64> = Vec::new();
    // Explicit DFS: each frame holds the next candidate index to try.
    let mut cursor = vec![0usize];
    let mut trust = 1.0;
    while let Some(next_index) = cursor.last_mut() {
        let current = path.last().expect("path is never empty").clone();
        if *next_index >= agents.len() {
            cursor.pop();
            path.pop();
            if let Some(t) = saved_trust.pop() {
                trust = t;
            }
            continue;
        }
        let candidate = agents[*next_index].clone();
        *next_index += 1;
        if &candidate == trustor || &candidate == trustee || path.contains(&candidate) {
            continue;
        }
        let Some(w) = graph.w(&current, &candidate) else {
            continue;
        };
        if w < theta || !completed(&candidate) {
            continue;
        }
        if &current != trustor && graph.w(trustor, &candidate).is_some_and(|d| d >= theta) {
            continue;
        }
        let reached = trust * w;
        let hops = path.len() + 1;
        let entry = best.entry(candidate.clone()).or_insert((reached, hops));
        if reached > entry.0 || (reached == entry.0 && hops < entry.1) {
            *entry = (reached, hops);
        }
        saved_trust.push(trust);
        trust = reached;
        path.push(candidate);
        cursor.push(0);
    }

    let mut advisors = BTreeMap::new();
    for (agent, (path_trust, hops)) in best {
        let key = (agent.clone(), trustee.clone(), category.clone());
        if let Some(rs) = graph.ratings.get(&key) {
            advisors.insert(
                agent,
                OracleAdvisor {
                    rating: rs.iter().sum::<f64>() / rs.len() as f64,
                    path_trust,
                    hops,
                },
            );
        }
    }

    let kept: Vec<&OracleAdvisor> = advisors
        .values()
        .filter(|a| a.path_trust > config.path_trust_threshold)
        .collect();
    let value = match kept.as_slice() {
        [] => None,
        [only] => Some(only.rating * config.path_decay.powi(only.hops as i32)),
        many => {
            let mut num = 0.0;
            let mut den = 0.0;
            for a in many {
                num += a.rating * a.path_trust;
                den += a.path_trust;
            }
            Some((num / den).clamp(0.0, 1.0))
        }
    };
    Ok(OracleIndirect { value, advisors })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleReputation {
    pub nodes: Vec<AgentId>,
    /// Dense row-stochastic matrix.
    pub matrix: Vec<Vec<f64>>,
    pub raw: Vec<f64>,
    pub normalized: Vec<f64>,
    pub iterations: u32,
}

/// Reputation by dense matrix construction and dense power iteration.
pub fn oracle_reputation(
    env: &Environment,
    log: &[Interaction],
    config: &TrustConfig,
) -> Result<OracleReputation> {
    let graph = RawGraph::new(log, env.snapshot_time(), env.decay_rate());
    let theta = config.trust_threshold;
    let nodes: Vec<AgentId> = graph
        .weight
        .values()
        .flat_map(|row| row.iter())
        .filter(|(_, &w)| w >= theta)
        .map(|(to, _)| to.clone())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let n = nodes.len();
    if n > REPUTATION_NODE_LIMIT {
        return Err(TrustError::SizeGuard {
            actual: n,
            limit: REPUTATION_NODE_LIMIT,
        });
    }
    if n == 0 {
        return Err(TrustError::EmptyReputationSet);
    }

    let mut matrix = vec![vec![0.0; n]; n];
    for (i, from) in nodes.iter().enumerate() {
        let row = &mut matrix[i];
        if n == 1 {
            row[0] = 1.0;
            continue;
        }
        let out: Vec<(usize, f64)> = (0..n)
            .filter(|&j| j != i)
            .filter_map(|j| graph.w(from, &nodes[j]).map(|w| (j, w)))
            .collect();
        let uniform_others = |row: &mut Vec<f64>, mass: f64| {
            for (j, cell) in row.iter_mut().enumerate() {
                if j != i {
                    *cell += mass / (n - 1) as f64;
                }
            }
        };
        if out.is_empty() {
            uniform_others(row, 1.0);
            continue;
        }
        let r_max = out.iter().map(|&(_, w)| w).fold(0.0, f64::max);
        let trusted: Vec<(usize, f64)> = out.iter().copied().filter(|&(_, w)| w >= theta).collect();
        let untrusted: Vec<usize> = out
            .iter()
            .filter(|&&(_, w)| w < theta)
            .map(|&(j, _)| j)
            .collect();
        let total: f64 = trusted.iter().map(|&(_, w)| w).sum();
        if total > 0.0 {
            for &(j, w) in &trusted {
                row[j] += r_max * w / total;
            }
        } else {
            uniform_others(row, r_max);
        }
        if untrusted.is_empty() {
            uniform_others(row, 1.0 - r_max);
        } else {
            for &j in &untrusted {
                row[j] += (1.0 - r_max) / untrusted.len() as f64;
            }
        }
    }

    let q = config.damping;
    let mut r = vec![1.0 / n as f64; n];
    let mut iterations = 0;
    while iterations < config.max_iter {
        let mut next = vec![(1.0 - q) / n as f64; n];
        for (j, cell) in next.iter_mut().enumerate() {
            let mut s = 0.0;
            for i in 0..n {
                s += matrix[i][j] * r[i];
            }
            *cell += q * s;
        }
        iterations += 1;
        let change: f64 = r.iter().zip(&next).map(|(a, b)| (a - b).abs()).sum();
        r = next;
        if change <= config.tolerance {
            break;
        }
    }
    let max = r.iter().copied().fold(0.0, f64::max);
    let normalized = r.iter().map(|x| x / max).collect();
    Ok(OracleReputation {
        nodes,
        matrix,
        raw: r,
        normalized,
        iterations,
    })
}

/// Parameters of a seeded batch comparison.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteParams {
    pub seed: u64,
    pub instances: usize,
    pub max_agents: usize,
    pub max_categories: usize,
    /// Agreement tolerance on acyclic instances.
    pub tolerance: f64,
}

impl Default for SuiteParams {
    fn default() -> Self {
        Self {
            seed: 42,
            instances: 100,
            max_agents: 8,
            max_categories: 3,
            tolerance: 1e-9,
        }
    }
}

/// A query on which engine and oracle disagree.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Deviation {
    pub instance: usize,
    pub acyclic: bool,
    pub trustor: AgentId,
    pub trustee: AgentId,
    pub category: TaskCategory,
    pub engine: Option<f64>,
    pub oracle: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub params: SuiteParams,
    pub instances: usize,
    pub queries: usize,
    /// Queries where at least one side produced a value.
    pub valued_queries: usize,
    /// Queries with at least one advisor path.
    pub queries_with_advisors: usize,
    pub acyclic_instances: usize,
    pub acyclic_mismatched_instances: usize,
    pub cyclic_instances: usize,
    pub cyclic_deviating_instances: usize,
    pub cyclic_deviation_rate: f64,
    /// Largest `|engine - oracle|` over queries where both have a value.
    pub max_deviation: f64,
    pub deviations: Vec<Deviation>,
}

impl SuiteReport {
    pub fn passed(&self) -> bool {
        self.acyclic_mismatched_instances == 0
    }
}

/// One generated oracle instance: `(params, acyclic)`.
pub fn suite_instance(params: &SuiteParams, index: usize) -> (GenParams, bool) {
    let mut draws = Draws::new(params.seed.wrapping_add(index as u64));
    let n_agents = 3 + draws.below(params.max_agents.max(3) - 2);
    let n_categories = 1 + draws.below(params.max_categories.max(1));
    let n_interactions = n_agents + draws.below(3 * n_agents);
    let acyclic = index % 2 == 0;
    (
        GenParams {
            seed: draws.next_u64(),
            n_agents,
            n_categories,
            n_interactions,
            rating_model: RatingModel::Uniform,
            time_horizon: 10.0,
            newcomer_fraction: 0.0,
            acyclic,
        },
        acyclic,
    )
}

fn agrees(engine: Option<f64>, oracle: Option<f64>, tolerance: f64) -> bool {
    match (engine, oracle) {
        (None, None) => true,
        (Some(a), Some(b)) => (a - b).abs() <= tolerance,
        _ => false,
    }
}

/// Compares the engine (unlimited step budget) with the exhaustive oracle
/// on every ordered agent pair and category of each seeded instance.
/// Advisor path trusts are compared as well as the aggregate.
pub fn run_indirect_suite(params: &SuiteParams, config: &TrustConfig) -> Result<SuiteReport> {
    let config = TrustConfig {
        search_budget: SearchBudget::UNLIMITED,
        ..config.clone()
    };
    let mut report = SuiteReport {
        params: params.clone(),
        instances: params.instances,
        queries: 0,
        valued_queries: 0,
        queries_with_advisors: 0,
        acyclic_instances: 0,
        acyclic_mismatched_instances: 0,
        cyclic_instances: 0,
        cyclic_deviating_instances: 0,
        cyclic_deviation_rate: 0.0,
        max_deviation: 0.0,
        deviations: Vec::new(),
    };
    for index in 0..params.instances {
        let (gen, acyclic) = suite_instance(params, index);
        let generated = generate(&gen)?;
        let env = Environment::build_with_profiles(
            &generated.log,
            &generated.profiles,
            gen.time_horizon,
            config.direct_decay_rate,
        )?;
        let agents: Vec<AgentId> = env.agent_ids().cloned().collect();
        let categories: Vec<TaskCategory> = (0..gen.n_categories)
            .map(|k| TaskCategory::new(crate::simgen::category_name(k)))
            .collect();
        let mut deviated = false;
        for trustor in &agents {
            for trustee in agents.iter().filter(|a| *a != trustor) {
                for category in &categories {
                    report.queries += 1;
                    let table = find_paths(&env, trustor, trustee, category, &config)?;
                    table.check_invariants(&env, config.trust_threshold)?;
                    let engine =
                        aggregate(&table, config.path_trust_threshold, config.path_decay);
                    let oracle =
                        oracle_indirect(&env, &generated.log, trustor, trustee, category, &config)?;
                    if engine.value.is_some() || oracle.value.is_some() {
                        report.valued_queries += 1;
                    }
                    if !oracle.advisors.is_empty() {
                        report.queries_with_advisors += 1;
                    }
                    let mut ok = agrees(engine.value, oracle.value, params.tolerance);
                    if let (Some(a), Some(b)) = (engine.value, oracle.value) {
                        report.max_deviation = report.max_deviation.max((a - b).abs());
                    }
                    // Advisor sets and their best path trusts, before filtering.
                    let engine_advisors: BTreeMap<&AgentId, f64> = table
                        .trustee_rows
                        .iter()
                        .filter(|t| &t.advisor != trustor)
                        .filter_map(|t| table.row(&t.advisor).map(|r| (&t.advisor, r.cum_trust)))
                        .collect();
                    ok &= engine_advisors.len() == oracle.advisors.len()
                        && oracle.advisors.iter().all(|(a, o)| {
                            engine_advisors
                                .get(a)
                                .is_some_and(|&t| (t - o.path_trust).abs() <= params.tolerance)
                        });
                    if !ok {
                        deviated = true;
                        report.deviations.push(Deviation {
                            instance: index,
                            acyclic,
                            trustor: trustor.clone(),
                            trustee: trustee.clone(),
                            category: category.clone(),
                            engine: engine.value,
                            oracle: oracle.value,
                        });
                    }
                }
            }
        }
        if acyclic {
            report.acyclic_instances += 1;
            report.acyclic_mismatched_instances += usize::from(deviated);
        } else {
            report.cyclic_instances += 1;
            report.cyclic_deviating_instances += usize::from(deviated);
        }
    }
    if report.cyclic_instances > 0 {
        report.cyclic_deviation_rate =
            report.cyclic_deviating_instances as f64 / report.cyclic_instances as f64;
    }
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReputationSuiteReport {
    pub seed: u64,
    pub instances: usize,
    /// Instances whose reputation node set was empty.
    pub empty_instances: usize,
    pub max_nodes: usize,
    pub max_entry_gap: f64,
    pub max_row_error: f64,
    pub max_iterations: u32,
    pub unconverged: usize,
}

/// Compares engine reputation with the dense reference on seeded instances
/// of 2 to `max_agents` agents.
pub fn run_reputation_suite(
    seed: u64,
    instances: usize,
    max_agents: usize,
    config: &TrustConfig,
) -> Result<ReputationSuiteReport> {
    let mut report = ReputationSuiteReport {
        seed,
        instances,
        empty_instances: 0,
        max_nodes: 0,
        max_entry_gap: 0.0,
        max_row_error: 0.0,
        max_iterations: 0,
        unconverged: 0,
    };
    let mut sizes = Draws::new(seed);
    for index in 0..instances {
        let n_agents = 2 + sizes.below(max_agents.max(2) - 1);
        let params = GenParams {
            seed: seed.wrapping_add(index as u64),
            n_agents,
            n_categories: 3,
            n_interactions: 8 * n_agents,
            rating_model: RatingModel::Uniform,
            time_horizon: 100.0,
            newcomer_fraction: 0.0,
            acyclic: false,
        };
        let g = generate(&params)?;
        let env = Environment::build_with_profiles(
            &g.log,
            &g.profiles,
            params.time_horizon,
            config.direct_decay_rate,
        )?;
        let model = ReputationModel::build(&env, config)?;
        if model.nodes.is_empty() {
            report.empty_instances += 1;
            continue;
        }
        report.max_nodes = report.max_nodes.max(model.nodes.len());
        report.max_iterations = report.max_iterations.max(model.iterations);
        report.unconverged += usize::from(!model.converged);
        for row in &model.matrix.rows {
            report.max_row_error = report.max_row_error.max((row.sum() - 1.0).abs());
        }
        let oracle = oracle_reputation(&env, &g.log, config)?;
        report.max_entry_gap = report.max_entry_gap.max(reputation_gap(&model, &oracle)?);
    }
    Ok(report)
}

/// Largest entrywise gap between the engine's normalized reputation and the
/// dense reference, after checking both use the same node order.
pub fn reputation_gap(model: &ReputationModel, oracle: &OracleReputation) -> Result<f64> {
    if model.nodes != oracle.nodes {
        return Err(TrustError::InvariantViolation(
            "engine and oracle disagree on the reputation node set".into(),
        ));
    }
    Ok(model
        .normalized
        .iter()
        .zip(&oracle.normalized)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max))
}
