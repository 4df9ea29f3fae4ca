//! Global reputation by damped power iteration over a reputation
//! propagation matrix.
//!
//! Only agents that some other agent trusts (incoming edge weight at least
//! the trust threshold) take part. Each participant hands out one unit of
//! reputation: a share `r_max` (its largest out-weight inside the node set)
//! goes to trusted out-neighbours in proportion to their weights, the rest
//! `1 - r_max` is split equally among untrusted out-neighbours. Mass with
//! no recipient is spread uniformly over all other participants.

use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::config::TrustConfig;
use crate::error::{Result, TrustError};
use crate::model::{AgentId, Environment};

/// One row of the propagation matrix: explicit entries plus `spread`, a mass
/// divided evenly over every other node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixRow {
    pub entries: Vec<(usize, f64)>,
    pub spread: f64,
}

impl MatrixRow {
    pub fn sum(&self) -> f64 {
        self.entries.iter().map(|&(_, w)| w).sum::<f64>() + self.spread
    }
}

/// Row-stochastic matrix over the reputation node set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PropagationMatrix {
    pub rows: Vec<MatrixRow>,
}

impl PropagationMatrix {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Expanded `(row, col, weight)` triples, spread mass included, in
    /// row-major order. Zero cells without an explicit entry are omitted.
    pub fn triples(&self) -> Vec<(usize, usize, f64)> {
        let n = self.rows.len();
        let mut out = Vec::new();
        for (i, row) in self.rows.iter().enumerate() {
            let mut dense = vec![None::<f64>; n];
            for &(j, w) in &row.entries {
                *dense[j].get_or_insert(0.0) += w;
            }
            if row.spread > 0.0 && n > 1 {
                let share = row.spread / (n - 1) as f64;
                for (j, cell) in dense.iter_mut().enumerate() {
                    if j != i {
                        *cell.get_or_insert(0.0) += share;
                    }
                }
            }
            out.extend(
                dense
                    .into_iter()
                    .enumerate()
                    .filter_map(|(j, w)| w.map(|w| (i, j, w))),
            );
        }
        out
    }

    /// `out = self^T * x`.
    fn transpose_mul(&self, x: &[f64], out: &mut [f64]) {
        let n = self.rows.len();
        out.iter_mut().for_each(|v| *v = 0.0);
        let mut spread_total = 0.0;
        for (i, row) in self.rows.iter().enumerate() {
            for &(j, w) in &row.entries {
                out[j] += w * x[i];
            }
            spread_total += row.spread * x[i];
        }
        if n > 1 {
            let denom = (n - 1) as f64;
            for (j, v) in out.iter_mut().enumerate() {
                *v += (spread_total - self.rows[j].spread * x[j]) / denom;
            }
        }
    }
}

/// Agents with at least one incoming edge of weight `>= threshold`, sorted.
pub fn reputation_nodes(env: &Environment, threshold: f64) -> Vec<AgentId> {
    let mut nodes: Vec<AgentId> = env
        .edges()
        .filter(|(from, to, e)| from != to && e.weight >= threshold)
        .map(|(_, to, _)| to.clone())
        .collect();
    nodes.sort();
    nodes.dedup();
    nodes
}

/// Builds the propagation matrix over `nodes` (which must be sorted).
pub fn propagation_matrix(env: &Environment, nodes: &[AgentId], threshold: f64) -> PropagationMatrix {
    let n = nodes.len();
    let rows = nodes
        .iter()
        .enumerate()
        .map(|(i, agent)| {
            if n == 1 {
                return MatrixRow {
                    entries: vec![(0, 1.0)],
                    spread: 0.0,
                };
            }
            let mut trusted = Vec::new();
            let mut untrusted = Vec::new();
            for (to, edge) in env.out_edges(agent) {
                let Ok(j) = nodes.binary_search(to) else {
                    continue;
                };
                if j == i {
                    continue;
                }
                if edge.weight >= threshold {
                    trusted.push((j, edge.weight));
                } else {
                    untrusted.push(j);
                }
            }
            if trusted.is_empty() && untrusted.is_empty() {
                return MatrixRow {
                    entries: Vec::new(),
                    spread: 1.0,
                };
            }
            let r_max = env
                .out_edges(agent)
                .filter(|(to, _)| *to != agent && nodes.binary_search(to).is_ok())
                .map(|(_, e)| e.weight)
                .fold(0.0, f64::max);

            let mut entries = Vec::with_capacity(trusted.len() + untrusted.len());
            let mut spread = 0.0;
            let trusted_total: f64 = trusted.iter().map(|&(_, w)| w).sum();
            if trusted.is_empty() {
                spread += r_max;
            } else if trusted_total > 0.0 {
                entries.extend(trusted.iter().map(|&(j, w)| (j, w * r_max / trusted_total)));
            } else {
                entries.extend(trusted.iter().map(|&(j, _)| (j, 0.0)));
                spread += r_max;
            }
            if untrusted.is_empty() {
                spread += 1.0 - r_max;
            } else {
                let share = (1.0 - r_max) / untrusted.len() as f64;
                entries.extend(untrusted.iter().map(|&j| (j, share)));
            }
            entries.sort_by_key(|&(j, _)| j);
            MatrixRow { entries, spread }
        })
        .collect();
    PropagationMatrix { rows }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerIteration {
    pub vector: Vec<f64>,
    pub iterations: u32,
    pub converged: bool,
}

/// Damped power iteration `R <- q * E^T R + (1 - q) e` from the uniform
/// vector until the L1 change is at most `tolerance`, `max_iter` steps are
/// taken, or `budget` has elapsed.
pub fn pagerank(
    matrix: &PropagationMatrix,
    damping: f64,
    tolerance: f64,
    max_iter: u32,
    budget: Option<Duration>,
) -> Result<PowerIteration> {
    let n = matrix.len();
    if n == 0 {
        return Err(TrustError::EmptyReputationSet);
    }
    let started = budget.map(|_| Instant::now());
    let teleport = (1.0 - damping) / n as f64;
    let mut current = vec![1.0 / n as f64; n];
    let mut next = vec![0.0; n];
    let mut iterations = 0;
    let mut converged = false;

    while iterations < max_iter {
        matrix.transpose_mul(&current, &mut next);
        for v in next.iter_mut() {
            *v = damping * *v + teleport;
        }
        iterations += 1;
        let change: f64 = current.iter().zip(&next).map(|(a, b)| (a - b).abs()).sum();
        std::mem::swap(&mut current, &mut next);
        if change <= tolerance {
            converged = true;
            break;
        }
        if let (Some(t0), Some(limit)) = (started, budget) {
            if t0.elapsed() >= limit {
                break;
            }
        }
    }
    Ok(PowerIteration {
        vector: current,
        iterations,
        converged,
    })
}

/// Divides by the maximum entry; an all-zero vector maps to all ones.
pub fn normalize_by_max(v: &[f64]) -> Vec<f64> {
    let max = v.iter().copied().fold(0.0, f64::max);
    if max > 0.0 {
        v.iter().map(|x| x / max).collect()
    } else {
        vec![1.0; v.len()]
    }
}

/// Converged reputation over the node set, shared by all queries at one
/// snapshot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReputationModel {
    pub nodes: Vec<AgentId>,
    pub matrix: PropagationMatrix,
    /// Stationary vector before normalization.
    pub raw: Vec<f64>,
    pub normalized: Vec<f64>,
    pub iterations: u32,
    pub converged: bool,
    pub mean_reputation: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReputationLookup {
    pub value: f64,
    pub in_reputation_set: bool,
    pub neutral_prior_used: bool,
}

impl ReputationModel {
    pub fn build(env: &Environment, config: &TrustConfig) -> Result<Self> {
        let nodes = reputation_nodes(env, config.trust_threshold);
        let matrix = propagation_matrix(env, &nodes, config.trust_threshold);
        if nodes.is_empty() {
            return Ok(Self {
                nodes,
                matrix,
                raw: Vec::new(),
                normalized: Vec::new(),
                iterations: 0,
                converged: true,
                mean_reputation: None,
            });
        }
        let run = pagerank(
            &matrix,
            config.damping,
            config.tolerance,
            config.max_iter,
            config.pagerank_time_budget,
        )?;
        let normalized = normalize_by_max(&run.vector);
        let mean = normalized.iter().sum::<f64>() / normalized.len() as f64;
        Ok(Self {
            nodes,
            matrix,
            raw: run.vector,
            normalized,
            iterations: run.iterations,
            converged: run.converged,
            mean_reputation: Some(mean),
        })
    }

    pub fn position(&self, agent: &AgentId) -> Option<usize> {
        self.nodes.binary_search(agent).ok()
    }

    /// Normalized reputation of `agent`; agents outside the node set get the
    /// mean, and an empty model answers `neutral`.
    pub fn reputation_of(&self, agent: &AgentId, neutral: f64) -> ReputationLookup {
        match (self.position(agent), self.mean_reputation) {
            (Some(i), _) => ReputationLookup {
                value: self.normalized[i],
                in_reputation_set: true,
                neutral_prior_used: false,
            },
            (None, Some(mean)) => ReputationLookup {
                value: mean,
                in_reputation_set: false,
                neutral_prior_used: false,
            },
            (None, None) => ReputationLookup {
                value: neutral,
                in_reputation_set: false,
                neutral_prior_used: true,
            },
        }
    }
}
