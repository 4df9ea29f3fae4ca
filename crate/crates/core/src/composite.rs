//! Weighted combination of direct trust, indirect trust and reputation.
//!
//! The direct weight `alpha` grows with the amount of direct evidence
//! relative to `dt_min`, the average interaction count of the participants
//! in the category. The indirect weight `beta` takes a share of what is left
//! in proportion to the number of indirect paths. Reputation receives the
//! rest, plus the weight of any component that could not be computed.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::config::TrustConfig;
use crate::direct::{direct_trust, DirectTrustSource};
use crate::error::{Result, TrustError};
use crate::indirect::{aggregate, find_paths, PathContribution};
use crate::model::{AgentId, AgentProfile, Environment, Interaction, TaskCategory};
use crate::reputation::ReputationModel;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CompositeInputs {
    pub n_same: u64,
    pub n_other: u64,
    pub n_paths: u64,
    pub dt_min: f64,
    pub trustee_did_c: bool,
    pub trustee_can_c: bool,
}

/// Interactions on `category` before `now` divided by the number of agents
/// taking part in them, floored at 1.
pub fn dt_min(log: &[Interaction], category: &TaskCategory, now: f64) -> f64 {
    let mut participants = BTreeSet::new();
    let mut count = 0u64;
    for i in log.iter().filter(|i| &i.category == category && i.time < now) {
        count += 1;
        participants.insert(&i.trustor);
        participants.insert(&i.trustee);
    }
    if participants.is_empty() {
        return 1.0;
    }
    (count as f64 / participants.len() as f64).max(1.0)
}

pub fn alpha(inputs: &CompositeInputs) -> f64 {
    let n_same = inputs.n_same as f64;
    let n_other = inputs.n_other as f64;
    if inputs.n_same == 0 {
        if n_other < inputs.dt_min {
            n_other / (2.0 * inputs.dt_min)
        } else {
            0.5
        }
    } else if n_same < inputs.dt_min {
        n_same / inputs.dt_min
    } else {
        1.0
    }
}

pub fn beta(alpha: f64, inputs: &CompositeInputs) -> Result<f64, CapabilityError> {
    if !inputs.trustee_can_c {
        return Err(CapabilityError);
    }
    if !inputs.trustee_did_c {
        return Ok(0.0);
    }
    let n_paths = inputs.n_paths as f64;
    if n_paths < inputs.dt_min {
        Ok((1.0 - alpha) * n_paths / inputs.dt_min)
    } else {
        Ok(1.0 - alpha)
    }
}

/// The trustee cannot perform the category, so the evaluation is undefined.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CapabilityError;

/// Weights actually applied after absent components hand theirs to
/// reputation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Weights {
    pub direct: f64,
    pub indirect: f64,
    pub reputation: f64,
}

pub fn combine(
    direct: Option<f64>,
    indirect: Option<f64>,
    reputation: f64,
    alpha: f64,
    beta: f64,
) -> (f64, Weights) {
    let w_direct = if direct.is_some() { alpha } else { 0.0 };
    let w_indirect = if indirect.is_some() { beta } else { 0.0 };
    let w_reputation = (1.0 - w_direct - w_indirect).max(0.0);
    let mut trust = 0.0;
    if let Some(v) = direct {
        trust += w_direct * v;
    }
    if let Some(v) = indirect {
        trust += w_indirect * v;
    }
    trust += w_reputation * reputation;
    (
        trust.clamp(0.0, 1.0),
        Weights {
            direct: w_direct,
            indirect: w_indirect,
            reputation: w_reputation,
        },
    )
}

/// Who evaluates whom, for which category, at which time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Query {
    pub trustor: AgentId,
    pub trustee: AgentId,
    pub category: TaskCategory,
    pub time: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReputationDiagnostics {
    pub in_reputation_set: bool,
    pub neutral_prior_used: bool,
    pub nodes: usize,
    pub iterations: u32,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    #[serde(flatten)]
    pub inputs: CompositeInputs,
    pub direct_source: DirectTrustSource,
    pub weights: Weights,
    pub paths: Vec<PathContribution>,
    pub paths_discovered: usize,
    pub search_expansions: u64,
    pub search_budget_exhausted: bool,
    pub reputation: ReputationDiagnostics,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrustReport {
    pub trust: f64,
    pub alpha: f64,
    pub beta: f64,
    pub direct: Option<f64>,
    pub indirect: Option<f64>,
    pub reputation: f64,
    pub diagnostics: Diagnostics,
}

impl TrustReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("report serializes")
    }
}

/// Evaluates one query. Builds the reputation model on the fly; use
/// [`Evaluator`] to share it across queries.
pub fn evaluate(
    env: &Environment,
    log: &[Interaction],
    query: &Query,
    config: &TrustConfig,
) -> Result<TrustReport> {
    check_query(env, query)?;
    let model = ReputationModel::build(env, config)?;
    evaluate_with_model(env, log, &model, query, config)
}

fn check_query(env: &Environment, query: &Query) -> Result<()> {
    env.require(&query.trustor)?;
    env.require(&query.trustee)?;
    if query.trustor == query.trustee {
        return Err(TrustError::SelfEvaluation(query.trustor.clone()));
    }
    if query.time != env.snapshot_time() {
        return Err(TrustError::SnapshotTimeMismatch {
            query: query.time,
            snapshot: env.snapshot_time(),
        });
    }
    Ok(())
}

/// Evaluates one query against a prebuilt reputation model of `env`.
pub fn evaluate_with_model(
    env: &Environment,
    log: &[Interaction],
    model: &ReputationModel,
    query: &Query,
    config: &TrustConfig,
) -> Result<TrustReport> {
    check_query(env, query)?;
    let Query {
        trustor,
        trustee,
        category,
        time,
    } = query;
    let trustee_can_c = env.is_able(trustee, category);
    if !trustee_can_c {
        return Err(TrustError::MissingCapability {
            agent: trustee.clone(),
            category: category.clone(),
        });
    }

    let direct = direct_trust(log, trustor, trustee, category, *time, config.direct_decay_rate);
    let table = find_paths(env, trustor, trustee, category, config)?;
    let indirect = aggregate(&table, config.path_trust_threshold, config.path_decay);
    let reputation = model.reputation_of(trustee, config.neutral_reputation);

    let inputs = CompositeInputs {
        n_same: direct.n_same,
        n_other: direct.n_other,
        n_paths: indirect.path_count(),
        dt_min: dt_min(log, category, *time),
        trustee_did_c: env.has_completed(trustee, category),
        trustee_can_c,
    };
    let a = alpha(&inputs);
    let b = beta(a, &inputs).map_err(|_| TrustError::MissingCapability {
        agent: trustee.clone(),
        category: category.clone(),
    })?;
    let (trust, weights) = combine(direct.value, indirect.value, reputation.value, a, b);

    Ok(TrustReport {
        trust,
        alpha: a,
        beta: b,
        direct: direct.value,
        indirect: indirect.value,
        reputation: reputation.value,
        diagnostics: Diagnostics {
            inputs,
            direct_source: direct.source,
            weights,
            paths: indirect.retained,
            paths_discovered: indirect.discovered,
            search_expansions: table.expansions,
            search_budget_exhausted: table.budget_exhausted,
            reputation: ReputationDiagnostics {
                in_reputation_set: reputation.in_reputation_set,
                neutral_prior_used: reputation.neutral_prior_used,
                nodes: model.nodes.len(),
                iterations: model.iterations,
                converged: model.converged,
            },
        },
    })
}

/// An environment snapshot with its log, configuration and reputation
/// model, answering any number of queries at the snapshot time.
#[derive(Debug, Clone)]
pub struct Evaluator {
    env: Environment,
    log: Vec<Interaction>,
    config: TrustConfig,
    model: ReputationModel,
}

impl Evaluator {
    pub fn new(
        log: &[Interaction],
        profiles: &[AgentProfile],
        time: f64,
        config: TrustConfig,
    ) -> Result<Self> {
        let env =
            Environment::build_with_profiles(log, profiles, time, config.direct_decay_rate)?;
        let mut log: Vec<Interaction> = log.iter().filter(|i| i.time < time).cloned().collect();
        log.sort_by(|a, b| a.canonical_cmp(b));
        let model = ReputationModel::build(&env, &config)?;
        Ok(Self {
            env,
            log,
            config,
            model,
        })
    }

    pub fn environment(&self) -> &Environment {
        &self.env
    }

    pub fn model(&self) -> &ReputationModel {
        &self.model
    }

    pub fn config(&self) -> &TrustConfig {
        &self.config
    }

    pub fn evaluate(
        &self,
        trustor: &AgentId,
        trustee: &AgentId,
        category: &TaskCategory,
    ) -> Result<TrustReport> {
        let query = Query {
            trustor: trustor.clone(),
            trustee: trustee.clone(),
            category: category.clone(),
            time: self.env.snapshot_time(),
        };
        evaluate_with_model(&self.env, &self.log, &self.model, &query, &self.config)
    }
}
