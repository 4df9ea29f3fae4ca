use serde::{Deserialize, Serialize};

use crate::model::AgentId;

use super::table::PropagationTable;

/// One advisor path that survived the path-trust filter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathContribution {
    pub advisor: AgentId,
    /// Advisor's rating of the trustee.
    pub rating: f64,
    /// Advisor's cumulative trust from the trustor.
    pub path_trust: f64,
    /// Hops trustor -> ... -> advisor -> trustee.
    pub hops: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndirectTrustResult {
    pub value: Option<f64>,
    pub retained: Vec<PathContribution>,
    /// Indirect advisor paths found before filtering.
    pub discovered: usize,
}

impl IndirectTrustResult {
    pub fn path_count(&self) -> u64 {
        self.retained.len() as u64
    }
}

/// Aggregates the advisors' ratings of the trustee.
///
/// Paths whose advisor trust does not exceed `path_threshold` are dropped.
/// Several survivors give the trust-weighted mean of their ratings; a single
/// survivor gives `rating * decay^hops`. The trustor itself is never an
/// advisor: its own rating is direct trust.
pub fn aggregate(table: &PropagationTable, path_threshold: f64, decay: f64) -> IndirectTrustResult {
    let candidates: Vec<PathContribution> = table
        .trustee_rows
        .iter()
        .filter(|t| t.advisor != table.trustor)
        .filter_map(|t| {
            let advisor = table.rows.get(&t.advisor)?;
            Some(PathContribution {
                advisor: t.advisor.clone(),
                rating: t.rating,
                path_trust: advisor.cum_trust,
                hops: advisor.path.len() + 1,
            })
        })
        .collect();
    let discovered = candidates.len();
    let retained: Vec<PathContribution> = candidates
        .into_iter()
        .filter(|c| c.path_trust > path_threshold)
        .collect();
    IndirectTrustResult {
        value: combine(&retained, decay),
        retained,
        discovered,
    }
}

/// The aggregation rule on already filtered contributions.
pub(crate) fn combine(retained: &[PathContribution], decay: f64) -> Option<f64> {
    match retained {
        [] => None,
        [single] => Some(single.rating * decay.powi(single.hops as i32)),
        many => {
            let num: f64 = many.iter().map(|c| c.rating * c.path_trust).sum();
            let den: f64 = many.iter().map(|c| c.path_trust).sum();
            Some((num / den).clamp(0.0, 1.0))
        }
    }
}
