//! Direct trust: the trustor's own time-discounted ratings of the trustee.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::model::{AgentId, Interaction, TaskCategory};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DirectTrustSource {
    SameCategory,
    CrossCategoryFallback,
    None,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DirectTrustResult {
    pub value: Option<f64>,
    pub source: DirectTrustSource,
    /// Interactions trustor -> trustee on the requested category.
    pub n_same: u64,
    /// Interactions trustor -> trustee on all other categories.
    pub n_other: u64,
}

/// Discount `exp(-rate * (now - t))` of a rating made at `t`.
pub fn decay_weight(t: f64, now: f64, rate: f64) -> f64 {
    (-rate * (now - t)).exp()
}

/// Decay-weighted mean of `(rating, time)` samples.
///
/// Weights are taken relative to the latest sample. The common factor
/// `exp(-rate * (now - latest))` cancels in the ratio, so the value equals
/// the mean under `decay_weight(t, now, rate)` for any `now`, and the
/// denominator never underflows.
pub fn decayed_mean(samples: &[(f64, f64)], rate: f64) -> Option<f64> {
    let latest = samples
        .iter()
        .map(|&(_, t)| t)
        .fold(f64::NEG_INFINITY, f64::max);
    if samples.is_empty() {
        return None;
    }
    let (mut num, mut den) = (0.0, 0.0);
    for &(rating, t) in samples {
        let w = decay_weight(t, latest, rate);
        num += rating * w;
        den += w;
    }
    Some((num / den).clamp(0.0, 1.0))
}

/// Direct trust of `trustor` in `trustee` on `category` at time `now`.
///
/// Uses the ratings on `category` made strictly before `now`. Without any,
/// falls back to the unweighted mean of the per-category decayed means over
/// the other categories that have ratings.
pub fn direct_trust(
    log: &[Interaction],
    trustor: &AgentId,
    trustee: &AgentId,
    category: &TaskCategory,
    now: f64,
    rate: f64,
) -> DirectTrustResult {
    let mut relevant: Vec<&Interaction> = log
        .iter()
        .filter(|i| &i.trustor == trustor && &i.trustee == trustee && i.time < now)
        .collect();
    relevant.sort_by(|a, b| a.canonical_cmp(b));

    let mut per_category: BTreeMap<&TaskCategory, Vec<(f64, f64)>> = BTreeMap::new();
    for i in &relevant {
        per_category
            .entry(&i.category)
            .or_default()
            .push((i.rating, i.time));
    }

    let n_same = per_category.get(category).map_or(0, |s| s.len() as u64);
    let n_other = relevant.len() as u64 - n_same;

    if let Some(samples) = per_category.get(category) {
        return DirectTrustResult {
            value: decayed_mean(samples, rate),
            source: DirectTrustSource::SameCategory,
            n_same,
            n_other,
        };
    }
    if n_other > 0 {
        let means: Vec<f64> = per_category
            .values()
            .filter_map(|s| decayed_mean(s, rate))
            .collect();
        let value = means.iter().sum::<f64>() / means.len() as f64;
        return DirectTrustResult {
            value: Some(value.clamp(0.0, 1.0)),
            source: DirectTrustSource::CrossCategoryFallback,
            n_same,
            n_other,
        };
    }
    DirectTrustResult {
        value: None,
        source: DirectTrustSource::None,
        n_same: 0,
        n_other: 0,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn run(log: &[Interaction], category: &str, now: f64, rate: f64) -> DirectTrustResult {
        direct_trust(log, &"A".into(), &"B".into(), &category.into(), now, rate)
    }

    #[test]
    fn decay_weight_values() {
        assert_eq!(decay_weight(10.0, 10.0, 0.5), 1.0);
        assert_eq!(decay_weight(0.0, 10.0, 0.0), 1.0);
        assert!((decay_weight(0.0, 10.0, 0.1) - 0.367879).abs() < 1e-6);
    }

    #[test]
    fn single_same_category() {
        let log = [Interaction::new("A", "B", 0.6, "c", 3.0)];
        let r = run(&log, "c", 10.0, 0.2);
        assert_eq!(r.value, Some(0.6));
        assert_eq!(r.source, DirectTrustSource::SameCategory);
        assert_eq!((r.n_same, r.n_other), (1, 0));
    }

    #[test]
    fn two_ratings_with_decay() {
        let log = [
            Interaction::new("A", "B", 1.0, "c", 0.0),
            Interaction::new("A", "B", 0.0, "c", 9.0),
        ];
        // direct summation at now = 10
        let w0 = (-0.1f64 * 10.0).exp();
        let w9 = (-0.1f64 * 1.0).exp();
        let oracle = (1.0 * w0 + 0.0 * w9) / (w0 + w9);
        let r = run(&log, "c", 10.0, 0.1);
        assert!((r.value.unwrap() - oracle).abs() < 1e-12);
        assert!((r.value.unwrap() - 0.289050).abs() < 1e-6);
    }

    #[test]
    fn cross_category_fallback() {
        let log = [
            Interaction::new("A", "B", 0.2, "c1", 1.0),
            Interaction::new("A", "B", 0.6, "c1", 2.0),
            Interaction::new("A", "B", 0.8, "c2", 3.0),
        ];
        let r = run(&log, "c", 10.0, 0.0);
        // per-category means 0.4 and 0.8, then their unweighted mean
        assert!((r.value.unwrap() - 0.6).abs() < 1e-12);
        assert_eq!(r.source, DirectTrustSource::CrossCategoryFallback);
        assert_eq!((r.n_same, r.n_other), (0, 3));
    }

    #[test]
    fn nothing_to_go_on() {
        let log = [
            Interaction::new("B", "A", 0.9, "c", 1.0),
            Interaction::new("A", "B", 0.9, "c", 20.0),
        ];
        let r = run(&log, "c", 10.0, 0.0);
        assert_eq!(r.value, None);
        assert_eq!(r.source, DirectTrustSource::None);
    }

    #[test]
    fn huge_gaps_do_not_underflow() {
        let log = [
            Interaction::new("A", "B", 0.3, "c", 0.0),
            Interaction::new("A", "B", 0.5, "c", 1.0),
        ];
        let r = run(&log, "c", 1e7, 0.01);
        assert!(r.value.unwrap().is_finite());
    }

    fn arb_log() -> impl Strategy<Value = Vec<(f64, u32, bool)>> {
        prop::collection::vec((0.0f64..=1.0, 0u32..100, any::<bool>()), 1..12)
    }

    fn to_log(raw: &[(f64, u32, bool)]) -> Vec<Interaction> {
        raw.iter()
            .map(|&(r, t, same)| {
                Interaction::new("A", "B", r, if same { "c" } else { "x" }, t as f64)
            })
            .collect()
    }

    proptest! {
        #[test]
        fn value_in_unit_interval(raw in arb_log(), rate in 0.0f64..2.0) {
            let r = run(&to_log(&raw), "c", 100.0, rate);
            if let Some(v) = r.value {
                prop_assert!((0.0..=1.0).contains(&v));
            }
        }

        #[test]
        fn zero_rate_is_arithmetic_mean(raw in arb_log()) {
            let log = to_log(&raw);
            let r = run(&log, "c", 100.0, 0.0);
            let same: Vec<f64> = log.iter().filter(|i| i.category.as_str() == "c").map(|i| i.rating).collect();
            if !same.is_empty() {
                let mean = same.iter().sum::<f64>() / same.len() as f64;
                prop_assert!((r.value.unwrap() - mean).abs() < 1e-12);
            }
        }

        #[test]
        fn time_shift_covariance(raw in arb_log(), shift in 0u32..1000, rate in 0.0f64..1.0) {
            let log = to_log(&raw);
            let shifted: Vec<Interaction> = log.iter().cloned().map(|mut i| { i.time += shift as f64; i }).collect();
            let a = run(&log, "c", 100.0, rate);
            let b = run(&shifted, "c", 100.0 + shift as f64, rate);
            prop_assert_eq!(a, b);
        }

        #[test]
        fn recency_moves_toward_newer(old in 0.0f64..=1.0, new in 0.0f64..=1.0, lo in 0.0f64..1.0, hi in 1.0f64..3.0) {
            prop_assume!((old - new).abs() > 1e-6);
            let log = [
                Interaction::new("A", "B", old, "c", 0.0),
                Interaction::new("A", "B", new, "c", 5.0),
            ];
            let slow = run(&log, "c", 10.0, lo).value.unwrap();
            let fast = run(&log, "c", 10.0, hi).value.unwrap();
            prop_assert!((fast - new).abs() < (slow - new).abs());
        }

        #[test]
        fn input_order_irrelevant(raw in arb_log(), rate in 0.0f64..1.0) {
            let log = to_log(&raw);
            let mut reversed = log.clone();
            reversed.reverse();
            prop_assert_eq!(run(&log, "c", 100.0, rate), run(&reversed, "c", 100.0, rate));
        }
    }
}
