use proptest::prelude::*;

use agent_trust::composite::{evaluate, Query};
use agent_trust::config::TrustConfig;
use agent_trust::indirect::{aggregate, find_paths};
use agent_trust::ingest::{parse_log, write_log};
use agent_trust::model::{AgentId, AgentProfile, Environment, Interaction, TaskCategory};
use agent_trust::oracle::{oracle_indirect, oracle_reputation, reputation_gap};
use agent_trust::reputation::ReputationModel;
use agent_trust::snapshot;

const NAMES: [&str; 8] = ["A", "B", "C", "D", "E", "F", "G", "H"];
const CATEGORIES: [&str; 3] = ["c0", "c1", "c2"];

fn arb_log(max_agents: usize, max_len: usize) -> impl Strategy<Value = Vec<Interaction>> {
    (2..=max_agents).prop_flat_map(move |n| {
        prop::collection::vec(
            (0..n, 1..n, 0..CATEGORIES.len(), 0.0..=1.0f64, 0.0..20.0f64),
            1..max_len,
        )
        .prop_map(move |raw| {
            raw.into_iter()
                .map(|(a, offset, c, rating, time)| {
                    let b = (a + offset) % n;
                    Interaction::new(NAMES[a], NAMES[b], rating, CATEGORIES[c], time)
                })
                .collect()
        })
    })
}

fn config(theta_r: f64, theta_p: f64) -> TrustConfig {
    TrustConfig {
        trust_threshold: theta_r,
        path_trust_threshold: theta_p,
        ..TrustConfig::default()
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn engine_matches_exhaustive_oracle(
        log in arb_log(7, 30),
        theta_r in 0.2..0.7f64,
        theta_p in 0.0..0.6f64,
        now in 5.0..25.0f64,
    ) {
        let cfg = config(theta_r, theta_p);
        let env = Environment::build(&log, now, cfg.direct_decay_rate).unwrap();
        let agents: Vec<AgentId> = env.agent_ids().cloned().collect();
        for tr in &agents {
            for te in agents.iter().filter(|a| *a != tr) {
                for c in CATEGORIES {
                    let c = TaskCategory::from(c);
                    let table = find_paths(&env, tr, te, &c, &cfg).unwrap();
                    table.check_invariants(&env, cfg.trust_threshold).unwrap();
                    let engine = aggregate(&table, cfg.path_trust_threshold, cfg.path_decay);
                    let oracle = oracle_indirect(&env, &log, tr, te, &c, &cfg).unwrap();
                    match (engine.value, oracle.value) {
                        (None, None) => {}
                        (Some(a), Some(b)) => prop_assert!((a - b).abs() <= 1e-9, "{a} vs {b}"),
                        other => prop_assert!(false, "{tr}->{te} on {c}: {other:?}"),
                    }
                    let found: Vec<&AgentId> = table
                        .trustee_rows
                        .iter()
                        .map(|r| &r.advisor)
                        .filter(|a| *a != tr)
                        .collect();
                    prop_assert_eq!(found.len(), oracle.advisors.len());
                    for advisor in found {
                        let want = oracle.advisors[advisor].path_trust;
                        let got = table.row(advisor).unwrap().cum_trust;
                        prop_assert!((got - want).abs() <= 1e-9);
                    }
                }
            }
        }
    }

    #[test]
    fn reputation_matches_dense_oracle(log in arb_log(8, 60), theta_r in 0.1..0.9f64) {
        let cfg = config(theta_r, 0.5);
        let env = Environment::build(&log, 30.0, cfg.direct_decay_rate).unwrap();
        let model = ReputationModel::build(&env, &cfg).unwrap();
        match oracle_reputation(&env, &log, &cfg) {
            Ok(dense) => prop_assert!(reputation_gap(&model, &dense).unwrap() <= 1e-8),
            Err(_) => prop_assert!(model.nodes.is_empty()),
        }
        for row in &model.matrix.rows {
            prop_assert!((row.sum() - 1.0).abs() <= 1e-9);
        }
    }

    #[test]
    fn reports_are_bounded_and_weights_sum_to_one(log in arb_log(6, 25)) {
        let cfg = TrustConfig::default();
        let env = Environment::build(&log, 30.0, cfg.direct_decay_rate).unwrap();
        let first = &log[0];
        let query = Query {
            trustor: first.trustor.clone(),
            trustee: first.trustee.clone(),
            category: first.category.clone(),
            time: 30.0,
        };
        let report = evaluate(&env, &log, &query, &cfg).unwrap();
        prop_assert!((0.0..=1.0).contains(&report.trust));
        let w = report.diagnostics.weights;
        prop_assert!((w.direct + w.indirect + w.reputation - 1.0).abs() <= 1e-12);
        prop_assert!(report.alpha + report.beta <= 1.0 + 1e-12);
    }

    #[test]
    fn log_text_round_trip(log in arb_log(8, 40)) {
        let mut buf = Vec::new();
        write_log(&mut buf, &log).unwrap();
        let parsed = parse_log(buf.as_slice(), true).unwrap();
        prop_assert!(parsed.errors.is_empty());
        prop_assert_eq!(parsed.interactions, log);
    }

    #[test]
    fn snapshot_round_trip(
        log in arb_log(8, 40),
        now in -5.0..1e6f64,
        rate in 0.0..2.0f64,
        newcomer in any::<bool>(),
    ) {
        let profiles = if newcomer {
            vec![AgentProfile::new("N").with_able(["c9"])]
        } else {
            vec![]
        };
        let env = Environment::build_with_profiles(&log, &profiles, now, rate).unwrap();
        let cfg = TrustConfig::default();
        let model = ReputationModel::build(&env, &cfg).unwrap();
        let bytes = snapshot::to_bytes(&env, Some(&model), &cfg);
        let back = snapshot::from_bytes(&bytes).unwrap();
        prop_assert_eq!(&back.environment, &env);
        prop_assert_eq!(back.reputation.as_ref(), Some(&model));
        prop_assert_eq!(snapshot::to_bytes(&back.environment, back.reputation.as_ref(), &cfg), bytes);
    }
}
