use std::collections::BTreeMap;

use xrl_explain::ape::{ape_explain_all, ApeOutcome};
use xrl_explain::envs::EnvKind;
use xrl_explain::pipeline::{build_schema, run_pipeline, run_with_schema, LimitSource, PipelineConfig};
use xrl_explain::predicates::PredicateSchema;
use xrl_explain::replay::{ingest, Format, ReplaySet};
use xrl_explain::rules::RuleSet;
use xrl_explain::text::render_explanation;
use xrl_explain::trainer::{collect_replay, train_tabular_q, TrainConfig};

fn replay(kind: EnvKind, steps: usize) -> ReplaySet {
    let (policy, _) = train_tabular_q(kind, &TrainConfig::for_env(kind)).unwrap();
    collect_replay(kind, |s| Ok(policy.act(s)), steps).unwrap()
}

#[test]
fn replay_formats_round_trip_through_files() {
    let rs = replay(EnvKind::MountainCar, 1000);
    let dir = tempfile::tempdir().unwrap();
    let sidecar = rs.sidecar();
    for (name, format) in [("r.db", Format::Db), ("r.csv", Format::Csv), ("r.jsonl", Format::Jsonl)] {
        let path = dir.path().join(name);
        rs.write(&path, format).unwrap();
        let back = ingest(&path, format, Some(&sidecar)).unwrap();
        assert_eq!(back, rs, "{name}");
    }
}

#[test]
fn artifacts_reload_to_the_same_results() {
    let rs = replay(EnvKind::MountainCar, 3000);
    let cfg = PipelineConfig {
        n_cat: 5,
        ..PipelineConfig::default()
    };
    let out = run_pipeline(&rs, &cfg, None).unwrap();
    let dir = tempfile::tempdir().unwrap();
    out.rules.save(dir.path().join("rules.json")).unwrap();
    out.schema.save(dir.path().join("predicates.json")).unwrap();
    let rules = RuleSet::load(dir.path().join("rules.json")).unwrap();
    let schema = PredicateSchema::load(dir.path().join("predicates.json")).unwrap();
    assert_eq!(rules, out.rules);
    assert_eq!(schema, out.schema);

    let again = run_with_schema(&rs, schema, &cfg, None).unwrap();
    assert_eq!(again.report.to_json().unwrap(), out.report.to_json().unwrap());
    for s in rs.states().take(200) {
        assert_eq!(rules.select_action(&out.schema, s).unwrap(), out.rules.select_action(&out.schema, s).unwrap());
    }
}

#[test]
fn cartpole_rules_are_deployable() {
    let rs = replay(EnvKind::CartPole, 5000);
    let out = run_pipeline(&rs, &PipelineConfig::default(), Some(EnvKind::CartPole)).unwrap();
    let perf = out.report.performance.as_ref().unwrap();
    assert_eq!(perf.episodes.len(), 10);
    assert!(perf.episodes.iter().all(|e| e.e_ts >= 1 && e.e_ts <= 500));
    assert!(out.report.e_f1 > 0.0 && out.report.e_f1 <= 1.0);
    for (&a, conds) in &out.conditions {
        let text = render_explanation(conds, &out.schema, &rs.action_names()[a]).unwrap();
        assert!(!text.is_empty());
    }
}

#[test]
fn ape_on_mountaincar_gives_no_explanation() {
    let rs = replay(EnvKind::MountainCar, 10_000);
    let cfg = PipelineConfig {
        n_cat: 2,
        ..PipelineConfig::default()
    };
    let schema = build_schema(&rs, &cfg).unwrap();
    let ape = ape_explain_all(&rs, &schema).unwrap();
    assert!(ape.values().all(|o| *o == ApeOutcome::NoExplanation), "{ape:?}");
    let cbs = run_with_schema(&rs, schema, &cfg, None).unwrap();
    assert!(cbs.conditions.values().any(|c| c.iter().any(|c| !c.is_empty())));
}

#[test]
fn median_source_reports_every_metric() {
    let rs = replay(EnvKind::MountainCar, 3000);
    let cfg = PipelineConfig {
        source: LimitSource::Median,
        ..PipelineConfig::default()
    };
    let out = run_pipeline(&rs, &cfg, None).unwrap();
    let v: BTreeMap<String, serde_json::Value> = serde_json::from_str(&out.report.to_json().unwrap()).unwrap();
    for key in ["fingerprint", "e_approx", "e_len", "e_dup", "e_acc", "e_rec", "e_f1", "confusion"] {
        assert!(v.contains_key(key), "{key}");
    }
    assert!(!v.contains_key("performance"));
}
