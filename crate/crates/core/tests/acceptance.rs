//! Acceptance suite. Runs every criterion in order, prints one line per
//! criterion and exits non-zero if any failed.

use std::collections::{BTreeMap, BTreeSet};
use std::process::ExitCode;
use std::time::Instant;

use rusqlite::Connection;
use xrl_explain::ape::{ape_explain_all, qm_minimize, ApeOutcome};
use xrl_explain::condition::Condition;
use xrl_explain::envs::EnvKind;
use xrl_explain::eval::eval_fidelity;
use xrl_explain::pipeline::{run_pipeline, summarize_per_action, LimitSource, PipelineConfig, EVAL_SEEDS};
use xrl_explain::predicates::{DiscreteState, PredicateSchema};
use xrl_explain::query::{parse_query, to_sql, validate_sql, QueryContext};
use xrl_explain::refine::{maximize_f1, minimize_duplicates, RefineConfig};
use xrl_explain::replay::{FeatureSchema, Format, ReplayRecord, ReplaySet};
use xrl_explain::rng::Rng;
use xrl_explain::rules::{extract_rules, WeightKind};
use xrl_explain::summarizer::SummarizerConfig;
use xrl_explain::sweep::{run_sweep, Grid};
use xrl_explain::trainer::{collect_replay, evaluate_returns, train_tabular_q, TabularPolicy, TrainConfig};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

struct MountainCar {
    policy: TabularPolicy,
    replay: ReplaySet,
    train_secs: f64,
}

fn mountaincar() -> MountainCar {
    let t = Instant::now();
    let (policy, _) = train_tabular_q(EnvKind::MountainCar, &TrainConfig::for_env(EnvKind::MountainCar)).unwrap();
    let replay = collect_replay(EnvKind::MountainCar, |s| Ok(policy.act(s)), 10_000).unwrap();
    MountainCar {
        policy,
        replay,
        train_secs: t.elapsed().as_secs_f64(),
    }
}

fn criterion_1(mc: &MountainCar) -> Outcome {
    let t = Instant::now();
    let mut worst: f64 = 0.0;
    let mut cells = 0;
    for source in [LimitSource::Gini, LimitSource::Median] {
        for n_cat in 2..=7 {
            let cfg = PipelineConfig {
                theta: 1.0,
                n_cat,
                source,
                ..PipelineConfig::default()
            };
            let out = run_pipeline(&mc.replay, &cfg, None).unwrap();
            worst = worst.max(out.report.e_approx);
            cells += 1;
        }
    }
    let secs = t.elapsed().as_secs_f64();
    outcome(
        worst == 0.0 && secs < 30.0,
        format!(
            "max E_approx {worst} over {cells} configs (gini/median x ncat 2..7), {} records, {secs:.2}s",
            mc.replay.len()
        ),
    )
}

fn criterion_2(mc: &MountainCar) -> Outcome {
    let base = PipelineConfig::default();
    let mut cells = 0;
    let mut rules = 0;
    let mut max_err: f64 = 0.0;
    let mut all_exact = true;
    let mut problems = Vec::new();
    for grid in Grid::ALL {
        for row in run_sweep(&mc.replay, grid, &base, None) {
            cells += 1;
            match row.weights {
                Some(w) => {
                    rules += w.conditions;
                    max_err = max_err.max(w.max_w2_sum_error);
                    all_exact &= w.exact;
                }
                None => problems.push(format!("{}: {}", row.label, row.error.unwrap_or_default())),
            }
        }
    }
    outcome(
        problems.is_empty() && max_err < 1e-12 && all_exact,
        format!(
            "{cells} sweep cells, {rules} distinct conditions, max |sum w2 - 1| = {max_err:e}, w4 == w1*w3 exact: {all_exact}{}",
            if problems.is_empty() { String::new() } else { format!(", failed cells: {problems:?}") }
        ),
    )
}

/// Level of `x` against ordered thresholds, written independently of the crate.
fn level(x: f64, thresholds: &[f64]) -> u16 {
    thresholds.iter().filter(|&&t| x > t).count() as u16
}

fn criterion_3() -> Outcome {
    let cuts = [1.0 / 3.0, 2.0 / 3.0];
    let schema = PredicateSchema::from_thresholds(&["a", "b", "c"], vec![cuts.to_vec(); 3]).unwrap();
    let policy = |l: &[u16]| ((l[0] + 2 * l[1] + l[2]) % 3) as usize;
    let mut rng = Rng::new(3, 0);
    let mut records = Vec::new();
    let centers = [1.0 / 6.0, 0.5, 5.0 / 6.0];
    let push = |state: Vec<f64>, records: &mut Vec<ReplayRecord>| {
        let l: Vec<u16> = state.iter().map(|&x| level(x, &cuts)).collect();
        records.push(ReplayRecord {
            episode: 0,
            step: records.len() as u64,
            state,
            action: policy(&l),
            reward: 0.0,
            done: false,
            truncated: false,
        });
    };
    for i in 0..27 {
        push(vec![centers[i % 3], centers[i / 3 % 3], centers[i / 9]], &mut records);
    }
    for _ in 0..2000 {
        let s = (0..3).map(|_| rng.next_f64()).collect();
        push(s, &mut records);
    }
    let rs = ReplaySet::new(
        FeatureSchema::from_names(&["a", "b", "c"]).unwrap(),
        records,
        vec!["x".into(), "y".into(), "z".into()],
    )
    .unwrap();

    // Majority action per observed full state.
    let states = schema.discretize_all(&rs).unwrap();
    let mut votes: BTreeMap<DiscreteState, [usize; 3]> = BTreeMap::new();
    for (s, a) in states.iter().zip(rs.actions()) {
        votes.entry(s.clone()).or_default()[a] += 1;
    }
    let mut conds: BTreeMap<usize, Vec<Condition>> = BTreeMap::new();
    for (s, v) in &votes {
        let best = (0..3).max_by_key(|&a| (v[a], std::cmp::Reverse(a))).unwrap();
        conds.entry(best).or_default().push(Condition::exact(s));
    }
    let ruleset = extract_rules(&conds, &rs, &schema, WeightKind::W2).unwrap();
    let fid = eval_fidelity(&ruleset, &schema, &rs).unwrap();

    let mut agree = 0;
    let n = 10_000;
    for _ in 0..n {
        let x: Vec<f64> = (0..3).map(|_| rng.next_f64()).collect();
        let l: Vec<u16> = x.iter().map(|&v| level(v, &cuts)).collect();
        // Brute force: scan every rule, keep the best matching one.
        let mut best: Option<(f64, usize, usize)> = None;
        for r in &ruleset.rules {
            let hit = r.condition.assignments.iter().all(|(&f, set)| set.contains(l[f]));
            if hit {
                let better = match best {
                    None => true,
                    Some((o, nca, a)) => (r.o, r.counts.n_ca) > (o, nca) || ((r.o, r.counts.n_ca) == (o, nca) && r.action < a),
                };
                if better {
                    best = Some((r.o, r.counts.n_ca, r.action));
                }
            }
        }
        let (got, _) = ruleset.select_action(&schema, &x).unwrap();
        if got == best.map(|b| b.2) && got == Some(policy(&l)) {
            agree += 1;
        }
    }
    outcome(
        fid.scores.accuracy == 1.0 && agree == n,
        format!(
            "E_acc {} over {} records ({} states); brute-force agreement {agree}/{n}",
            fid.scores.accuracy,
            rs.len(),
            votes.len()
        ),
    )
}

fn criterion_4() -> Outcome {
    let mut rng = Rng::new(4, 0);
    let mut bad = Vec::new();
    for case in 0..200 {
        let nvars = 1 + rng.below(12);
        let mut onset = BTreeSet::new();
        let mut dcset = BTreeSet::new();
        let p_on = rng.uniform(0.05, 0.6);
        let p_dc = rng.uniform(0.0, 0.4);
        for m in 0..1u32 << nvars {
            let u = rng.next_f64();
            if u < p_on {
                onset.insert(m);
            } else if u < p_on + p_dc {
                dcset.insert(m);
            }
        }
        let cover = qm_minimize(&onset, &dcset, nvars).unwrap();
        for m in 0..1u32 << nvars {
            let hit = cover.iter().any(|imp| imp.covers(m));
            let ok = if onset.contains(&m) {
                hit
            } else {
                dcset.contains(&m) || !hit
            };
            if !ok {
                bad.push((case, nvars, m));
                break;
            }
        }
    }

    // APE on a binary replay where some states are never visited.
    let schema = PredicateSchema::from_thresholds(&["p", "q", "r", "s"], vec![vec![0.5]; 4]).unwrap();
    let mut records = Vec::new();
    for i in 0..600u64 {
        let m = rng.below(16) as u32;
        if m.is_multiple_of(5) {
            continue;
        }
        let state: Vec<f64> = (0..4).map(|b| f64::from((m >> (3 - b)) & 1)).collect();
        let action = ((m.count_ones() + (m & 1)) % 3) as usize;
        records.push(ReplayRecord {
            episode: 0,
            step: i,
            state,
            action,
            reward: 0.0,
            done: false,
            truncated: false,
        });
    }
    let rs = ReplaySet::new(
        FeatureSchema::from_names(&["p", "q", "r", "s"]).unwrap(),
        records,
        vec!["a0".into(), "a1".into(), "a2".into()],
    )
    .unwrap();
    let ape = ape_explain_all(&rs, &schema).unwrap();
    let conds: BTreeMap<usize, Vec<Condition>> = ape.iter().map(|(&a, o)| (a, o.conditions().to_vec())).collect();
    let ruleset = extract_rules(&conds, &rs, &schema, WeightKind::W2).unwrap();
    let fid = eval_fidelity(&ruleset, &schema, &rs).unwrap();
    outcome(
        bad.is_empty() && fid.e_approx == 0.0,
        format!(
            "200 random instances (<=12 vars), {} mismatches{}; APE E_approx {} on {} records",
            bad.len(),
            if bad.is_empty() { String::new() } else { format!(" {bad:?}") },
            fid.e_approx,
            rs.len()
        ),
    )
}

fn criterion_5() -> Outcome {
    let names = ["p", "q", "r"];
    let schema = PredicateSchema::from_thresholds(&names, vec![vec![0.5]; 3]).unwrap();
    let mut records = Vec::new();
    for m in 0..8u32 {
        for a in 0..3usize {
            // Every state under every action, with skewed frequencies.
            let reps = 1 + 12 * usize::from(m as usize % 3 == a);
            for _ in 0..reps {
                records.push(ReplayRecord {
                    episode: 0,
                    step: records.len() as u64,
                    state: (0..3).map(|b| f64::from((m >> (2 - b)) & 1)).collect(),
                    action: a,
                    reward: 0.0,
                    done: false,
                    truncated: false,
                });
            }
        }
    }
    let rs = ReplaySet::new(
        FeatureSchema::from_names(&names).unwrap(),
        records,
        vec!["a0".into(), "a1".into(), "a2".into()],
    )
    .unwrap();
    let ape = ape_explain_all(&rs, &schema).unwrap();
    let none = ape.values().filter(|o| **o == ApeOutcome::NoExplanation).count();
    let states = schema.discretize_all(&rs).unwrap();
    let cfg = SummarizerConfig {
        theta: 0.7,
        k_max: 40,
        seed: 0,
    };
    let summaries = summarize_per_action(&states, &rs.actions(), &cfg).unwrap();
    let n_conds: usize = summaries.values().map(|s| s.conditions.len()).sum();
    let specific = summaries.values().flat_map(|s| &s.conditions).filter(|c| !c.is_empty()).count();
    outcome(
        none == 3 && summaries.len() == 3 && summaries.values().all(|s| !s.conditions.is_empty()),
        format!("APE no-explanation for {none}/3 actions; CBS conditions {n_conds} ({specific} non-trivial)"),
    )
}

fn criterion_6(mc: &MountainCar) -> Outcome {
    let t = Instant::now();
    let returns = evaluate_returns(EnvKind::MountainCar, |s| Ok(mc.policy.act(s)), EVAL_SEEDS).unwrap();
    let mean = returns.iter().sum::<f64>() / returns.len() as f64;
    let cfg = PipelineConfig {
        n_cat: 5,
        ..PipelineConfig::default()
    };
    let out = run_pipeline(&mc.replay, &cfg, Some(EnvKind::MountainCar)).unwrap();
    let perf = out.report.performance.unwrap();
    let secs = mc.train_secs + t.elapsed().as_secs_f64();
    outcome(
        mean >= -160.0 && perf.successes >= 1 && secs < 600.0,
        format!(
            "agent mean return {mean:.1}; rules (gini, w2, theta=0.7, ncat=5) reach the goal in {}/10, mean return {:.1}; {secs:.1}s",
            perf.successes, perf.e_cr
        ),
    )
}

fn toy() -> (ReplaySet, PredicateSchema) {
    let records = (0..10)
        .map(|x| ReplayRecord {
            episode: 0,
            step: x,
            state: vec![x as f64],
            action: usize::from(x >= 5),
            reward: 0.0,
            done: false,
            truncated: false,
        })
        .collect();
    let rs = ReplaySet::new(FeatureSchema::from_names(&["x"]).unwrap(), records, vec!["lo".into(), "hi".into()]).unwrap();
    let schema = PredicateSchema::from_thresholds(&["x"], vec![vec![7.5]]).unwrap();
    (rs, schema)
}

fn criterion_7(mc: &MountainCar) -> Outcome {
    let mut rng = Rng::new(7, 0);
    let n_cat = 4;
    let names = mc.replay.schema().names();
    let bounds: Vec<(f64, f64)> = (0..names.len())
        .map(|f| {
            mc.replay
                .states()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), s| (lo.min(s[f]), hi.max(s[f])))
        })
        .collect();
    let pcfg = PipelineConfig {
        n_cat,
        ..PipelineConfig::default()
    };
    let mut violations = Vec::new();
    let mut dup_gain = 0;
    let mut f1_gain = 0.0;
    for i in 0..20 {
        let thresholds = bounds
            .iter()
            .map(|&(lo, hi)| {
                let mut t: Vec<f64> = (1..n_cat).map(|_| rng.uniform(lo, hi)).collect();
                t.sort_by(f64::total_cmp);
                t
            })
            .collect();
        let schema = PredicateSchema::from_thresholds(&names, thresholds).unwrap();
        let md = minimize_duplicates(&mc.replay, &schema, &pcfg, &RefineConfig::min_dup()).unwrap();
        let mf = maximize_f1(&mc.replay, &schema, &pcfg, &RefineConfig::max_f1()).unwrap();
        if md.best.e_dup > md.initial.e_dup {
            violations.push(format!("schema {i}: E_dup {} -> {}", md.initial.e_dup, md.best.e_dup));
        }
        if mf.best.e_f1 < mf.initial.e_f1 {
            violations.push(format!("schema {i}: F1 {} -> {}", mf.initial.e_f1, mf.best.e_f1));
        }
        dup_gain += md.initial.e_dup - md.best.e_dup.min(md.initial.e_dup);
        f1_gain += mf.best.e_f1 - mf.initial.e_f1;
    }

    let (rs, schema) = toy();
    let cfg = PipelineConfig {
        n_cat: 2,
        theta: 1.0,
        ..PipelineConfig::default()
    };
    let md = minimize_duplicates(&rs, &schema, &cfg, &RefineConfig::min_dup()).unwrap();
    let start = PredicateSchema::from_thresholds(&["x"], vec![vec![6.5]]).unwrap();
    let mfc = RefineConfig::max_f1();
    let mf = maximize_f1(&rs, &start, &cfg, &mfc).unwrap();
    let toy_ok = md.initial.e_dup > 0 && md.best.e_dup == 0 && mf.best.e_f1 > mf.initial.e_f1 && mf.iterations <= mfc.budget;
    outcome(
        violations.is_empty() && toy_ok,
        format!(
            "20 random schemas: {} violations, total E_dup reduction {dup_gain}, total F1 gain {f1_gain:.3}; toy min-dup E_dup {} -> {}, max-F1 {:.3} -> {:.3} in {} iterations{}",
            violations.len(),
            md.initial.e_dup,
            md.best.e_dup,
            mf.initial.e_f1,
            mf.best.e_f1,
            mf.iterations,
            if violations.is_empty() { String::new() } else { format!(" {violations:?}") }
        ),
    )
}

fn criterion_8(mc: &MountainCar) -> Outcome {
    let f1 = |n_cat: usize, theta: f64, source: LimitSource| {
        let cfg = PipelineConfig {
            n_cat,
            theta,
            source,
            ..PipelineConfig::default()
        };
        run_pipeline(&mc.replay, &cfg, None).unwrap().report.e_f1
    };
    // Gated on the MountainCar defaults; n_cat = 6 is reported alongside.
    let t07 = f1(5, 0.7, LimitSource::Gini);
    let t10 = f1(5, 1.0, LimitSource::Gini);
    let gini = t07;
    let median = f1(5, 0.7, LimitSource::Median);
    let t07_6 = f1(6, 0.7, LimitSource::Gini);
    let t10_6 = f1(6, 1.0, LimitSource::Gini);
    let median_6 = f1(6, 0.7, LimitSource::Median);
    outcome(
        t07 >= t10 && gini >= median,
        format!(
            "ncat=5: F1 theta=0.7 {t07:.3} vs theta=1.0 {t10:.3}, gini {gini:.3} vs median {median:.3} | ncat=6 (not gated): theta=0.7 {t07_6:.3} vs theta=1.0 {t10_6:.3}, gini {t07_6:.3} vs median {median_6:.3}"
        ),
    )
}

fn criterion_9() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let mut payloads = Vec::new();
    for run in 0..2 {
        let mc = mountaincar();
        let cfg = PipelineConfig {
            n_cat: 5,
            ..PipelineConfig::default()
        };
        let out = run_pipeline(&mc.replay, &cfg, Some(EnvKind::MountainCar)).unwrap();
        let rules = dir.path().join(format!("rules{run}.json"));
        let report = dir.path().join(format!("eval_report{run}.json"));
        out.rules.save(&rules).unwrap();
        std::fs::write(&report, out.report.to_json().unwrap()).unwrap();
        payloads.push((std::fs::read(&rules).unwrap(), std::fs::read(&report).unwrap()));
    }
    let same_rules = payloads[0].0 == payloads[1].0;
    let same_report = payloads[0].1 == payloads[1].1;
    outcome(
        same_rules && same_report,
        format!(
            "rules.json identical: {same_rules} ({} bytes), eval_report.json identical: {same_report} ({} bytes)",
            payloads[0].0.len(),
            payloads[0].1.len()
        ),
    )
}

fn random_query(rng: &mut Rng, mc: &MountainCar, preds: &PredicateSchema) -> String {
    let names = mc.replay.schema().names();
    let actions = mc.replay.action_names();
    let n = 1 + rng.below(3);
    let clauses: Vec<String> = (0..n)
        .map(|_| {
            let f = rng.below(names.len());
            if rng.below(4) == 0 {
                let labels = &preds.features()[f].labels;
                format!("{} is {}", names[f], labels[rng.below(labels.len())])
            } else {
                let op = ["<", "<=", ">", ">=", "="][rng.below(5)];
                let r = &mc.replay.records()[rng.below(mc.replay.len())];
                let v = if op == "=" || rng.below(2) == 0 {
                    r.state[f]
                } else {
                    r.state[f] * rng.uniform(0.5, 1.5)
                };
                format!("{} {op} {v}", names[f])
            }
        })
        .collect();
    match rng.below(3) {
        0 => format!("what if {}", clauses.join(" and ")),
        1 => format!("when action = {} and {}", actions[rng.below(actions.len())], clauses.join(" and ")),
        _ => format!("when will you do {}?", actions[rng.below(actions.len())]),
    }
}

/// Direct evaluation of the question text against a record.
fn oracle(question: &str, r: &ReplayRecord, mc: &MountainCar, preds: &PredicateSchema) -> bool {
    let names = mc.replay.schema().names();
    let action_of = |name: &str| mc.replay.action_names().iter().position(|a| a == name).unwrap();
    let q = question.trim_end_matches('?');
    let (action, clauses) = if let Some(rest) = q.strip_prefix("when will you do ") {
        (Some(action_of(rest)), "")
    } else if let Some(rest) = q.strip_prefix("when action = ") {
        let (a, c) = rest.split_once(" and ").unwrap();
        (Some(action_of(a)), c)
    } else {
        (None, q.strip_prefix("what if ").unwrap())
    };
    if action.is_some_and(|a| a != r.action) {
        return false;
    }
    clauses.split(" and ").filter(|c| !c.is_empty()).all(|c| {
        let mut it = c.splitn(3, ' ');
        let (name, op, value) = (it.next().unwrap(), it.next().unwrap(), it.next().unwrap());
        let f = names.iter().position(|n| *n == name).unwrap();
        let x = r.state[f];
        if op == "is" {
            let want = preds.features()[f].labels.iter().position(|l| l == value).unwrap();
            return level(x, preds.thresholds(f)) as usize == want;
        }
        let v: f64 = value.parse().unwrap();
        match op {
            "<" => x < v,
            "<=" => x <= v,
            ">" => x > v,
            ">=" => x >= v,
            _ => x == v,
        }
    })
}

fn sqlite_rows(conn: &Connection, sql: &str) -> Vec<(u64, u64)> {
    let mut stmt = conn.prepare(sql).unwrap();
    let cols: Vec<String> = stmt.column_names().iter().map(|s| s.to_string()).collect();
    let ep = cols.iter().position(|c| c == "episode").unwrap();
    let st = cols.iter().position(|c| c == "step").unwrap();
    let mut rows: Vec<(u64, u64)> = stmt
        .query_map([], |row| Ok((row.get::<_, i64>(ep)? as u64, row.get::<_, i64>(st)? as u64)))
        .unwrap()
        .map(|r| r.unwrap())
        .collect();
    rows.sort_unstable();
    rows
}

fn fuzz_statement(rng: &mut Rng) -> String {
    const WRITES: [&str; 14] = [
        "INSERT INTO replay VALUES (1, 2, 3)",
        "UPDATE replay SET action = 0",
        "DELETE FROM replay",
        "DROP TABLE replay",
        "CREATE TABLE t (x)",
        "ALTER TABLE replay ADD COLUMN z",
        "ATTACH DATABASE 'x.db' AS x",
        "DETACH DATABASE x",
        "PRAGMA writable_schema = 1",
        "REPLACE INTO replay VALUES (1)",
        "VACUUM",
        "REINDEX replay",
        "BEGIN TRANSACTION",
        "WITH t AS (SELECT 1) DELETE FROM replay",
    ];
    const NOISE: [&str; 12] = ["replay", "*", "WHERE", "1", "=", "action", "OR", "(", ")", "'x'", "--", "/*"];
    let write = WRITES[rng.below(WRITES.len())];
    let mut tail = String::new();
    for _ in 0..rng.below(4) {
        tail.push(' ');
        tail.push_str(NOISE[rng.below(NOISE.len())]);
    }
    let cased = |s: &str, rng: &mut Rng| -> String {
        s.chars()
            .map(|c| if rng.below(2) == 0 { c.to_ascii_lowercase() } else { c })
            .collect()
    };
    match rng.below(6) {
        0 => cased(&format!("{write}{tail}"), rng),
        1 => format!("SELECT * FROM replay; {write}"),
        2 => format!("SELECT * FROM replay WHERE action = 1;{write}{tail}"),
        3 => format!("  \n\t{write};"),
        4 => format!("SELECT * FROM replay WHERE action IN ({write})"),
        _ => format!("/* q */ {write} -- SELECT * FROM replay"),
    }
}

fn criterion_10(mc: &MountainCar) -> Outcome {
    let preds = PredicateSchema::from_thresholds(&mc.replay.schema().names(), vec![vec![-0.9, -0.5, 0.0], vec![-0.02, 0.0, 0.02]]).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let db = dir.path().join("replay.db");
    mc.replay.write(&db, Format::Db).unwrap();
    let conn = Connection::open(&db).unwrap();
    let ctx = QueryContext {
        features: mc.replay.schema(),
        actions: mc.replay.action_names(),
        predicates: Some(&preds),
    };
    let mut rng = Rng::new(10, 0);
    let mut mismatches = Vec::new();
    let mut nonempty = 0;
    for _ in 0..1000 {
        let q = random_query(&mut rng, mc, &preds);
        let ast = match parse_query(&q, ctx) {
            Ok(ast) => ast,
            Err(e) => {
                mismatches.push(format!("{q}: {e}"));
                continue;
            }
        };
        let sql = to_sql(&ast, mc.replay.schema());
        let expected: Vec<(u64, u64)> = mc
            .replay
            .records()
            .iter()
            .filter(|r| oracle(&q, r, mc, &preds))
            .map(|r| (r.episode, r.step))
            .collect();
        let validated = match validate_sql(&sql, mc.replay.schema()) {
            Ok(v) => v,
            Err(e) => {
                mismatches.push(format!("{sql}: {e}"));
                continue;
            }
        };
        let in_memory: Vec<(u64, u64)> = mc.replay.filter(&validated).records().iter().map(|r| (r.episode, r.step)).collect();
        let in_db = sqlite_rows(&conn, &sql);
        if in_memory != expected || in_db != expected {
            mismatches.push(q);
        }
        nonempty += usize::from(!expected.is_empty());
    }
    let n_fuzz = 10_000;
    let accepted: Vec<String> = (0..n_fuzz)
        .map(|_| fuzz_statement(&mut rng))
        .filter(|s| validate_sql(s, mc.replay.schema()).is_ok())
        .collect();
    outcome(
        mismatches.is_empty() && accepted.is_empty(),
        format!(
            "1000 queries: {} mismatches ({nonempty} non-empty results) against SQLite and in-memory filtering; fuzz rejected {}/{n_fuzz}{}{}",
            mismatches.len(),
            n_fuzz - accepted.len(),
            if mismatches.is_empty() { String::new() } else { format!(" first mismatch {:?}", mismatches[0]) },
            if accepted.is_empty() { String::new() } else { format!(" first accepted {:?}", accepted[0]) },
        ),
    )
}

fn main() -> ExitCode {
    let mc = mountaincar();
    type Check<'a> = (&'static str, Box<dyn Fn() -> Outcome + 'a>);
    let checks: [Check<'_>; 10] = [
        ("coverage at theta=1.0", Box::new(|| criterion_1(&mc))),
        ("weight identities", Box::new(|| criterion_2(&mc))),
        ("rule-engine fidelity oracle", Box::new(criterion_3)),
        ("Quine-McCluskey soundness", Box::new(criterion_4)),
        ("APE failure mode", Box::new(criterion_5)),
        ("end-to-end MountainCar", Box::new(|| criterion_6(&mc))),
        ("refinement monotonicity", Box::new(|| criterion_7(&mc))),
        ("directional sweeps", Box::new(|| criterion_8(&mc))),
        ("determinism", Box::new(criterion_9)),
        ("query safety and equivalence", Box::new(|| criterion_10(&mc))),
    ];
    let mut failed = 0;
    for (i, (name, check)) in checks.iter().enumerate() {
        let o = check();
        failed += usize::from(!o.pass);
        println!("criterion {:>2} {} {name}: {}", i + 1, if o.pass { "PASS" } else { "FAIL" }, o.detail);
    }
    println!("acceptance: {}/10 passed", 10 - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
