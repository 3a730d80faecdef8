//! Explanation properties, fidelity against the replayed policy and
//! in-environment performance of a rule set.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::condition::Condition;
use crate::envs::{run_episode, EnvKind};
use crate::error::{Error, Result};
use crate::predicates::{DiscreteState, PredicateSchema};
use crate::replay::ReplaySet;
use crate::rules::RuleSet;

/// `(E_len, E_dup)`. E_len sums the distinct conditions of each action;
/// E_dup counts distinct conditions listed under two or more actions.
pub fn eval_properties(conds_per_action: &BTreeMap<usize, Vec<Condition>>) -> (usize, usize) {
    let mut owners: HashMap<&Condition, BTreeSet<usize>> = HashMap::new();
    let mut len = 0;
    for (&a, conds) in conds_per_action {
        let distinct: BTreeSet<&Condition> = conds.iter().collect();
        len += distinct.len();
        for c in distinct {
            owners.entry(c).or_default().insert(a);
        }
    }
    let dup = owners.values().filter(|s| s.len() >= 2).count();
    (len, dup)
}

/// Conditions listed under two or more actions, in condition order.
pub fn duplicated_conditions(conds_per_action: &BTreeMap<usize, Vec<Condition>>) -> Vec<Condition> {
    let mut owners: BTreeMap<&Condition, BTreeSet<usize>> = BTreeMap::new();
    for (&a, conds) in conds_per_action {
        for c in conds {
            owners.entry(c).or_default().insert(a);
        }
    }
    owners
        .into_iter()
        .filter(|(_, s)| s.len() >= 2)
        .map(|(c, _)| c.clone())
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Classification {
    pub accuracy: f64,
    pub macro_recall: f64,
    pub macro_f1: f64,
    /// `confusion[true][predicted]`.
    pub confusion: Vec<Vec<usize>>,
}

/// Accuracy and macro-averaged recall/F1. The macro average runs over the
/// union of true and predicted labels; a label with no support scores 0.
pub fn classification_scores(truth: &[usize], pred: &[usize], n_labels: usize) -> Result<Classification> {
    if truth.len() != pred.len() {
        return Err(Error::InvalidArgument("truth and prediction lengths differ".into()));
    }
    if truth.is_empty() {
        return Err(Error::EmptyData("no records to score".into()));
    }
    let mut confusion = vec![vec![0usize; n_labels]; n_labels];
    for (&t, &p) in truth.iter().zip(pred) {
        if t >= n_labels || p >= n_labels {
            return Err(Error::InvalidAction {
                action: t.max(p),
                n_actions: n_labels,
            });
        }
        confusion[t][p] += 1;
    }
    let correct: usize = (0..n_labels).map(|i| confusion[i][i]).sum();
    let labels: BTreeSet<usize> = truth.iter().chain(pred).copied().collect();
    let (mut rec_sum, mut f1_sum) = (0.0, 0.0);
    for &l in &labels {
        let tp = confusion[l][l] as f64;
        let actual: f64 = confusion[l].iter().sum::<usize>() as f64;
        let predicted: f64 = confusion.iter().map(|row| row[l]).sum::<usize>() as f64;
        let recall = if actual > 0.0 { tp / actual } else { 0.0 };
        let precision = if predicted > 0.0 { tp / predicted } else { 0.0 };
        rec_sum += recall;
        if precision + recall > 0.0 {
            f1_sum += 2.0 * precision * recall / (precision + recall);
        }
    }
    let n = labels.len() as f64;
    Ok(Classification {
        accuracy: correct as f64 / truth.len() as f64,
        macro_recall: rec_sum / n,
        macro_f1: f1_sum / n,
        confusion,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Fidelity {
    pub e_approx: f64,
    #[serde(flatten)]
    pub scores: Classification,
    #[serde(skip)]
    pub predictions: Vec<usize>,
}

/// Fidelity over already-discretized records.
pub fn fidelity_from_states(ruleset: &RuleSet, states: &[DiscreteState], actions: &[usize], n_actions: usize) -> Result<Fidelity> {
    if ruleset.is_empty() {
        return Err(Error::EmptyData("rule set has no rules".into()));
    }
    if states.is_empty() {
        return Err(Error::EmptyData("no records to evaluate".into()));
    }
    let out: Vec<(bool, usize)> = states
        .par_iter()
        .map(|s| match ruleset.select_matched(s) {
            Some((a, _)) => (true, a),
            None => (false, ruleset.approximate(s).expect("rule set is non-empty").0),
        })
        .collect();
    let unmatched = out.iter().filter(|(m, _)| !m).count();
    let predictions: Vec<usize> = out.into_iter().map(|(_, a)| a).collect();
    let n_labels = n_actions.max(predictions.iter().max().map_or(0, |m| m + 1));
    Ok(Fidelity {
        e_approx: unmatched as f64 / states.len() as f64,
        scores: classification_scores(actions, &predictions, n_labels)?,
        predictions,
    })
}

/// E_approx plus accuracy/recall/F1 of the rules (with approximation) against
/// the replayed actions.
pub fn eval_fidelity(ruleset: &RuleSet, schema: &PredicateSchema, rs: &ReplaySet) -> Result<Fidelity> {
    if rs.is_empty() {
        return Err(Error::EmptyData("no records to evaluate".into()));
    }
    let states = schema.discretize_all(rs)?;
    fidelity_from_states(ruleset, &states, &rs.actions(), rs.n_actions())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EpisodeStats {
    pub seed: u64,
    pub e_cr: f64,
    pub e_ts: usize,
    pub e_ar: f64,
    pub success: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Performance {
    pub episodes: Vec<EpisodeStats>,
    pub e_cr: f64,
    pub e_ts: f64,
    pub e_ar: f64,
    pub successes: usize,
}

/// Runs one episode per seed (in parallel, reported in seed order).
pub fn eval_performance(kind: EnvKind, policy: impl Fn(&[f64]) -> Result<usize> + Sync, seeds: &[u64]) -> Result<Performance> {
    if seeds.is_empty() {
        return Err(Error::InvalidArgument("at least one evaluation seed is required".into()));
    }
    let episodes: Vec<EpisodeStats> = seeds
        .par_iter()
        .map(|&seed| {
            let t = run_episode(kind, &policy, seed)?;
            let e_cr = t.total_reward();
            let e_ts = t.len();
            Ok(EpisodeStats {
                seed,
                e_cr,
                e_ts,
                e_ar: e_cr / e_ts as f64,
                success: kind.succeeded(&t),
            })
        })
        .collect::<Result<_>>()?;
    let n = episodes.len() as f64;
    Ok(Performance {
        e_cr: episodes.iter().map(|e| e.e_cr).sum::<f64>() / n,
        e_ts: episodes.iter().map(|e| e.e_ts as f64).sum::<f64>() / n,
        e_ar: episodes.iter().map(|e| e.e_ar).sum::<f64>() / n,
        successes: episodes.iter().filter(|e| e.success).count(),
        episodes,
    })
}

/// Rule set deployed as a policy, with approximation for uncovered states.
pub fn rule_policy<'a>(ruleset: &'a RuleSet, schema: &'a PredicateSchema) -> impl Fn(&[f64]) -> Result<usize> + Sync + 'a {
    move |s| {
        let d = schema.discretize(s)?;
        Ok(match ruleset.select_matched(&d) {
            Some((a, _)) => a,
            None => ruleset
                .approximate(&d)
                .ok_or_else(|| Error::EmptyData("rule set has no rules".into()))?
                .0,
        })
    }
}

/// `x / env_max × 100`, where `env_max` is the largest absolute value
/// observed in the environment.
pub fn normalize_scores(values: &[f64], env_max: f64) -> Result<Vec<f64>> {
    if env_max == 0.0 || !env_max.is_finite() {
        return Err(Error::InvalidArgument("normalization maximum must be finite and non-zero".into()));
    }
    Ok(values.iter().map(|x| x / env_max.abs() * 100.0).collect())
}

/// Largest absolute value, for [`normalize_scores`].
pub fn max_abs(values: &[f64]) -> f64 {
    values.iter().fold(0.0, |m, v| m.max(v.abs()))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    pub fingerprint: String,
    pub e_approx: f64,
    pub e_len: usize,
    pub e_dup: usize,
    pub e_acc: f64,
    pub e_rec: f64,
    pub e_f1: f64,
    pub confusion: Vec<Vec<usize>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub performance: Option<Performance>,
}

/// Hex SHA-256 of a configuration's JSON form.
pub fn fingerprint(config: &impl Serialize) -> Result<String> {
    let bytes = serde_json::to_vec(config)?;
    let digest = Sha256::digest(&bytes);
    Ok(digest.iter().fold(String::with_capacity(64), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    }))
}

impl EvalReport {
    pub fn new(
        fingerprint: String,
        conds_per_action: &BTreeMap<usize, Vec<Condition>>,
        fidelity: &Fidelity,
        performance: Option<Performance>,
    ) -> Self {
        let (e_len, e_dup) = eval_properties(conds_per_action);
        EvalReport {
            fingerprint,
            e_approx: fidelity.e_approx,
            e_len,
            e_dup,
            e_acc: fidelity.scores.accuracy,
            e_rec: fidelity.scores.macro_recall,
            e_f1: fidelity.scores.macro_f1,
            confusion: fidelity.scores.confusion.clone(),
            performance,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }
}

pub const TABLE_COLUMNS: [&str; 9] = ["E_app", "E_len", "E_dup", "E_acc", "E_rec", "E_F1", "E_CR", "E_TS", "E_AR"];

/// Fixed-width table, one row per labelled report.
pub fn format_table(rows: &[(String, &EvalReport)]) -> String {
    let label_w = rows.iter().map(|(l, _)| l.len()).max().unwrap_or(0).max(6);
    let mut out = format!("{:<label_w$}", "config");
    for c in TABLE_COLUMNS {
        let _ = write!(out, " {c:>9}");
    }
    out.push('\n');
    for (label, r) in rows {
        let _ = write!(
            out,
            "{label:<label_w$} {:>9.3} {:>9} {:>9} {:>9.3} {:>9.3} {:>9.3}",
            r.e_approx, r.e_len, r.e_dup, r.e_acc, r.e_rec, r.e_f1
        );
        match &r.performance {
            Some(p) => {
                let _ = write!(out, " {:>9.1} {:>9.1} {:>9.3}", p.e_cr, p.e_ts, p.e_ar);
            }
            None => {
                let _ = write!(out, " {:>9} {:>9} {:>9}", "-", "-", "-");
            }
        }
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rules::{Counts, Fallback, Rule, WeightKind};

    fn c(pairs: &[(usize, u16)]) -> Condition {
        Condition::from_pairs(pairs.iter().copied())
    }

    #[test]
    fn properties_examples() {
        let (c1, c2) = (c(&[(0, 0)]), c(&[(0, 1)]));
        let m = BTreeMap::from([(0, vec![c1.clone(), c2.clone()]), (1, vec![c2.clone()])]);
        assert_eq!(eval_properties(&m), (3, 1));
        let m = BTreeMap::from([(0, vec![c1.clone()]), (1, vec![c2.clone()])]);
        assert_eq!(eval_properties(&m).1, 0);
        let both = vec![c1, c2];
        let m = BTreeMap::from([(0, both.clone()), (1, both.clone()), (2, both)]);
        assert_eq!(eval_properties(&m), (6, 2));
        assert_eq!(duplicated_conditions(&m).len(), 2);
    }

    #[test]
    fn hand_confusion_matrix() {
        // One systematic error: the last record of class 1 predicted as 0.
        let truth = [0, 0, 0, 1, 1, 1];
        let pred = [0, 0, 0, 1, 1, 0];
        let s = classification_scores(&truth, &pred, 2).unwrap();
        assert_eq!(s.accuracy, 5.0 / 6.0);
        // class 0: P=3/4 R=1 F1=6/7; class 1: P=1 R=2/3 F1=4/5
        assert!((s.macro_recall - (1.0 + 2.0 / 3.0) / 2.0).abs() < 1e-15);
        assert!((s.macro_f1 - (6.0 / 7.0 + 0.8) / 2.0).abs() < 1e-15);
        assert_eq!(s.confusion, vec![vec![3, 0], vec![1, 2]]);
    }

    #[test]
    fn f1_is_one_only_when_diagonal() {
        let s = classification_scores(&[0, 1, 2, 1], &[0, 1, 2, 1], 3).unwrap();
        assert_eq!((s.accuracy, s.macro_recall, s.macro_f1), (1.0, 1.0, 1.0));
        let s = classification_scores(&[0, 1, 2, 1], &[0, 1, 2, 2], 3).unwrap();
        assert!(s.macro_f1 < 1.0 && s.macro_f1 >= 0.0);
    }

    fn exact_rules(pairs: &[(u16, usize)]) -> RuleSet {
        RuleSet {
            weight_kind: WeightKind::W2,
            n_cat: 2,
            fallback: Fallback::Approximate,
            rules: pairs
                .iter()
                .map(|&(l, a)| Rule {
                    action: a,
                    condition: c(&[(0, l)]),
                    o: 1.0,
                    counts: Counts {
                        n_ca: 1,
                        n_c: 1,
                        n_a: 1,
                        n_total: 1,
                    },
                })
                .collect(),
        }
    }

    #[test]
    fn perfect_fidelity_and_counting() {
        let rules = exact_rules(&[(0, 0), (1, 1)]);
        let states: Vec<DiscreteState> = (0..10).map(|i| DiscreteState(vec![(i % 2) as u16])).collect();
        let actions: Vec<usize> = (0..10).map(|i| i % 2).collect();
        let f = fidelity_from_states(&rules, &states, &actions, 2).unwrap();
        assert_eq!((f.e_approx, f.scores.accuracy, f.scores.macro_recall, f.scores.macro_f1), (0.0, 1.0, 1.0, 1.0));
        assert_eq!(f.predictions.len(), 10);

        let rules = exact_rules(&[(0, 0)]);
        let states: Vec<DiscreteState> = (0..10).map(|i| DiscreteState(vec![u16::from(i >= 8)])).collect();
        let f = fidelity_from_states(&rules, &states, &[0; 10], 1).unwrap();
        assert_eq!(f.e_approx, 0.2);
        assert!(fidelity_from_states(&exact_rules(&[]), &states, &[0; 10], 1).is_err());
    }

    #[test]
    fn normalization() {
        assert_eq!(normalize_scores(&[-120.0, 200.0], 200.0).unwrap(), vec![-60.0, 100.0]);
        assert_eq!(max_abs(&[-200.0, 150.0]), 200.0);
        assert!(normalize_scores(&[0.0, 0.0], max_abs(&[0.0, 0.0])).is_err());
    }

    #[test]
    fn performance_per_episode_identity() {
        let p = eval_performance(EnvKind::MountainCar, |_| Ok(1), &[0, 1, 2]).unwrap();
        for e in &p.episodes {
            assert_eq!((e.e_cr, e.e_ts, e.success), (-200.0, 200, false));
            assert!((e.e_ar * e.e_ts as f64 - e.e_cr).abs() < 1e-9);
        }
        assert_eq!(p, eval_performance(EnvKind::MountainCar, |_| Ok(1), &[0, 1, 2]).unwrap());
        assert_eq!(-100.0 / 200.0, -0.5);
    }

    #[test]
    fn fingerprint_is_stable_hex() {
        let a = fingerprint(&("x", 1)).unwrap();
        assert_eq!(a.len(), 64);
        assert_eq!(a, fingerprint(&("x", 1)).unwrap());
        assert_ne!(a, fingerprint(&("x", 2)).unwrap());
    }
}
