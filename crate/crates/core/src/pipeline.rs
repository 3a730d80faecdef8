//! Query-free end-to-end run: per-action summaries, rules, evaluation.

use std::collections::BTreeMap;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::condition::Condition;
use crate::envs::EnvKind;
use crate::error::{Error, Result};
use crate::eval::{eval_performance, eval_properties, fidelity_from_states, fingerprint, rule_policy, EvalReport, Fidelity};
use crate::kmeans::DEFAULT_K_MAX;
use crate::predicates::{make_gini_limits, make_quantile_limits, DiscreteState, PredicateSchema};
use crate::replay::ReplaySet;
use crate::rules::{extract_rules_from_states, Fallback, RuleSet, WeightKind};
use crate::summarizer::{summarize_states, Summary, SummarizerConfig};

/// Seeds of the ten evaluation episodes.
pub const EVAL_SEEDS: [u64; 10] = [0, 1, 2, 3, 4, 5, 6, 7, 8, 9];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LimitSource {
    Gini,
    Median,
}

impl FromStr for LimitSource {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "gini" => Ok(LimitSource::Gini),
            "median" | "quantile" => Ok(LimitSource::Median),
            _ => Err(Error::InvalidArgument(format!("unknown predicate source '{s}' (expected gini or median)"))),
        }
    }
}

impl std::fmt::Display for LimitSource {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            LimitSource::Gini => "gini",
            LimitSource::Median => "median",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub n_cat: usize,
    pub theta: f64,
    pub k_max: usize,
    pub seed: u64,
    pub weights: WeightKind,
    pub source: LimitSource,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            n_cat: 6,
            theta: 0.7,
            k_max: DEFAULT_K_MAX,
            seed: 0,
            weights: WeightKind::W2,
            source: LimitSource::Gini,
        }
    }
}

impl PipelineConfig {
    pub fn summarizer(&self) -> SummarizerConfig {
        SummarizerConfig {
            theta: self.theta,
            k_max: self.k_max,
            seed: self.seed,
        }
    }
}

/// Predicate thresholds generated from the replay.
pub fn build_schema(rs: &ReplaySet, cfg: &PipelineConfig) -> Result<PredicateSchema> {
    match cfg.source {
        LimitSource::Gini => make_gini_limits(rs, cfg.n_cat),
        LimitSource::Median => make_quantile_limits(rs, cfg.n_cat),
    }
}

/// Summaries for every action that occurs in the data, keyed by action.
pub fn summarize_per_action(states: &[DiscreteState], actions: &[usize], cfg: &SummarizerConfig) -> Result<BTreeMap<usize, Summary>> {
    let mut by_action: BTreeMap<usize, Vec<DiscreteState>> = BTreeMap::new();
    for (s, &a) in states.iter().zip(actions) {
        by_action.entry(a).or_default().push(s.clone());
    }
    let groups: Vec<(usize, Vec<DiscreteState>)> = by_action.into_iter().collect();
    groups
        .into_par_iter()
        .map(|(a, st)| summarize_states(&st, cfg).map(|s| (a, s)))
        .collect()
}

pub fn conditions_of(summaries: &BTreeMap<usize, Summary>) -> BTreeMap<usize, Vec<Condition>> {
    summaries.iter().map(|(&a, s)| (a, s.conditions.clone())).collect()
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub schema: PredicateSchema,
    pub summaries: BTreeMap<usize, Summary>,
    pub conditions: BTreeMap<usize, Vec<Condition>>,
    pub rules: RuleSet,
    pub fidelity: Fidelity,
    pub report: EvalReport,
}

#[derive(Serialize)]
struct Fingerprinted<'a> {
    config: &'a PipelineConfig,
    schema: &'a PredicateSchema,
    records: usize,
    env: Option<EnvKind>,
}

/// Summarize each action, extract rules over the whole replay and evaluate
/// them; with `env`, also deploy the rules for the ten evaluation seeds.
pub fn run_with_schema(rs: &ReplaySet, schema: PredicateSchema, cfg: &PipelineConfig, env: Option<EnvKind>) -> Result<RunOutput> {
    if rs.is_empty() {
        return Err(Error::EmptyData("replay has no records".into()));
    }
    schema.check_against(rs.schema())?;
    let states = schema.discretize_all(rs)?;
    let actions = rs.actions();
    let summaries = summarize_per_action(&states, &actions, &cfg.summarizer())?;
    let conditions = conditions_of(&summaries);
    let rules = extract_rules_from_states(&conditions, &states, &actions, schema.n_cat(), cfg.weights)?.with_fallback(Fallback::Approximate);
    if rules.is_empty() {
        return Err(Error::EmptyData("no conditions were generated for any action".into()));
    }
    let fidelity = fidelity_from_states(&rules, &states, &actions, rs.n_actions())?;
    let performance = match env {
        Some(kind) => Some(eval_performance(kind, rule_policy(&rules, &schema), &EVAL_SEEDS)?),
        None => None,
    };
    let fp = fingerprint(&Fingerprinted {
        config: cfg,
        schema: &schema,
        records: rs.len(),
        env,
    })?;
    let report = EvalReport::new(fp, &conditions, &fidelity, performance);
    Ok(RunOutput {
        schema,
        summaries,
        conditions,
        rules,
        fidelity,
        report,
    })
}

pub fn run_pipeline(rs: &ReplaySet, cfg: &PipelineConfig, env: Option<EnvKind>) -> Result<RunOutput> {
    let schema = build_schema(rs, cfg)?;
    run_with_schema(rs, schema, cfg, env)
}

/// The numbers the refinement loops compare.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Score {
    pub e_dup: usize,
    pub e_f1: f64,
    pub e_len: usize,
    pub e_approx: f64,
}

/// Fidelity-only re-run for a candidate schema. A schema that yields no
/// conditions at all scores F1 = 0.
pub fn score_schema(rs: &ReplaySet, schema: &PredicateSchema, cfg: &PipelineConfig) -> Result<(Score, BTreeMap<usize, Vec<Condition>>)> {
    let states = schema.discretize_all(rs)?;
    let actions = rs.actions();
    let conditions = conditions_of(&summarize_per_action(&states, &actions, &cfg.summarizer())?);
    let (e_len, e_dup) = eval_properties(&conditions);
    let rules = extract_rules_from_states(&conditions, &states, &actions, schema.n_cat(), cfg.weights)?;
    if rules.is_empty() {
        return Ok((
            Score {
                e_dup,
                e_f1: 0.0,
                e_len,
                e_approx: 1.0,
            },
            conditions,
        ));
    }
    let f = fidelity_from_states(&rules, &states, &actions, rs.n_actions())?;
    Ok((
        Score {
            e_dup,
            e_f1: f.scores.macro_f1,
            e_len,
            e_approx: f.e_approx,
        },
        conditions,
    ))
}
