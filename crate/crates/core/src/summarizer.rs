//! Clustering-based summarizer: cluster discretized states, keep each
//! cluster's frequent instances, and emit the predicates on which those
//! instances agree.
//!
//! Every cluster contributes a condition. A cluster whose included
//! instances agree on no predicate contributes the empty condition, which
//! matches any state; this keeps each member covered by its own cluster's
//! condition at full inclusion.

use std::collections::{BTreeMap, HashSet};

use serde::Serialize;

use crate::condition::{Condition, LevelSet};
use crate::error::{Error, Result};
use crate::kmeans::{elbow_weighted, WeightedPoints, DEFAULT_K_MAX};
use crate::predicates::{DiscreteState, PredicateSchema};
use crate::replay::ReplaySet;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SummarizerConfig {
    /// Inclusion threshold in (0, 1].
    pub theta: f64,
    pub k_max: usize,
    pub seed: u64,
}

impl Default for SummarizerConfig {
    fn default() -> Self {
        Self {
            theta: 0.7,
            k_max: DEFAULT_K_MAX,
            seed: 0,
        }
    }
}

impl SummarizerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.theta > 0.0 && self.theta <= 1.0) {
            return Err(Error::InvalidArgument(format!(
                "theta must be in (0, 1], got {}",
                self.theta
            )));
        }
        if self.k_max < 2 {
            return Err(Error::InvalidArgument(format!(
                "k_max must be at least 2, got {}",
                self.k_max
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClusterSummary {
    pub centroid: Vec<f64>,
    pub size: usize,
    /// Unique discrete states with counts, most frequent first.
    pub instances: Vec<(DiscreteState, usize)>,
    /// Length of the included prefix of `instances`.
    pub included: usize,
    pub condition: Condition,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    pub k: usize,
    pub theta: f64,
    pub inertias: Vec<f64>,
    pub conditions: Vec<Condition>,
    pub clusters: Vec<ClusterSummary>,
}

/// Shortest prefix of `sorted` (count-descending) whose cumulative count
/// reaches `theta · total`, extended over entries tied with the last count.
pub fn included_prefix(sorted: &[(DiscreteState, usize)], theta: f64) -> usize {
    let total: usize = sorted.iter().map(|(_, c)| c).sum();
    let need = theta * total as f64 - 1e-9;
    let mut cum = 0usize;
    let mut len = 0;
    for (i, (_, c)) in sorted.iter().enumerate() {
        cum += c;
        len = i + 1;
        if cum as f64 >= need {
            break;
        }
    }
    if len > 0 {
        let boundary = sorted[len - 1].1;
        while len < sorted.len() && sorted[len].1 == boundary {
            len += 1;
        }
    }
    len
}

/// Predicates with a single value across the included instances. Empty if
/// they agree on none (or there are no instances).
pub fn unanimous_condition(included: &[(DiscreteState, usize)]) -> Condition {
    let Some((first, _)) = included.first() else {
        return Condition::default();
    };
    let assignments: BTreeMap<usize, LevelSet> = (0..first.len())
        .filter(|&f| included.iter().all(|(s, _)| s.0[f] == first.0[f]))
        .map(|f| (f, LevelSet::single(first.0[f])))
        .collect();
    Condition::new(assignments)
}

/// Summarizes one cluster's member states.
pub fn summarize_cluster(members: &[(DiscreteState, usize)], theta: f64) -> (Vec<(DiscreteState, usize)>, usize, Condition) {
    let mut instances = members.to_vec();
    instances.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    let included = included_prefix(&instances, theta);
    let condition = unanimous_condition(&instances[..included]);
    (instances, included, condition)
}

/// Runs the summarizer on already-discretized states.
pub fn summarize_states(states: &[DiscreteState], cfg: &SummarizerConfig) -> Result<Summary> {
    cfg.validate()?;
    if states.is_empty() {
        return Err(Error::EmptyData("no data matches query".into()));
    }
    let points = WeightedPoints::from_states(states);
    let (elbow, fit) = elbow_weighted(&points, cfg.k_max, cfg.seed);

    let mut members: Vec<Vec<(DiscreteState, usize)>> = vec![Vec::new(); elbow.k];
    for (i, &cluster) in fit.assignments.iter().enumerate() {
        members[cluster].push((points.keys[i].clone(), points.weights[i] as usize));
    }

    let mut clusters = Vec::with_capacity(elbow.k);
    let mut seen = HashSet::new();
    let mut conditions = Vec::new();
    for (j, m) in members.iter().enumerate() {
        if m.is_empty() {
            continue;
        }
        let (instances, included, condition) = summarize_cluster(m, cfg.theta);
        if seen.insert(condition.clone()) {
            conditions.push(condition.clone());
        }
        clusters.push(ClusterSummary {
            centroid: fit.centroids[j].clone(),
            size: m.iter().map(|(_, c)| c).sum(),
            instances,
            included,
            condition,
        });
    }
    for c in &mut conditions {
        c.support = states.iter().filter(|s| c.matches(s)).count();
    }
    conditions.sort_by(|a, b| b.support.cmp(&a.support).then_with(|| a.cmp(b)));

    Ok(Summary {
        k: elbow.k,
        theta: cfg.theta,
        inertias: elbow.inertias,
        conditions,
        clusters,
    })
}

/// Discretizes a (query-filtered) replay and summarizes it.
pub fn summarize_cbs(filtered: &ReplaySet, schema: &PredicateSchema, cfg: &SummarizerConfig) -> Result<Summary> {
    if filtered.is_empty() {
        return Err(Error::EmptyData("no data matches query".into()));
    }
    let states = schema.discretize_all(filtered)?;
    summarize_states(&states, cfg)
}
