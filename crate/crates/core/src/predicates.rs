//! Predicate functions: per-feature ordered thresholds that map a raw state
//! to discrete levels, and the generators that place those thresholds.
//!
//! A feature's level is the number of its thresholds strictly exceeded by the
//! value, so with one threshold the predicate is the indicator `s > l`.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::replay::{FeatureSchema, ReplaySet};
use crate::tree::{midpoint, SortedSamples};

pub type Level = u16;

/// Upper bound on levels per feature (level sets are 64-bit masks).
pub const MAX_LEVELS: usize = 64;

/// Discretized state: one level per feature.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct DiscreteState(pub Vec<Level>);

impl DiscreteState {
    pub fn levels(&self) -> &[Level] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PredicateSource {
    Gini,
    Quantile,
    Expert,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeaturePredicate {
    pub name: String,
    pub thresholds: Vec<f64>,
    pub labels: Vec<String>,
    /// Thresholds could not all be placed inside the observed data.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub degenerate: bool,
}

/// The discretization `P`: thresholds and level labels for every feature.
/// Serialized as `predicates.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredicateSchema {
    n_cat: usize,
    features: Vec<FeaturePredicate>,
    #[serde(default = "default_source")]
    source: PredicateSource,
}

fn default_source() -> PredicateSource {
    PredicateSource::Expert
}

/// Level labels, lowest first. Two and five levels use the usual
/// Low/High and Very Low..Very High names; the others extend symmetrically
/// with "Extremely" outermost.
pub fn default_labels(n_cat: usize) -> Vec<String> {
    let names: &[&str] = match n_cat {
        2 => &["Low", "High"],
        3 => &["Low", "Medium", "High"],
        4 => &["Extremely Low", "Low", "High", "Extremely High"],
        5 => &["Very Low", "Low", "Medium", "High", "Very High"],
        6 => &["Extremely Low", "Very Low", "Low", "High", "Very High", "Extremely High"],
        7 => &[
            "Extremely Low",
            "Very Low",
            "Low",
            "Medium",
            "High",
            "Very High",
            "Extremely High",
        ],
        _ => return (0..n_cat).map(|i| format!("Level {i}")).collect(),
    };
    names.iter().map(|s| s.to_string()).collect()
}

impl PredicateSchema {
    pub fn new(n_cat: usize, features: Vec<FeaturePredicate>, source: PredicateSource) -> Result<Self> {
        if !(2..=MAX_LEVELS).contains(&n_cat) {
            return Err(Error::Schema(format!("n_cat must be in 2..={MAX_LEVELS}, got {n_cat}")));
        }
        for f in &features {
            if f.thresholds.len() != n_cat - 1 {
                return Err(Error::Schema(format!(
                    "feature '{}' has {} thresholds, expected {}",
                    f.name,
                    f.thresholds.len(),
                    n_cat - 1
                )));
            }
            if f.labels.len() != n_cat {
                return Err(Error::Schema(format!(
                    "feature '{}' has {} labels, expected {n_cat}",
                    f.name,
                    f.labels.len()
                )));
            }
            if f.thresholds.iter().any(|t| !t.is_finite()) {
                return Err(Error::Schema(format!("feature '{}' has a non-finite threshold", f.name)));
            }
            if f.thresholds.windows(2).any(|w| !(w[0] < w[1])) {
                return Err(Error::Schema(format!(
                    "feature '{}' thresholds are not strictly increasing",
                    f.name
                )));
            }
        }
        Ok(Self {
            n_cat,
            features,
            source,
        })
    }

    /// Expert-defined thresholds with the default labels.
    pub fn from_thresholds(names: &[&str], thresholds: Vec<Vec<f64>>) -> Result<Self> {
        let n_cat = thresholds.first().map_or(2, |t| t.len() + 1);
        let features = names
            .iter()
            .zip(thresholds)
            .map(|(name, thresholds)| FeaturePredicate {
                name: name.to_string(),
                thresholds,
                labels: default_labels(n_cat),
                degenerate: false,
            })
            .collect();
        Self::new(n_cat, features, PredicateSource::Expert)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        if !path.exists() {
            return Err(Error::NotFound(path.to_path_buf()));
        }
        let raw: PredicateSchema = serde_json::from_reader(BufReader::new(File::open(path)?))?;
        Self::new(raw.n_cat, raw.features, raw.source)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        serde_json::to_writer_pretty(&mut w, self)?;
        writeln!(w)?;
        Ok(())
    }

    pub fn n_cat(&self) -> usize {
        self.n_cat
    }

    pub fn source(&self) -> PredicateSource {
        self.source
    }

    pub fn features(&self) -> &[FeaturePredicate] {
        &self.features
    }

    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    pub fn thresholds(&self, feature: usize) -> &[f64] {
        &self.features[feature].thresholds
    }

    pub fn label(&self, feature: usize, level: Level) -> Option<&str> {
        self.features
            .get(feature)?
            .labels
            .get(level as usize)
            .map(String::as_str)
    }

    /// Level index for a label, case-insensitive.
    pub fn level_of(&self, feature: usize, label: &str) -> Option<Level> {
        let norm = |s: &str| s.split_whitespace().collect::<Vec<_>>().join(" ").to_lowercase();
        let want = norm(label);
        self.features[feature]
            .labels
            .iter()
            .position(|l| norm(l) == want)
            .map(|i| i as Level)
    }

    /// Checks that the predicate features line up with a replay schema.
    pub fn check_against(&self, schema: &FeatureSchema) -> Result<()> {
        let ours: Vec<&str> = self.features.iter().map(|f| f.name.as_str()).collect();
        if ours != schema.names() {
            return Err(Error::Schema(format!(
                "predicate features {ours:?} do not match replay features {:?}",
                schema.names()
            )));
        }
        Ok(())
    }

    /// Replaces one threshold, keeping the list strictly increasing.
    pub fn with_threshold(&self, feature: usize, index: usize, value: f64) -> Result<Self> {
        let mut next = self.clone();
        next.features[feature].thresholds[index] = value;
        next.features[feature].degenerate = false;
        Self::new(next.n_cat, next.features, next.source)
    }

    pub fn discretize(&self, state: &[f64]) -> Result<DiscreteState> {
        if state.len() != self.features.len() {
            return Err(Error::Discretization(format!(
                "state has {} values, schema has {} features",
                state.len(),
                self.features.len()
            )));
        }
        let mut levels = Vec::with_capacity(state.len());
        for (f, &v) in self.features.iter().zip(state) {
            if !v.is_finite() {
                return Err(Error::Discretization(format!(
                    "feature '{}' has non-finite value {v}",
                    f.name
                )));
            }
            levels.push(f.thresholds.partition_point(|&t| t < v) as Level);
        }
        Ok(DiscreteState(levels))
    }

    pub fn discretize_all(&self, rs: &ReplaySet) -> Result<Vec<DiscreteState>> {
        self.check_against(rs.schema())?;
        rs.states().map(|s| self.discretize(s)).collect()
    }
}

/// Numpy-style linear interpolation quantile of sorted data.
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Bumps colliding thresholds to the next float up. Returns whether any
/// bump was needed.
fn make_strict(thresholds: &mut [f64]) -> bool {
    let mut bumped = false;
    for i in 1..thresholds.len() {
        if thresholds[i] <= thresholds[i - 1] {
            thresholds[i] = thresholds[i - 1].next_up();
            bumped = true;
        }
    }
    bumped
}

fn check_generator_input(rs: &ReplaySet, n_cat: usize) -> Result<()> {
    if rs.is_empty() {
        return Err(Error::EmptyData("cannot derive predicates from an empty replay".into()));
    }
    if n_cat < 2 {
        return Err(Error::InvalidArgument(format!("n_cat must be at least 2, got {n_cat}")));
    }
    if rs.len() < n_cat {
        return Err(Error::InvalidArgument(format!(
            "need at least n_cat = {n_cat} records, got {}",
            rs.len()
        )));
    }
    Ok(())
}

/// Thresholds at the `i/n_cat` quantiles (the median for two levels).
pub fn make_quantile_limits(rs: &ReplaySet, n_cat: usize) -> Result<PredicateSchema> {
    check_generator_input(rs, n_cat)?;
    let features = rs
        .schema()
        .features()
        .iter()
        .enumerate()
        .map(|(f, feat)| {
            let mut values: Vec<f64> = rs.states().map(|s| s[f]).collect();
            values.sort_by(f64::total_cmp);
            let mut thresholds: Vec<f64> = (1..n_cat)
                .map(|i| quantile_sorted(&values, i as f64 / n_cat as f64))
                .collect();
            let constant = values[0] == values[values.len() - 1];
            let bumped = make_strict(&mut thresholds);
            FeaturePredicate {
                name: feat.name.clone(),
                thresholds,
                labels: default_labels(n_cat),
                degenerate: constant || bumped,
            }
        })
        .collect();
    PredicateSchema::new(n_cat, features, PredicateSource::Quantile)
}

/// Thresholds from a per-feature Gini tree with at most `n_cat` leaves,
/// trained to predict the replayed action from that feature alone.
///
/// When fewer than `n_cat − 1` splits lower impurity, the widest remaining
/// leaf is split at the candidate midpoint nearest its median until the
/// count is reached or no leaf has two distinct values left; after that,
/// thresholds are stacked just above the last one and the feature is flagged
/// degenerate.
pub fn make_gini_limits(rs: &ReplaySet, n_cat: usize) -> Result<PredicateSchema> {
    check_generator_input(rs, n_cat)?;
    let features = rs
        .schema()
        .features()
        .iter()
        .enumerate()
        .map(|(f, feat)| {
            let samples = SortedSamples::new(rs.records().iter().map(|r| (r.state[f], r.action)));
            let (thresholds, degenerate) = gini_thresholds(&samples, n_cat);
            FeaturePredicate {
                name: feat.name.clone(),
                thresholds,
                labels: default_labels(n_cat),
                degenerate,
            }
        })
        .collect();
    PredicateSchema::new(n_cat, features, PredicateSource::Gini)
}

fn gini_thresholds(samples: &SortedSamples, n_cat: usize) -> (Vec<f64>, bool) {
    let values = samples.values();
    if values[0] == values[values.len() - 1] {
        let mut t = vec![values[0]; n_cat - 1];
        make_strict(&mut t);
        return (t, true);
    }
    let (splits, mut leaves) = samples.grow(n_cat);
    let mut thresholds: Vec<f64> = splits.iter().map(|s| s.threshold).collect();
    while thresholds.len() < n_cat - 1 {
        let widest = leaves
            .iter()
            .enumerate()
            .map(|(i, l)| {
                let v = samples.leaf_values(*l);
                (i, v[v.len() - 1] - v[0])
            })
            .filter(|&(_, w)| w > 0.0)
            .max_by(|a, b| a.1.total_cmp(&b.1).then(b.0.cmp(&a.0)));
        let Some((idx, _)) = widest else { break };
        let leaf = leaves[idx];
        let v = samples.leaf_values(leaf);
        let median = quantile_sorted(v, 0.5);
        // Candidate cut positions are where the sorted value changes.
        let cut = (1..v.len())
            .filter(|&i| v[i - 1] < v[i])
            .min_by(|&a, &b| {
                let da = (midpoint(v[a - 1], v[a]) - median).abs();
                let db = (midpoint(v[b - 1], v[b]) - median).abs();
                da.total_cmp(&db).then(a.cmp(&b))
            })
            .expect("leaf has two distinct values");
        thresholds.push(midpoint(v[cut - 1], v[cut]));
        leaves[idx] = crate::tree::Leaf {
            start: leaf.start,
            end: leaf.start + cut,
        };
        leaves.push(crate::tree::Leaf {
            start: leaf.start + cut,
            end: leaf.end,
        });
    }
    thresholds.sort_by(f64::total_cmp);
    let exhausted = thresholds.len() < n_cat - 1;
    while thresholds.len() < n_cat - 1 {
        let last = *thresholds.last().expect("non-constant feature has a split");
        thresholds.push(last.next_up());
    }
    (thresholds, exhausted)
}
