//! Conditions: sparse assignments of features to level sets, the unit of a
//! textual explanation and of a rule.

use std::collections::BTreeMap;
use std::fmt;
use std::hash::{Hash, Hasher};

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::predicates::{DiscreteState, Level, MAX_LEVELS};

/// Set of levels of one feature, stored as a bit mask.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct LevelSet(u64);

impl LevelSet {
    pub fn single(level: Level) -> Self {
        assert!((level as usize) < MAX_LEVELS, "level {level} out of range");
        LevelSet(1 << level)
    }

    pub fn from_levels(levels: impl IntoIterator<Item = Level>) -> Self {
        levels
            .into_iter()
            .fold(LevelSet(0), |acc, l| acc.union(LevelSet::single(l)))
    }

    pub fn contains(self, level: Level) -> bool {
        (level as usize) < MAX_LEVELS && self.0 & (1 << level) != 0
    }

    pub fn union(self, other: LevelSet) -> LevelSet {
        LevelSet(self.0 | other.0)
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn levels(self) -> impl Iterator<Item = Level> {
        (0..MAX_LEVELS as Level).filter(move |&l| self.contains(l))
    }

    pub fn lowest(self) -> Option<Level> {
        (!self.is_empty()).then(|| self.0.trailing_zeros() as Level)
    }

    pub fn highest(self) -> Option<Level> {
        (!self.is_empty()).then(|| (63 - self.0.leading_zeros()) as Level)
    }

    /// True when the levels form one run with no gaps.
    pub fn is_contiguous(self) -> bool {
        !self.is_empty() && {
            let shifted = self.0 >> self.0.trailing_zeros();
            shifted & (shifted + 1) == 0
        }
    }

    /// Distance from `level` to the nearest member.
    pub fn distance(self, level: Level) -> Level {
        self.levels().map(|l| l.abs_diff(level)).min().unwrap_or(0)
    }
}

impl fmt::Debug for LevelSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.levels()).finish()
    }
}

impl Serialize for LevelSet {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_seq(self.levels())
    }
}

impl<'de> Deserialize<'de> for LevelSet {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let levels = Vec::<Level>::deserialize(d)?;
        if let Some(bad) = levels.iter().find(|&&l| l as usize >= MAX_LEVELS) {
            return Err(serde::de::Error::custom(format!("level {bad} out of range")));
        }
        Ok(LevelSet::from_levels(levels))
    }
}

/// Feature index → allowed levels. Features not mentioned are unconstrained.
///
/// Equality, ordering and hashing consider only the assignments; `support`
/// is bookkeeping attached by whoever produced the condition.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct Condition {
    #[serde(with = "feature_keys")]
    pub assignments: BTreeMap<usize, LevelSet>,
    #[serde(default)]
    pub support: usize,
}

/// Feature indices as JSON object keys. Written out explicitly so the map
/// also round-trips when the condition is flattened into a rule.
mod feature_keys {
    use super::*;

    pub fn serialize<S: Serializer>(map: &BTreeMap<usize, LevelSet>, s: S) -> Result<S::Ok, S::Error> {
        s.collect_map(map.iter().map(|(k, v)| (k.to_string(), v)))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<BTreeMap<usize, LevelSet>, D::Error> {
        BTreeMap::<String, LevelSet>::deserialize(d)?
            .into_iter()
            .map(|(k, v)| {
                k.parse()
                    .map(|k| (k, v))
                    .map_err(|_| serde::de::Error::custom(format!("feature key '{k}' is not an index")))
            })
            .collect()
    }
}

impl Condition {
    pub fn new(assignments: BTreeMap<usize, LevelSet>) -> Self {
        Self {
            assignments,
            support: 0,
        }
    }

    /// Condition pinning every feature to its level in `state`.
    pub fn exact(state: &DiscreteState) -> Self {
        Self::new(
            state
                .levels()
                .iter()
                .enumerate()
                .map(|(f, &l)| (f, LevelSet::single(l)))
                .collect(),
        )
    }

    pub fn from_pairs(pairs: impl IntoIterator<Item = (usize, Level)>) -> Self {
        Self::new(pairs.into_iter().map(|(f, l)| (f, LevelSet::single(l))).collect())
    }

    pub fn with_support(mut self, support: usize) -> Self {
        self.support = support;
        self
    }

    pub fn is_empty(&self) -> bool {
        self.assignments.is_empty()
    }

    /// Partial match: every assigned feature's level is in its set.
    pub fn matches(&self, state: &DiscreteState) -> bool {
        self.assignments
            .iter()
            .all(|(&f, set)| state.0.get(f).is_some_and(|&l| set.contains(l)))
    }

    /// Largest level referenced, for range checks against a schema.
    pub fn max_level(&self) -> Option<Level> {
        self.assignments.values().filter_map(|s| s.highest()).max()
    }

    pub fn max_feature(&self) -> Option<usize> {
        self.assignments.keys().next_back().copied()
    }
}

impl PartialEq for Condition {
    fn eq(&self, other: &Self) -> bool {
        self.assignments == other.assignments
    }
}

impl Eq for Condition {}

impl Hash for Condition {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.assignments.hash(state);
    }
}

impl PartialOrd for Condition {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Condition {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.assignments.cmp(&other.assignments)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn level_set_basics() {
        let s = LevelSet::from_levels([2, 3]);
        assert!(s.contains(2) && s.contains(3) && !s.contains(1));
        assert!(s.is_contiguous());
        assert!(!LevelSet::from_levels([0, 2]).is_contiguous());
        assert_eq!(s.distance(0), 2);
        assert_eq!(s.distance(5), 2);
        assert_eq!((s.lowest(), s.highest()), (Some(2), Some(3)));
    }

    #[test]
    fn partial_match() {
        let c = Condition::from_pairs([(0, 1)]);
        assert!(c.matches(&DiscreteState(vec![1, 0])));
        assert!(c.matches(&DiscreteState(vec![1, 1])));
        assert!(!c.matches(&DiscreteState(vec![0, 0])));
    }

    #[test]
    fn equality_ignores_support() {
        let a = Condition::from_pairs([(0, 1)]).with_support(3);
        let b = Condition::from_pairs([(0, 1)]).with_support(9);
        assert_eq!(a, b);
    }

    #[test]
    fn json_round_trip() {
        let c = Condition::new([(0, LevelSet::single(1)), (2, LevelSet::from_levels([2, 3]))].into())
            .with_support(4);
        let json = serde_json::to_string(&c).unwrap();
        let back: Condition = serde_json::from_str(&json).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.support, 4);
    }
}
