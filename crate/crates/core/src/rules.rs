//! Explanations turned into executable weighted rules, with action selection
//! and nearest-condition approximation for uncovered states.

use std::collections::BTreeMap;
use std::fmt;
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::condition::Condition;
use crate::error::{Error, Result};
use crate::predicates::{DiscreteState, PredicateSchema};
use crate::replay::ReplaySet;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WeightKind {
    W1,
    W2,
    W3,
    W4,
}

impl WeightKind {
    pub const ALL: [WeightKind; 4] = [WeightKind::W1, WeightKind::W2, WeightKind::W3, WeightKind::W4];
}

impl fmt::Display for WeightKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            WeightKind::W1 => "w1",
            WeightKind::W2 => "w2",
            WeightKind::W3 => "w3",
            WeightKind::W4 => "w4",
        };
        f.write_str(s)
    }
}

impl FromStr for WeightKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "w1" => Ok(WeightKind::W1),
            "w2" => Ok(WeightKind::W2),
            "w3" => Ok(WeightKind::W3),
            "w4" => Ok(WeightKind::W4),
            _ => Err(Error::InvalidArgument(format!("unknown weight '{s}' (expected w1..w4)"))),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counts {
    /// Records matching the condition and taking the action.
    pub n_ca: usize,
    /// Records matching the condition.
    pub n_c: usize,
    /// Records taking the action.
    pub n_a: usize,
    pub n_total: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Weights {
    pub w1: f64,
    pub w2: f64,
    pub w3: f64,
    pub w4: f64,
    /// A denominator was zero and the affected weight was set to 0.
    pub zero_denominator: bool,
}

impl Weights {
    pub fn get(&self, kind: WeightKind) -> f64 {
        match kind {
            WeightKind::W1 => self.w1,
            WeightKind::W2 => self.w2,
            WeightKind::W3 => self.w3,
            WeightKind::W4 => self.w4,
        }
    }
}

/// `w1 = N_ca/N_a`, `w2 = N_ca/N_c`, `w3 = N_ca/N_total`, `w4 = w1·w3`.
pub fn compute_weights(c: Counts) -> Weights {
    let ratio = |num: usize, den: usize| if den == 0 { 0.0 } else { num as f64 / den as f64 };
    let w1 = ratio(c.n_ca, c.n_a);
    let w3 = ratio(c.n_ca, c.n_total);
    Weights {
        w1,
        w2: ratio(c.n_ca, c.n_c),
        w3,
        w4: w1 * w3,
        zero_denominator: c.n_a == 0 || c.n_c == 0 || c.n_total == 0,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rule {
    pub action: usize,
    #[serde(flatten)]
    pub condition: Condition,
    /// Occurrence weight.
    pub o: f64,
    pub counts: Counts,
}

impl Rule {
    /// A rule whose condition never co-occurred with its action.
    pub fn is_inert(&self) -> bool {
        self.counts.n_ca == 0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Fallback {
    Approximate,
    Abstain,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Provenance {
    Matched { rule: usize },
    Approximated { rule: usize, distance: f64 },
    Abstained,
}

/// Rules grouped by action (ascending), serialized as `rules.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RuleSet {
    pub weight_kind: WeightKind,
    pub n_cat: usize,
    pub fallback: Fallback,
    pub rules: Vec<Rule>,
}

/// Counts and weights for every (condition, action) pair over discretized
/// records.
pub fn extract_rules_from_states(
    conds_per_action: &BTreeMap<usize, Vec<Condition>>,
    states: &[DiscreteState],
    actions: &[usize],
    n_cat: usize,
    weight_kind: WeightKind,
) -> Result<RuleSet> {
    if states.is_empty() {
        return Err(Error::EmptyData("cannot extract rules from an empty replay".into()));
    }
    let n_features = states[0].len();
    let mut rules = Vec::new();
    for (&action, conds) in conds_per_action {
        let mut seen = std::collections::HashSet::new();
        for cond in conds {
            if cond.max_feature().is_some_and(|f| f >= n_features)
                || cond.max_level().is_some_and(|l| l as usize >= n_cat)
            {
                return Err(Error::Schema(
                    "condition refers to a feature or level outside the predicate schema".into(),
                ));
            }
            if !seen.insert(cond.clone()) {
                continue;
            }
            let mut counts = Counts {
                n_total: states.len(),
                ..Counts::default()
            };
            for (s, &a) in states.iter().zip(actions) {
                let hit = cond.matches(s);
                counts.n_c += hit as usize;
                counts.n_a += (a == action) as usize;
                counts.n_ca += (hit && a == action) as usize;
            }
            rules.push(Rule {
                action,
                condition: cond.clone(),
                o: compute_weights(counts).get(weight_kind),
                counts,
            });
        }
    }
    Ok(RuleSet {
        weight_kind,
        n_cat,
        fallback: Fallback::Approximate,
        rules,
    })
}

/// Builds the rule set for a replay. A condition matches a record when its
/// discretized state agrees on every assigned feature.
pub fn extract_rules(
    conds_per_action: &BTreeMap<usize, Vec<Condition>>,
    rs: &ReplaySet,
    schema: &PredicateSchema,
    weight_kind: WeightKind,
) -> Result<RuleSet> {
    if let Some(&a) = conds_per_action.keys().find(|&&a| a >= rs.n_actions()) {
        return Err(Error::InvalidAction {
            action: a,
            n_actions: rs.n_actions(),
        });
    }
    let states = schema.discretize_all(rs)?;
    extract_rules_from_states(conds_per_action, &states, &rs.actions(), schema.n_cat(), weight_kind)
}

impl RuleSet {
    pub fn with_fallback(mut self, fallback: Fallback) -> Self {
        self.fallback = fallback;
        self
    }

    pub fn is_empty(&self) -> bool {
        self.rules.is_empty()
    }

    pub fn conditions_per_action(&self) -> BTreeMap<usize, Vec<Condition>> {
        let mut out: BTreeMap<usize, Vec<Condition>> = BTreeMap::new();
        for r in &self.rules {
            out.entry(r.action).or_default().push(r.condition.clone());
        }
        out
    }

    /// Rules eligible to drive a decision: the non-inert ones, or all of
    /// them when every rule is inert.
    fn active(&self) -> impl Iterator<Item = (usize, &Rule)> {
        let any_live = self.rules.iter().any(|r| !r.is_inert());
        self.rules
            .iter()
            .enumerate()
            .filter(move |(_, r)| !any_live || !r.is_inert())
    }

    /// True if some rule's condition matches the state.
    pub fn covers(&self, state: &DiscreteState) -> bool {
        self.rules.iter().any(|r| r.condition.matches(state))
    }

    /// Best action among matching rules: highest `o`, then larger `N_ca`,
    /// then lower action id. `None` if nothing matches.
    pub fn select_matched(&self, state: &DiscreteState) -> Option<(usize, Provenance)> {
        self.active()
            .filter(|(_, r)| r.condition.matches(state))
            .min_by(|(ia, a), (ib, b)| {
                b.o.total_cmp(&a.o)
                    .then(b.counts.n_ca.cmp(&a.counts.n_ca))
                    .then(a.action.cmp(&b.action))
                    .then(ia.cmp(ib))
            })
            .map(|(i, r)| (r.action, Provenance::Matched { rule: i }))
    }

    /// Nearest rule by Euclidean distance over the condition's assigned
    /// features, in levels scaled by `1/(n_cat − 1)`. Ties: higher `o`, then
    /// lower action id.
    pub fn approximate(&self, state: &DiscreteState) -> Option<(usize, Provenance)> {
        let scale = (self.n_cat.max(2) - 1) as f64;
        self.active()
            .map(|(i, r)| {
                let sq: f64 = r
                    .condition
                    .assignments
                    .iter()
                    .map(|(&f, set)| {
                        let d = set.distance(state.0[f]) as f64 / scale;
                        d * d
                    })
                    .sum();
                (i, r, sq.sqrt())
            })
            .min_by(|(ia, a, da), (ib, b, db)| {
                da.total_cmp(db)
                    .then(b.o.total_cmp(&a.o))
                    .then(a.action.cmp(&b.action))
                    .then(ia.cmp(ib))
            })
            .map(|(i, r, d)| {
                (
                    r.action,
                    Provenance::Approximated {
                        rule: i,
                        distance: d,
                    },
                )
            })
    }

    /// Action for a discretized state, honouring the fallback policy.
    pub fn select_discrete(&self, state: &DiscreteState) -> Result<(Option<usize>, Provenance)> {
        if self.rules.is_empty() {
            return Err(Error::EmptyData("rule set has no rules".into()));
        }
        if let Some((a, p)) = self.select_matched(state) {
            return Ok((Some(a), p));
        }
        match self.fallback {
            Fallback::Approximate => {
                let (a, p) = self.approximate(state).expect("rule set is non-empty");
                Ok((Some(a), p))
            }
            Fallback::Abstain => Ok((None, Provenance::Abstained)),
        }
    }

    /// Action for a raw state.
    pub fn select_action(&self, schema: &PredicateSchema, state: &[f64]) -> Result<(Option<usize>, Provenance)> {
        let d = schema.discretize(state)?;
        if !d.is_empty() && self.rules.iter().any(|r| r.condition.max_feature().is_some_and(|f| f >= d.len())) {
            return Err(Error::Schema("rules refer to features outside the predicate schema".into()));
        }
        self.select_discrete(&d)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        if !path.exists() {
            return Err(Error::NotFound(path.to_path_buf()));
        }
        Ok(serde_json::from_reader(BufReader::new(File::open(path)?))?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        w.write_all(self.to_json()?.as_bytes())?;
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }
}

/// Result of checking the weight formulas over a rule set's conditions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WeightCheck {
    pub conditions: usize,
    /// Largest `|Σ_a w2(c, a) − 1|` over conditions with `N_c > 0`.
    pub max_w2_sum_error: f64,
    /// Every rule has `w4 == w1·w3` bit-for-bit and `o` equal to its weight.
    pub exact: bool,
}

/// Recounts every distinct condition against every action (not only the
/// actions it was generated for) and checks the weight identities.
pub fn check_weight_identities(ruleset: &RuleSet, states: &[DiscreteState], actions: &[usize], n_actions: usize) -> WeightCheck {
    let distinct: std::collections::BTreeSet<&Condition> = ruleset.rules.iter().map(|r| &r.condition).collect();
    let mut n_a = vec![0usize; n_actions];
    for &a in actions {
        n_a[a] += 1;
    }
    let mut max_err: f64 = 0.0;
    for c in &distinct {
        let mut n_ca = vec![0usize; n_actions];
        for (s, &a) in states.iter().zip(actions) {
            if c.matches(s) {
                n_ca[a] += 1;
            }
        }
        let n_c: usize = n_ca.iter().sum();
        if n_c == 0 {
            continue;
        }
        let sum: f64 = (0..n_actions)
            .map(|a| {
                compute_weights(Counts {
                    n_ca: n_ca[a],
                    n_c,
                    n_a: n_a[a],
                    n_total: states.len(),
                })
                .w2
            })
            .sum();
        max_err = max_err.max((sum - 1.0).abs());
    }
    let exact = ruleset.rules.iter().all(|r| {
        let w = compute_weights(r.counts);
        w.w4 == w.w1 * w.w3 && r.o == w.get(ruleset.weight_kind)
    });
    WeightCheck {
        conditions: distinct.len(),
        max_w2_sum_error: max_err,
        exact,
    }
}
