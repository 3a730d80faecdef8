//! APE baseline: per action, minimize the set of binary discrete states
//! observed under it with Quine–McCluskey and read the prime implicants back
//! as conditions.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;

use serde::Serialize;

use crate::condition::{Condition, LevelSet};
use crate::error::{Error, Result};
use crate::predicates::{DiscreteState, PredicateSchema};
use crate::replay::ReplaySet;

/// Largest variable count accepted; the number of implicants grows roughly
/// like `3^n / n`.
pub const MAX_VARS: usize = 20;

/// Product term over `nvars` variables. Variable 0 is the most significant
/// bit of a minterm id. Bits set in `mask` are dashes.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct Implicant {
    pub value: u32,
    pub mask: u32,
    pub nvars: usize,
    /// ON-set and don't-care minterms it covers, ascending.
    pub covered: Vec<u32>,
}

impl Implicant {
    pub fn covers(&self, minterm: u32) -> bool {
        minterm & !self.mask == self.value
    }

    pub fn is_tautology(&self) -> bool {
        self.mask.count_ones() as usize == self.nvars
    }

    /// Trit for variable `var`: `Some(bit)` or `None` for a dash.
    pub fn trit(&self, var: usize) -> Option<bool> {
        let bit = 1 << (self.nvars - 1 - var);
        (self.mask & bit == 0).then_some(self.value & bit != 0)
    }

    pub fn pattern(&self) -> String {
        (0..self.nvars)
            .map(|v| match self.trit(v) {
                None => '-',
                Some(true) => '1',
                Some(false) => '0',
            })
            .collect()
    }
}

impl fmt::Display for Implicant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.pattern())
    }
}

/// All prime implicants of `onset ∪ dcset`.
fn prime_implicants(terms: &BTreeSet<u32>, nvars: usize) -> Vec<(u32, u32)> {
    let mut current: HashSet<(u32, u32)> = terms.iter().map(|&m| (m, 0)).collect();
    let mut primes = Vec::new();
    while !current.is_empty() {
        let mut next = HashSet::new();
        let mut merged = HashSet::new();
        for &(value, mask) in &current {
            for b in 0..nvars {
                let bit = 1u32 << b;
                if mask & bit != 0 || value & bit != 0 {
                    continue;
                }
                let partner = (value | bit, mask);
                if current.contains(&partner) {
                    next.insert((value, mask | bit));
                    merged.insert((value, mask));
                    merged.insert(partner);
                }
            }
        }
        primes.extend(current.iter().filter(|t| !merged.contains(t)).copied());
        current = next;
    }
    primes.sort_unstable();
    primes
}

/// Quine–McCluskey: prime implicants, then essential primes, then a greedy
/// cover (most uncovered ON-set minterms first, ties by pattern) for the
/// rest. The result covers the ON-set exactly and never an OFF-set minterm.
pub fn qm_minimize(onset: &BTreeSet<u32>, dcset: &BTreeSet<u32>, nvars: usize) -> Result<Vec<Implicant>> {
    if nvars > MAX_VARS {
        return Err(Error::Resource(format!(
            "{nvars} binary predicates exceed the Quine–McCluskey limit of {MAX_VARS}"
        )));
    }
    let space = 1u64 << nvars;
    if let Some(m) = onset.iter().chain(dcset).find(|&&m| m as u64 >= space) {
        return Err(Error::InvalidArgument(format!("minterm {m} out of range for {nvars} variables")));
    }
    if let Some(m) = onset.intersection(dcset).next() {
        return Err(Error::InvalidArgument(format!("minterm {m} is in both ON-set and DC-set")));
    }
    if onset.is_empty() {
        return Ok(Vec::new());
    }
    let terms: BTreeSet<u32> = onset.union(dcset).copied().collect();
    let primes = prime_implicants(&terms, nvars);
    let on: Vec<u32> = onset.iter().copied().collect();
    let covers: Vec<Vec<usize>> = primes
        .iter()
        .map(|&(v, m)| {
            on.iter()
                .enumerate()
                .filter(|(_, &t)| t & !m == v)
                .map(|(i, _)| i)
                .collect()
        })
        .collect();

    let mut chosen: BTreeSet<usize> = BTreeSet::new();
    let mut covered = vec![false; on.len()];
    let mut coverers: Vec<Vec<usize>> = vec![Vec::new(); on.len()];
    for (p, c) in covers.iter().enumerate() {
        for &i in c {
            coverers[i].push(p);
        }
    }
    for list in &coverers {
        if let [only] = list.as_slice() {
            chosen.insert(*only);
        }
    }
    for &p in &chosen {
        for &i in &covers[p] {
            covered[i] = true;
        }
    }
    let pattern = |p: usize| {
        let (v, m) = primes[p];
        Implicant {
            value: v,
            mask: m,
            nvars,
            covered: Vec::new(),
        }
        .pattern()
    };
    while covered.iter().any(|c| !c) {
        let best = (0..primes.len())
            .filter(|p| !chosen.contains(p))
            .map(|p| (p, covers[p].iter().filter(|&&i| !covered[i]).count()))
            .filter(|&(_, n)| n > 0)
            .max_by(|a, b| a.1.cmp(&b.1).then_with(|| pattern(b.0).cmp(&pattern(a.0))))
            .expect("primes cover the ON-set");
        chosen.insert(best.0);
        for &i in &covers[best.0] {
            covered[i] = true;
        }
    }

    let mut out: Vec<Implicant> = chosen
        .into_iter()
        .map(|p| {
            let (value, mask) = primes[p];
            let covered = terms.iter().copied().filter(|&t| t & !mask == value).collect();
            Implicant {
                value,
                mask,
                nvars,
                covered,
            }
        })
        .collect();
    out.sort_by_key(|i| i.pattern());
    Ok(out)
}

pub fn minterm_of(state: &DiscreteState) -> u32 {
    state.0.iter().fold(0u32, |acc, &l| (acc << 1) | u32::from(l != 0))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", content = "conditions", rename_all = "snake_case")]
pub enum ApeOutcome {
    Conditions(Vec<Condition>),
    /// The minimized cover is the tautology: every state appears under the
    /// action, so nothing distinguishes it.
    NoExplanation,
}

impl ApeOutcome {
    pub fn conditions(&self) -> &[Condition] {
        match self {
            ApeOutcome::Conditions(c) => c,
            ApeOutcome::NoExplanation => &[],
        }
    }
}

fn implicant_condition(imp: &Implicant) -> Condition {
    Condition::new(
        (0..imp.nvars)
            .filter_map(|v| imp.trit(v).map(|b| (v, LevelSet::single(b as u16))))
            .collect(),
    )
}

/// Minterm sets for every action: observed states per action and the
/// don't-care set of states never observed under any action.
fn observed_minterms(states: &[DiscreteState], actions: &[usize], nvars: usize) -> (BTreeMap<usize, BTreeSet<u32>>, BTreeSet<u32>) {
    let mut per_action: BTreeMap<usize, BTreeSet<u32>> = BTreeMap::new();
    let mut seen = BTreeSet::new();
    for (s, &a) in states.iter().zip(actions) {
        let m = minterm_of(s);
        per_action.entry(a).or_default().insert(m);
        seen.insert(m);
    }
    let dc = (0..1u32 << nvars).filter(|m| !seen.contains(m)).collect();
    (per_action, dc)
}

fn check_binary(schema: &PredicateSchema) -> Result<()> {
    if schema.n_cat() != 2 {
        return Err(Error::UnsupportedSchema(format!(
            "APE works on binary predicates only (n_cat = 2), got n_cat = {}",
            schema.n_cat()
        )));
    }
    if schema.len() > MAX_VARS {
        return Err(Error::Resource(format!(
            "{} binary predicates exceed the Quine–McCluskey limit of {MAX_VARS}",
            schema.len()
        )));
    }
    Ok(())
}

/// Explains one action. An action that never occurs yields an empty list.
pub fn ape_explain(rs: &ReplaySet, action: usize, schema: &PredicateSchema) -> Result<ApeOutcome> {
    check_binary(schema)?;
    let states = schema.discretize_all(rs)?;
    let actions = rs.actions();
    ape_from_states(&states, &actions, action, schema.len())
}

/// Explains every action of the replay (actions with no records included).
pub fn ape_explain_all(rs: &ReplaySet, schema: &PredicateSchema) -> Result<BTreeMap<usize, ApeOutcome>> {
    check_binary(schema)?;
    let states = schema.discretize_all(rs)?;
    let actions = rs.actions();
    (0..rs.n_actions())
        .map(|a| Ok((a, ape_from_states(&states, &actions, a, schema.len())?)))
        .collect()
}

pub(crate) fn ape_from_states(states: &[DiscreteState], actions: &[usize], action: usize, nvars: usize) -> Result<ApeOutcome> {
    let (per_action, dc) = observed_minterms(states, actions, nvars);
    let onset = per_action.get(&action).cloned().unwrap_or_default();
    let cover = qm_minimize(&onset, &dc, nvars)?;
    if cover.len() == 1 && cover[0].is_tautology() {
        return Ok(ApeOutcome::NoExplanation);
    }
    let mut conditions: Vec<Condition> = cover.iter().map(implicant_condition).collect();
    for c in &mut conditions {
        c.support = states
            .iter()
            .zip(actions)
            .filter(|(s, &a)| a == action && c.matches(s))
            .count();
    }
    Ok(ApeOutcome::Conditions(conditions))
}
