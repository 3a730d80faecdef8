//! Template rendering of conditions into natural-language explanations.

use crate::condition::{Condition, LevelSet};
use crate::error::{Error, Result};
use crate::predicates::PredicateSchema;

pub const NO_CONDITION: &str = "no distinguishing condition found";
/// Rendering of the empty condition, which matches every state.
pub const ANY_STATE: &str = "any state";

/// Merges conditions that differ only in one feature's level set, to a
/// fixpoint. The set of states matched by the list is unchanged.
pub fn compress_levels(conds: &[Condition]) -> Vec<Condition> {
    let mut out: Vec<Condition> = conds.to_vec();
    'restart: loop {
        for i in 0..out.len() {
            for j in i + 1..out.len() {
                if let Some(merged) = merge_pair(&out[i], &out[j]) {
                    out[i] = merged;
                    out.remove(j);
                    continue 'restart;
                }
            }
        }
        return out;
    }
}

fn merge_pair(a: &Condition, b: &Condition) -> Option<Condition> {
    if !a.assignments.keys().eq(b.assignments.keys()) {
        return None;
    }
    let mut differing = a
        .assignments
        .iter()
        .zip(&b.assignments)
        .filter(|((_, sa), (_, sb))| sa != sb);
    let ((&feature, sa), (_, sb)) = differing.next()?;
    if differing.next().is_some() {
        return None;
    }
    let union = sa.union(*sb);
    if !union.is_contiguous() {
        return None;
    }
    let mut merged = a.clone();
    merged.assignments.insert(feature, union);
    merged.support = a.support + b.support;
    Some(merged)
}

/// Labels are lowercased in running text.
fn label(schema: &PredicateSchema, feature: usize, level: u16) -> Result<String> {
    schema.label(feature, level).map(str::to_lowercase).ok_or_else(|| {
        Error::Render(format!(
            "level {level} out of range for feature {feature} (n_cat = {})",
            schema.n_cat()
        ))
    })
}

fn render_clause(schema: &PredicateSchema, feature: usize, set: LevelSet) -> Result<String> {
    let name = &schema
        .features()
        .get(feature)
        .ok_or_else(|| Error::Render(format!("feature {feature} not in schema")))?
        .name;
    let top = (schema.n_cat() - 1) as u16;
    let (lo, hi) = match (set.lowest(), set.highest()) {
        (Some(lo), Some(hi)) => (lo, hi),
        _ => return Err(Error::Render(format!("empty level set for '{name}'"))),
    };
    label(schema, feature, hi)?;
    if lo == hi {
        return Ok(format!("{name} is {}", label(schema, feature, lo)?));
    }
    if !set.is_contiguous() {
        let labels = set
            .levels()
            .map(|l| label(schema, feature, l))
            .collect::<Result<Vec<_>>>()?;
        return Ok(format!("{name} is {}", labels.join(" or ")));
    }
    Ok(match (lo == 0, hi == top) {
        (true, true) => format!("{name} is any level"),
        (false, true) => format!("{name} is above {}", label(schema, feature, lo - 1)?),
        (true, false) => format!("{name} is below {}", label(schema, feature, hi + 1)?),
        (false, false) => format!(
            "{name} is between {} and {}",
            label(schema, feature, lo)?,
            label(schema, feature, hi)?
        ),
    })
}

/// One condition as `<feature> is <level>` clauses joined by AND.
pub fn render_condition(cond: &Condition, schema: &PredicateSchema) -> Result<String> {
    if cond.is_empty() {
        return Ok(ANY_STATE.to_string());
    }
    let clauses = cond
        .assignments
        .iter()
        .map(|(&f, &set)| render_clause(schema, f, set))
        .collect::<Result<Vec<_>>>()?;
    Ok(clauses.join(" AND "))
}

/// Conditions joined by OR; each is parenthesized when there are several.
pub fn render_conditions(conds: &[Condition], schema: &PredicateSchema) -> Result<String> {
    if conds.is_empty() {
        return Ok(NO_CONDITION.to_string());
    }
    let parts = conds
        .iter()
        .map(|c| render_condition(c, schema))
        .collect::<Result<Vec<_>>>()?;
    if parts.len() == 1 {
        return Ok(parts.into_iter().next().expect("one part"));
    }
    Ok(parts
        .iter()
        .map(|p| format!("({p})"))
        .collect::<Vec<_>>()
        .join(" OR "))
}

/// Answer to "when will you do <action>?", with level compression applied.
/// Only an empty condition list (or only the empty condition) yields the
/// fallback text.
pub fn render_explanation(conds: &[Condition], schema: &PredicateSchema, action_name: &str) -> Result<String> {
    if conds.iter().all(Condition::is_empty) {
        return Ok(NO_CONDITION.to_string());
    }
    let compressed = compress_levels(conds);
    Ok(format!(
        "I take {action_name} when {}",
        render_conditions(&compressed, schema)?
    ))
}
