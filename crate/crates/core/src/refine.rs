//! Threshold refinement: reduce conditions shared by several actions, or
//! nudge thresholds to raise fidelity F1. Both loops return the best schema
//! they visited, so neither can end worse than it started.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::eval::duplicated_conditions;
use crate::pipeline::{score_schema, PipelineConfig, Score};
use crate::predicates::PredicateSchema;
use crate::replay::ReplaySet;
use crate::tree::gini_splits;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RefineConfig {
    /// Maximum threshold proposals per duplicated condition.
    pub m: usize,
    /// Iteration budget.
    pub budget: usize,
    /// Adjustment rate.
    pub alpha: f64,
    /// Duplicate minimization adopts only strict F1 increases.
    pub strict: bool,
}

impl RefineConfig {
    pub fn min_dup() -> Self {
        RefineConfig {
            m: 5,
            budget: 5,
            alpha: 0.5,
            strict: false,
        }
    }

    pub fn max_f1() -> Self {
        RefineConfig {
            budget: 10,
            ..Self::min_dup()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.m == 0 || self.budget == 0 {
            return Err(Error::InvalidArgument("m and budget must be at least 1".into()));
        }
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(Error::InvalidArgument(format!("alpha must be in (0, 1], got {}", self.alpha)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceEntry {
    pub iteration: usize,
    pub feature: usize,
    pub index: usize,
    pub old: f64,
    pub new: f64,
    pub e_dup: usize,
    pub e_f1: f64,
    pub adopted: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RefineOutcome {
    pub schema: PredicateSchema,
    pub initial: Score,
    pub best: Score,
    pub iterations: usize,
    pub trace: Vec<TraceEntry>,
}

impl RefineOutcome {
    pub fn trace_json(&self) -> Result<String> {
        #[derive(Serialize)]
        struct Out<'a> {
            initial: &'a Score,
            best: &'a Score,
            iterations: usize,
            trace: &'a [TraceEntry],
        }
        let out = Out {
            initial: &self.initial,
            best: &self.best,
            iterations: self.iterations,
            trace: &self.trace,
        };
        Ok(serde_json::to_string_pretty(&out)? + "\n")
    }
}

#[derive(Debug, Clone, Copy)]
struct Move {
    feature: usize,
    index: usize,
    new: f64,
}

struct Evaluated {
    mv: Move,
    schema: PredicateSchema,
    score: Score,
}

fn evaluate(rs: &ReplaySet, base: &PredicateSchema, pcfg: &PipelineConfig, moves: Vec<Move>) -> Result<Vec<Evaluated>> {
    moves
        .into_par_iter()
        .map(|mv| {
            let schema = base.with_threshold(mv.feature, mv.index, mv.new)?;
            let (score, _) = score_schema(rs, &schema, pcfg)?;
            Ok(Evaluated { mv, schema, score })
        })
        .collect()
}

fn trace_of(iteration: usize, base: &PredicateSchema, evals: &[Evaluated], adopted: Option<usize>) -> Vec<TraceEntry> {
    evals
        .iter()
        .enumerate()
        .map(|(i, e)| TraceEntry {
            iteration,
            feature: e.mv.feature,
            index: e.mv.index,
            old: base.thresholds(e.mv.feature)[e.mv.index],
            new: e.mv.new,
            e_dup: e.score.e_dup,
            e_f1: e.score.e_f1,
            adopted: adopted == Some(i),
        })
        .collect()
}

/// Index of the threshold nearest `v` if replacing it keeps the feature's
/// thresholds strictly increasing and actually changes it.
fn replacement_index(t: &[f64], v: f64) -> Option<usize> {
    let i = (0..t.len()).min_by(|&a, &b| (t[a] - v).abs().total_cmp(&(t[b] - v).abs()))?;
    let above_prev = i == 0 || v > t[i - 1];
    let below_next = i + 1 == t.len() || v < t[i + 1];
    (above_prev && below_next && v != t[i]).then_some(i)
}

/// Split proposals for one duplicated condition: one single-feature Gini
/// tree per assigned feature over the records the condition matches,
/// pooled and cut to the `m` highest-gain splits.
fn duplicate_proposals(rs: &ReplaySet, matched: &[usize], features: impl Iterator<Item = usize>, m: usize) -> Vec<(usize, f64)> {
    let mut pooled: Vec<(f64, usize, f64)> = Vec::new();
    for f in features {
        let samples = matched.iter().map(|&i| {
            let r = &rs.records()[i];
            (r.state[f], r.action)
        });
        pooled.extend(gini_splits(samples, m + 1).into_iter().map(|s| (s.gain, f, s.threshold)));
    }
    pooled.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.total_cmp(&b.2)));
    pooled.into_iter().take(m).map(|(_, f, v)| (f, v)).collect()
}

fn better_dup(a: &Score, b: &Score) -> bool {
    a.e_dup < b.e_dup || (a.e_dup == b.e_dup && a.e_f1 > b.e_f1)
}

/// Proposes thresholds that split the records behind each duplicated
/// condition by action, and walks through candidates whose F1 does not
/// drop. Returns the visited schema with the fewest duplicates (ties:
/// higher F1, then earliest).
pub fn minimize_duplicates(rs: &ReplaySet, schema: &PredicateSchema, pcfg: &PipelineConfig, cfg: &RefineConfig) -> Result<RefineOutcome> {
    cfg.validate()?;
    let (initial, mut conds) = score_schema(rs, schema, pcfg)?;
    let mut out = RefineOutcome {
        schema: schema.clone(),
        initial,
        best: initial,
        iterations: 0,
        trace: Vec::new(),
    };
    let mut current = schema.clone();
    let mut cur_score = initial;
    for it in 0..cfg.budget {
        let dups = duplicated_conditions(&conds);
        if dups.is_empty() {
            break;
        }
        out.iterations = it + 1;
        let states = current.discretize_all(rs)?;
        let mut moves: Vec<Move> = Vec::new();
        for dup in &dups {
            let matched: Vec<usize> = (0..states.len()).filter(|&i| dup.matches(&states[i])).collect();
            // The empty condition carries no feature; offer splits on all.
            let features: Vec<usize> = if dup.is_empty() {
                (0..current.len()).collect()
            } else {
                dup.assignments.keys().copied().collect()
            };
            for (f, v) in duplicate_proposals(rs, &matched, features.into_iter(), cfg.m) {
                if let Some(index) = replacement_index(current.thresholds(f), v) {
                    let dupe = moves.iter().any(|m| m.feature == f && m.index == index && m.new == v);
                    if !dupe {
                        moves.push(Move { feature: f, index, new: v });
                    }
                }
            }
        }
        if moves.is_empty() {
            break;
        }
        let evals = evaluate(rs, &current, pcfg, moves)?;
        let pick = evals
            .iter()
            .enumerate()
            .filter(|(_, e)| {
                if cfg.strict {
                    e.score.e_f1 > cur_score.e_f1
                } else {
                    e.score.e_f1 >= cur_score.e_f1
                }
            })
            .min_by(|(_, a), (_, b)| {
                a.score
                    .e_dup
                    .cmp(&b.score.e_dup)
                    .then(b.score.e_f1.total_cmp(&a.score.e_f1))
                    .then(a.mv.feature.cmp(&b.mv.feature))
                    .then(a.mv.index.cmp(&b.mv.index))
                    .then(a.mv.new.total_cmp(&b.mv.new))
            })
            .map(|(i, _)| i);
        out.trace.extend(trace_of(it, &current, &evals, pick));
        let Some(i) = pick else { break };
        let chosen = evals.into_iter().nth(i).expect("picked index exists");
        current = chosen.schema;
        cur_score = chosen.score;
        conds = score_schema(rs, &current, pcfg)?.1;
        if better_dup(&cur_score, &out.best) {
            out.best = cur_score;
            out.schema = current.clone();
        }
    }
    Ok(out)
}

/// Candidate moves for every threshold: one step down and one step up,
/// each `alpha` times the distance to the neighbouring threshold (or the
/// extreme value in the affected band), clipped to keep strict order.
fn f1_moves(rs: &ReplaySet, schema: &PredicateSchema, alpha: f64) -> Vec<Move> {
    let mut moves = Vec::new();
    for f in 0..schema.len() {
        let t = schema.thresholds(f);
        for i in 0..t.len() {
            let prev = i.checked_sub(1).map(|j| t[j]);
            let next = t.get(i + 1).copied();
            let band = rs
                .records()
                .iter()
                .map(|r| r.state[f])
                .filter(|&v| prev.is_none_or(|p| v > p) && next.is_none_or(|n| v <= n));
            let (lo, hi) = band.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
            if lo > hi {
                continue;
            }
            let down_to = prev.unwrap_or(lo);
            let up_to = next.unwrap_or(hi);
            for (dist, sign) in [(t[i] - down_to, -1.0), (up_to - t[i], 1.0)] {
                if dist <= 0.0 {
                    continue;
                }
                let mut new = t[i] + sign * alpha * dist;
                if let Some(p) = prev {
                    if new <= p {
                        new = p.next_up();
                    }
                }
                if let Some(n) = next {
                    if new >= n {
                        new = n.next_down();
                    }
                }
                if new != t[i] && new.is_finite() {
                    moves.push(Move { feature: f, index: i, new });
                }
            }
        }
    }
    moves
}

/// Hill-climbs F1 by moving one threshold per iteration; stops when no move
/// improves F1 strictly. Returns the highest-F1 schema visited.
pub fn maximize_f1(rs: &ReplaySet, schema: &PredicateSchema, pcfg: &PipelineConfig, cfg: &RefineConfig) -> Result<RefineOutcome> {
    cfg.validate()?;
    let (initial, _) = score_schema(rs, schema, pcfg)?;
    let mut out = RefineOutcome {
        schema: schema.clone(),
        initial,
        best: initial,
        iterations: 0,
        trace: Vec::new(),
    };
    if schema.n_cat() < 2 {
        return Ok(out);
    }
    for it in 0..cfg.budget {
        out.iterations = it + 1;
        let moves = f1_moves(rs, &out.schema, cfg.alpha);
        let evals = evaluate(rs, &out.schema, pcfg, moves)?;
        // Moves are generated in (feature, index, down-then-up) order, so
        // the first maximum is the lexicographic tie-break.
        let mut pick: Option<usize> = None;
        for (i, e) in evals.iter().enumerate() {
            let best = pick.map_or(out.best.e_f1, |p| evals[p].score.e_f1);
            if e.score.e_f1 > best {
                pick = Some(i);
            }
        }
        out.trace.extend(trace_of(it, &out.schema, &evals, pick));
        let Some(i) = pick else { break };
        let chosen = evals.into_iter().nth(i).expect("picked index exists");
        out.schema = chosen.schema;
        out.best = chosen.score;
    }
    Ok(out)
}
