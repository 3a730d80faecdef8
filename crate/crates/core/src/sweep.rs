//! Parameter grids: inclusion threshold, level count, weighting function
//! and predicate source, each varied around a base configuration.

use std::fmt;
use std::fmt::Write as _;
use std::str::FromStr;

use rayon::prelude::*;
use serde::Serialize;

use crate::envs::EnvKind;
use crate::error::{Error, Result};
use crate::eval::{EvalReport, TABLE_COLUMNS};
use crate::pipeline::{run_pipeline, LimitSource, PipelineConfig};
use crate::replay::ReplaySet;
use crate::rules::{check_weight_identities, WeightCheck, WeightKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Grid {
    Theta,
    Ncat,
    Weights,
    Predicates,
}

impl Grid {
    pub const ALL: [Grid; 4] = [Grid::Theta, Grid::Ncat, Grid::Weights, Grid::Predicates];

    /// Labelled configurations of this grid, in table order.
    pub fn cells(self, base: &PipelineConfig) -> Vec<(String, PipelineConfig)> {
        match self {
            Grid::Theta => (1..=10)
                .map(|i| {
                    let theta = i as f64 / 10.0;
                    (format!("theta={theta:.1}"), PipelineConfig { theta, ..*base })
                })
                .collect(),
            Grid::Ncat => (2..=7)
                .map(|n_cat| (format!("ncat={n_cat}"), PipelineConfig { n_cat, ..*base }))
                .collect(),
            Grid::Weights => WeightKind::ALL
                .iter()
                .map(|&weights| (weights.to_string(), PipelineConfig { weights, ..*base }))
                .collect(),
            Grid::Predicates => [LimitSource::Gini, LimitSource::Median]
                .iter()
                .map(|&source| (source.to_string(), PipelineConfig { source, ..*base }))
                .collect(),
        }
    }
}

impl fmt::Display for Grid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Grid::Theta => "theta",
            Grid::Ncat => "ncat",
            Grid::Weights => "weights",
            Grid::Predicates => "predicates",
        })
    }
}

impl FromStr for Grid {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "theta" => Ok(Grid::Theta),
            "ncat" | "levels" => Ok(Grid::Ncat),
            "weights" | "weight" => Ok(Grid::Weights),
            "predicates" | "source" => Ok(Grid::Predicates),
            _ => Err(Error::InvalidArgument(format!(
                "unknown grid '{s}' (expected theta, ncat, weights or predicates)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub label: String,
    pub config: PipelineConfig,
    pub report: Option<EvalReport>,
    pub weights: Option<WeightCheck>,
    pub error: Option<String>,
}

/// Runs every cell of `grid` in parallel; rows come back in grid order. A
/// failing cell is reported in its row rather than aborting the sweep.
pub fn run_sweep(rs: &ReplaySet, grid: Grid, base: &PipelineConfig, env: Option<EnvKind>) -> Vec<SweepRow> {
    grid.cells(base)
        .into_par_iter()
        .map(|(label, config)| {
            let outcome = run_pipeline(rs, &config, env).and_then(|out| {
                let states = out.schema.discretize_all(rs)?;
                let check = check_weight_identities(&out.rules, &states, &rs.actions(), rs.n_actions());
                Ok((out.report, check))
            });
            match outcome {
                Ok((report, check)) => SweepRow {
                    label,
                    config,
                    report: Some(report),
                    weights: Some(check),
                    error: None,
                },
                Err(e) => SweepRow {
                    label,
                    config,
                    report: None,
                    weights: None,
                    error: Some(e.to_string()),
                },
            }
        })
        .collect()
}

/// Fixed-width table of a sweep; failed cells show their error.
pub fn format_sweep(rows: &[SweepRow]) -> String {
    let ok: Vec<(String, &EvalReport)> = rows
        .iter()
        .filter_map(|r| r.report.as_ref().map(|rep| (r.label.clone(), rep)))
        .collect();
    let mut out = if ok.is_empty() {
        let mut header = "config".to_string();
        for c in TABLE_COLUMNS {
            let _ = write!(header, " {c:>9}");
        }
        header + "\n"
    } else {
        crate::eval::format_table(&ok)
    };
    for r in rows.iter().filter(|r| r.report.is_none()) {
        let _ = writeln!(out, "{}: {}", r.label, r.error.as_deref().unwrap_or("failed"));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grids_match_paper_ranges() {
        let base = PipelineConfig::default();
        let theta = Grid::Theta.cells(&base);
        assert_eq!(theta.len(), 10);
        assert_eq!(theta[0].1.theta, 0.1);
        assert_eq!(theta[9].1.theta, 1.0);
        let ncat: Vec<usize> = Grid::Ncat.cells(&base).iter().map(|c| c.1.n_cat).collect();
        assert_eq!(ncat, vec![2, 3, 4, 5, 6, 7]);
        assert_eq!(Grid::Weights.cells(&base).len(), 4);
        assert_eq!(Grid::Predicates.cells(&base)[1].0, "median");
        assert_eq!("NCAT".parse::<Grid>().unwrap(), Grid::Ncat);
    }
}
