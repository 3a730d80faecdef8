//! Replay transitions: the single data source for summarization, rule
//! extraction and fidelity evaluation.
//!
//! On disk a replay is a flat table
//! `replay(episode, step, f_<name>..., action, reward, done, truncated)`
//! stored as SQLite, CSV or JSON lines. Feature values are raw units; names,
//! units, normalization bounds and action names live in a `schema.json`
//! sidecar.

use std::collections::{BTreeMap, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use rusqlite::{params_from_iter, Connection};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::query::ValidatedSelect;

pub const TABLE: &str = "replay";
pub const FEATURE_PREFIX: &str = "f_";
const FIXED_COLUMNS: [&str; 6] = ["episode", "step", "action", "reward", "done", "truncated"];
const REQUIRED_COLUMNS: [&str; 5] = ["episode", "step", "action", "reward", "done"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Feature {
    pub name: String,
    #[serde(default)]
    pub unit: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub min: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max: Option<f64>,
}

impl Feature {
    pub fn new(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            unit: String::new(),
            min: None,
            max: None,
        }
    }

    pub fn with_bounds(mut self, min: f64, max: f64) -> Self {
        self.min = Some(min);
        self.max = Some(max);
        self
    }

    pub fn with_unit(mut self, unit: impl Into<String>) -> Self {
        self.unit = unit.into();
        self
    }

    pub fn column(&self) -> String {
        format!("{FEATURE_PREFIX}{}", self.name)
    }
}

/// Ordered feature identifiers with optional units and bounds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSchema {
    features: Vec<Feature>,
}

impl FeatureSchema {
    pub fn new(features: Vec<Feature>) -> Result<Self> {
        let mut seen = HashSet::new();
        for f in &features {
            if f.name.is_empty() {
                return Err(Error::Schema("feature name is empty".into()));
            }
            if !f.name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_') {
                return Err(Error::Schema(format!(
                    "feature name '{}' must be alphanumeric/underscore",
                    f.name
                )));
            }
            if FIXED_COLUMNS.contains(&f.name.as_str()) {
                return Err(Error::Schema(format!("feature name '{}' is reserved", f.name)));
            }
            if !seen.insert(f.name.as_str()) {
                return Err(Error::Schema(format!("duplicate feature name '{}'", f.name)));
            }
            match (f.min, f.max) {
                (Some(lo), Some(hi)) if !(lo < hi) => {
                    return Err(Error::Schema(format!(
                        "feature '{}' bounds must satisfy min < max (got {lo}, {hi})",
                        f.name
                    )))
                }
                (Some(_), None) | (None, Some(_)) => {
                    return Err(Error::Schema(format!(
                        "feature '{}' needs both min and max",
                        f.name
                    )))
                }
                _ => {}
            }
        }
        Ok(Self { features })
    }

    pub fn from_names<S: AsRef<str>>(names: &[S]) -> Result<Self> {
        Self::new(names.iter().map(|n| Feature::new(n.as_ref())).collect())
    }

    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    pub fn features(&self) -> &[Feature] {
        &self.features
    }

    pub fn names(&self) -> Vec<&str> {
        self.features.iter().map(|f| f.name.as_str()).collect()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.features.iter().position(|f| f.name == name)
    }

    /// Resolves either a bare feature name or its `f_`-prefixed column name.
    pub fn resolve_column(&self, column: &str) -> Option<usize> {
        self.index_of(column).or_else(|| {
            column
                .strip_prefix(FEATURE_PREFIX)
                .and_then(|bare| self.index_of(bare))
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplayRecord {
    pub episode: u64,
    pub step: u64,
    pub state: Vec<f64>,
    pub action: usize,
    pub reward: f64,
    /// Episode ended on this transition (termination or truncation).
    pub done: bool,
    /// Episode ended because of the time limit.
    pub truncated: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReplaySet {
    schema: FeatureSchema,
    records: Vec<ReplayRecord>,
    action_names: Vec<String>,
}

/// Contents of the `schema.json` sidecar.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchemaFile {
    pub features: Vec<Feature>,
    pub actions: Vec<String>,
}

impl SchemaFile {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        if !path.exists() {
            return Err(Error::NotFound(path.to_path_buf()));
        }
        Ok(serde_json::from_reader(BufReader::new(File::open(path)?))?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        serde_json::to_writer_pretty(&mut w, self)?;
        writeln!(w)?;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Db,
    Csv,
    Jsonl,
}

impl Format {
    pub fn from_path(path: &Path) -> Option<Self> {
        match path.extension()?.to_str()?.to_ascii_lowercase().as_str() {
            "db" | "sqlite" | "sqlite3" => Some(Format::Db),
            "csv" => Some(Format::Csv),
            "jsonl" | "ndjson" => Some(Format::Jsonl),
            _ => None,
        }
    }
}

impl FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "db" | "sqlite" => Ok(Format::Db),
            "csv" => Ok(Format::Csv),
            "jsonl" => Ok(Format::Jsonl),
            other => Err(Error::InvalidArgument(format!(
                "unknown replay format '{other}' (expected db, csv or jsonl)"
            ))),
        }
    }
}

impl ReplaySet {
    /// Builds a replay set, checking record shape and action ids and
    /// normalizing order to `(episode, step)`.
    pub fn new(
        schema: FeatureSchema,
        mut records: Vec<ReplayRecord>,
        action_names: Vec<String>,
    ) -> Result<Self> {
        for (i, r) in records.iter().enumerate() {
            if r.state.len() != schema.len() {
                return Err(Error::Schema(format!(
                    "record {i} has {} feature values, schema has {}",
                    r.state.len(),
                    schema.len()
                )));
            }
            if r.action >= action_names.len() {
                return Err(Error::InvalidAction {
                    action: r.action,
                    n_actions: action_names.len(),
                });
            }
        }
        records.sort_by_key(|r| (r.episode, r.step));
        for pair in records.windows(2) {
            if (pair[0].episode, pair[0].step) == (pair[1].episode, pair[1].step) {
                return Err(Error::Integrity(format!(
                    "duplicate (episode, step) = ({}, {})",
                    pair[0].episode, pair[0].step
                )));
            }
        }
        Ok(Self {
            schema,
            records,
            action_names,
        })
    }

    /// Checks that every episode's steps run 0, 1, 2, ... without gaps.
    pub fn check_episodes(&self) -> Result<()> {
        let mut expected: Option<(u64, u64)> = None;
        for r in &self.records {
            let next = match expected {
                Some((ep, step)) if ep == r.episode => step,
                _ => 0,
            };
            if r.step != next {
                return Err(Error::Integrity(format!(
                    "episode {} has step {} where {} was expected",
                    r.episode, r.step, next
                )));
            }
            expected = Some((r.episode, r.step + 1));
        }
        Ok(())
    }

    pub fn schema(&self) -> &FeatureSchema {
        &self.schema
    }

    pub fn records(&self) -> &[ReplayRecord] {
        &self.records
    }

    pub fn action_names(&self) -> &[String] {
        &self.action_names
    }

    pub fn n_actions(&self) -> usize {
        self.action_names.len()
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn states(&self) -> impl Iterator<Item = &[f64]> {
        self.records.iter().map(|r| r.state.as_slice())
    }

    pub fn actions(&self) -> Vec<usize> {
        self.records.iter().map(|r| r.action).collect()
    }

    pub fn action_id(&self, name: &str) -> Option<usize> {
        self.action_names
            .iter()
            .position(|a| a.eq_ignore_ascii_case(name))
    }

    pub fn sidecar(&self) -> SchemaFile {
        SchemaFile {
            features: self.schema.features.clone(),
            actions: self.action_names.clone(),
        }
    }

    /// Keeps the records for which `keep` returns true; schema unchanged.
    pub fn retain_by(&self, mut keep: impl FnMut(&ReplayRecord) -> bool) -> ReplaySet {
        ReplaySet {
            schema: self.schema.clone(),
            records: self.records.iter().filter(|r| keep(r)).cloned().collect(),
            action_names: self.action_names.clone(),
        }
    }

    /// Records matching a validated SELECT statement.
    pub fn filter(&self, query: &ValidatedSelect) -> ReplaySet {
        self.retain_by(|r| query.matches(r))
    }

    pub fn only_action(&self, action: usize) -> ReplaySet {
        self.retain_by(|r| r.action == action)
    }

    pub fn write(&self, path: impl AsRef<Path>, format: Format) -> Result<()> {
        let path = path.as_ref();
        match format {
            Format::Db => self.write_db(path),
            Format::Csv => self.write_csv(path),
            Format::Jsonl => self.write_jsonl(path),
        }
    }

    fn columns(&self) -> Vec<String> {
        let mut cols = vec!["episode".to_string(), "step".to_string()];
        cols.extend(self.schema.features.iter().map(Feature::column));
        cols.extend(["action", "reward", "done", "truncated"].map(String::from));
        cols
    }

    fn write_db(&self, path: &Path) -> Result<()> {
        if path.exists() {
            std::fs::remove_file(path)?;
        }
        let mut conn = Connection::open(path)?;
        let feature_cols: String = self
            .schema
            .features
            .iter()
            .map(|f| format!("{} REAL NOT NULL, ", f.column()))
            .collect();
        conn.execute_batch(&format!(
            "CREATE TABLE {TABLE} (episode INTEGER NOT NULL, step INTEGER NOT NULL, \
             {feature_cols}action INTEGER NOT NULL, reward REAL NOT NULL, \
             done INTEGER NOT NULL, truncated INTEGER NOT NULL DEFAULT 0, \
             PRIMARY KEY (episode, step));"
        ))?;
        let cols = self.columns();
        let placeholders = vec!["?"; cols.len()].join(", ");
        let sql = format!(
            "INSERT INTO {TABLE} ({}) VALUES ({placeholders})",
            cols.join(", ")
        );
        let tx = conn.transaction()?;
        {
            let mut stmt = tx.prepare(&sql)?;
            for r in &self.records {
                let mut row: Vec<rusqlite::types::Value> =
                    vec![(r.episode as i64).into(), (r.step as i64).into()];
                row.extend(r.state.iter().map(|&v| v.into()));
                row.push((r.action as i64).into());
                row.push(r.reward.into());
                row.push((r.done as i64).into());
                row.push((r.truncated as i64).into());
                stmt.execute(params_from_iter(row))?;
            }
        }
        tx.commit()?;
        Ok(())
    }

    fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(self.columns())?;
        for r in &self.records {
            let mut row = vec![r.episode.to_string(), r.step.to_string()];
            row.extend(r.state.iter().map(|v| v.to_string()));
            row.push(r.action.to_string());
            row.push(r.reward.to_string());
            row.push((r.done as u8).to_string());
            row.push((r.truncated as u8).to_string());
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }

    fn write_jsonl(&self, path: &Path) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        for r in &self.records {
            let mut obj = serde_json::Map::new();
            obj.insert("episode".into(), r.episode.into());
            obj.insert("step".into(), r.step.into());
            for (f, v) in self.schema.features.iter().zip(&r.state) {
                obj.insert(f.column(), (*v).into());
            }
            obj.insert("action".into(), r.action.into());
            obj.insert("reward".into(), r.reward.into());
            obj.insert("done".into(), (r.done as u8).into());
            obj.insert("truncated".into(), (r.truncated as u8).into());
            serde_json::to_writer(&mut w, &obj)?;
            writeln!(w)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Reads a replay file. Without a sidecar, every column other than the fixed
/// ones is a feature (an `f_` prefix is stripped) and actions are named
/// `a0`, `a1`, ... up to the largest id seen.
pub fn ingest(path: impl AsRef<Path>, format: Format, sidecar: Option<&SchemaFile>) -> Result<ReplaySet> {
    let path = path.as_ref();
    if !path.exists() {
        return Err(Error::NotFound(path.to_path_buf()));
    }
    let table = match format {
        Format::Db => read_db(path)?,
        Format::Csv => read_csv(path)?,
        Format::Jsonl => read_jsonl(path)?,
    };
    table.into_replay(sidecar)
}

/// Column-oriented intermediate shared by the three readers.
struct RawTable {
    columns: Vec<String>,
    rows: Vec<Vec<Cell>>,
}

enum Cell {
    Num(f64),
    Text(String),
    Missing,
}

impl Cell {
    fn number(&self) -> Option<f64> {
        match self {
            Cell::Num(v) => Some(*v),
            Cell::Text(s) => s.trim().parse().ok(),
            Cell::Missing => None,
        }
    }
}

impl RawTable {
    fn into_replay(self, sidecar: Option<&SchemaFile>) -> Result<ReplaySet> {
        let position = |name: &str| self.columns.iter().position(|c| c == name);
        for req in REQUIRED_COLUMNS {
            if position(req).is_none() {
                return Err(Error::Schema(format!("missing column '{req}'")));
            }
        }
        let features: Vec<Feature> = match sidecar {
            Some(sc) => sc.features.clone(),
            None => self
                .columns
                .iter()
                .filter(|c| !FIXED_COLUMNS.contains(&c.as_str()))
                .map(|c| Feature::new(c.strip_prefix(FEATURE_PREFIX).unwrap_or(c)))
                .collect(),
        };
        let schema = FeatureSchema::new(features)?;
        let mut feature_idx = Vec::with_capacity(schema.len());
        for f in schema.features() {
            let col = f.column();
            let idx = position(&col)
                .or_else(|| position(&f.name))
                .ok_or_else(|| Error::Schema(format!("missing column '{col}'")))?;
            feature_idx.push((idx, f.name.clone()));
        }
        let col = |name: &str| position(name).expect("checked above");
        let (ep_i, st_i, ac_i, rw_i, dn_i) = (
            col("episode"),
            col("step"),
            col("action"),
            col("reward"),
            col("done"),
        );
        let tr_i = position("truncated");

        let mut records = Vec::with_capacity(self.rows.len());
        for (row_idx, row) in self.rows.iter().enumerate() {
            let num = |i: usize, name: &str| -> Result<f64> {
                row.get(i).and_then(Cell::number).ok_or_else(|| Error::Parse {
                    row: row_idx,
                    msg: format!("column '{name}' is not numeric"),
                })
            };
            let uint = |i: usize, name: &str| -> Result<u64> {
                let v = num(i, name)?;
                if v < 0.0 || v.fract() != 0.0 || !v.is_finite() {
                    return Err(Error::Parse {
                        row: row_idx,
                        msg: format!("column '{name}' must be a non-negative integer, got {v}"),
                    });
                }
                Ok(v as u64)
            };
            let flag = |i: usize, name: &str| -> Result<bool> {
                match uint(i, name)? {
                    0 => Ok(false),
                    1 => Ok(true),
                    v => Err(Error::Parse {
                        row: row_idx,
                        msg: format!("column '{name}' must be 0 or 1, got {v}"),
                    }),
                }
            };
            let mut state = Vec::with_capacity(feature_idx.len());
            for (i, name) in &feature_idx {
                state.push(num(*i, name)?);
            }
            records.push(ReplayRecord {
                episode: uint(ep_i, "episode")?,
                step: uint(st_i, "step")?,
                state,
                action: uint(ac_i, "action")? as usize,
                reward: num(rw_i, "reward")?,
                done: flag(dn_i, "done")?,
                truncated: match tr_i {
                    Some(i) => flag(i, "truncated")?,
                    None => false,
                },
            });
        }

        let action_names = match sidecar {
            Some(sc) => sc.actions.clone(),
            None => {
                let n = records.iter().map(|r| r.action + 1).max().unwrap_or(0);
                (0..n).map(|a| format!("a{a}")).collect()
            }
        };
        let rs = ReplaySet::new(schema, records, action_names)?;
        rs.check_episodes()?;
        Ok(rs)
    }
}

fn read_db(path: &Path) -> Result<RawTable> {
    let conn = Connection::open_with_flags(path, rusqlite::OpenFlags::SQLITE_OPEN_READ_ONLY)?;
    let mut info = conn.prepare(&format!("PRAGMA table_info({TABLE})"))?;
    let columns: Vec<String> = info
        .query_map([], |row| row.get::<_, String>(1))?
        .collect::<std::result::Result<_, _>>()?;
    if columns.is_empty() {
        return Err(Error::Schema(format!("table '{TABLE}' not found")));
    }
    let quoted: Vec<String> = columns.iter().map(|c| format!("\"{c}\"")).collect();
    let mut stmt = conn.prepare(&format!("SELECT {} FROM {TABLE}", quoted.join(", ")))?;
    let n = columns.len();
    let rows = stmt
        .query_map([], |row| {
            (0..n)
                .map(|i| {
                    use rusqlite::types::ValueRef;
                    Ok(match row.get_ref(i)? {
                        ValueRef::Integer(v) => Cell::Num(v as f64),
                        ValueRef::Real(v) => Cell::Num(v),
                        ValueRef::Text(t) => Cell::Text(String::from_utf8_lossy(t).into_owned()),
                        ValueRef::Null | ValueRef::Blob(_) => Cell::Missing,
                    })
                })
                .collect::<rusqlite::Result<Vec<Cell>>>()
        })?
        .collect::<rusqlite::Result<Vec<_>>>()?;
    Ok(RawTable { columns, rows })
}

fn read_csv(path: &Path) -> Result<RawTable> {
    let mut reader = csv::Reader::from_path(path)?;
    let columns: Vec<String> = reader.headers()?.iter().map(|h| h.trim().to_string()).collect();
    let mut rows = Vec::new();
    for rec in reader.records() {
        let rec = rec?;
        rows.push(rec.iter().map(|s| Cell::Text(s.to_string())).collect());
    }
    Ok(RawTable { columns, rows })
}

fn read_jsonl(path: &Path) -> Result<RawTable> {
    let reader = BufReader::new(File::open(path)?);
    let mut columns: Vec<String> = Vec::new();
    let mut objects = Vec::new();
    for (row, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let obj: BTreeMap<String, serde_json::Value> =
            serde_json::from_str(&line).map_err(|e| Error::Parse {
                row,
                msg: e.to_string(),
            })?;
        if columns.is_empty() {
            // Keys come back sorted; a sidecar fixes the feature order.
            columns = obj.keys().cloned().collect();
        }
        objects.push(obj);
    }
    let rows = objects
        .into_iter()
        .map(|obj| {
            columns
                .iter()
                .map(|c| match obj.get(c) {
                    Some(serde_json::Value::Number(n)) => n.as_f64().map_or(Cell::Missing, Cell::Num),
                    Some(serde_json::Value::Bool(b)) => Cell::Num(*b as u8 as f64),
                    Some(serde_json::Value::String(s)) => Cell::Text(s.clone()),
                    _ => Cell::Missing,
                })
                .collect()
        })
        .collect();
    Ok(RawTable { columns, rows })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy() -> ReplaySet {
        let schema = FeatureSchema::from_names(&["position", "velocity"]).unwrap();
        let records = (0..3)
            .map(|i| ReplayRecord {
                episode: 0,
                step: i,
                state: vec![-0.5 + 0.1 * i as f64, 0.001 * i as f64],
                action: (i % 3) as usize,
                reward: -1.0,
                done: i == 2,
                truncated: false,
            })
            .collect();
        ReplaySet::new(schema, records, vec!["left".into(), "none".into(), "right".into()]).unwrap()
    }

    #[test]
    fn csv_three_rows_two_features() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("r.csv");
        std::fs::write(
            &path,
            "episode,step,position,velocity,action,reward,done\n\
             0,0,-0.5,0.0,1,-1,0\n0,1,-0.49,0.01,2,-1,0\n0,2,-0.48,0.01,2,-1,1\n",
        )
        .unwrap();
        let rs = ingest(&path, Format::Csv, None).unwrap();
        assert_eq!(rs.len(), 3);
        assert!(rs.records().iter().all(|r| r.state.len() == 2));
        assert_eq!(rs.schema().names(), vec!["position", "velocity"]);
        assert_eq!(rs.n_actions(), 3);
    }

    #[test]
    fn missing_column_is_named() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("r.csv");
        std::fs::write(&path, "episode,step,x,action,done\n0,0,1.0,0,1\n").unwrap();
        let err = ingest(&path, Format::Csv, None).unwrap_err();
        assert!(err.to_string().contains("'reward'"), "{err}");
    }

    #[test]
    fn non_numeric_cell_reports_row() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("r.csv");
        std::fs::write(
            &path,
            "episode,step,x,action,reward,done\n0,0,1.0,0,0,0\n0,1,abc,0,0,1\n",
        )
        .unwrap();
        match ingest(&path, Format::Csv, None).unwrap_err() {
            Error::Parse { row, .. } => assert_eq!(row, 1),
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn duplicate_episode_step_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("r.csv");
        std::fs::write(
            &path,
            "episode,step,x,action,reward,done\n0,0,1.0,0,0,0\n0,0,2.0,0,0,1\n",
        )
        .unwrap();
        assert!(matches!(
            ingest(&path, Format::Csv, None),
            Err(Error::Integrity(_))
        ));
    }

    #[test]
    fn empty_db_table_is_valid() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("e.db");
        let schema = FeatureSchema::from_names(&["x"]).unwrap();
        let rs = ReplaySet::new(schema, vec![], vec!["a".into()]).unwrap();
        rs.write(&path, Format::Db).unwrap();
        let back = ingest(&path, Format::Db, Some(&rs.sidecar())).unwrap();
        assert!(back.is_empty());
    }

    #[test]
    fn round_trip_all_formats() {
        let rs = toy();
        let dir = tempfile::tempdir().unwrap();
        for (name, fmt) in [("r.db", Format::Db), ("r.csv", Format::Csv), ("r.jsonl", Format::Jsonl)] {
            let path = dir.path().join(name);
            rs.write(&path, fmt).unwrap();
            let back = ingest(&path, fmt, Some(&rs.sidecar())).unwrap();
            assert_eq!(back, rs, "{name}");
        }
    }

    #[test]
    fn rows_are_sorted_on_ingest() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("r.csv");
        std::fs::write(
            &path,
            "episode,step,x,action,reward,done\n1,0,3.0,0,0,1\n0,1,2.0,0,0,1\n0,0,1.0,0,0,0\n",
        )
        .unwrap();
        let rs = ingest(&path, Format::Csv, None).unwrap();
        let order: Vec<_> = rs.records().iter().map(|r| (r.episode, r.step)).collect();
        assert_eq!(order, vec![(0, 0), (0, 1), (1, 0)]);
    }

    #[test]
    fn bounds_must_be_ordered() {
        let bad = FeatureSchema::new(vec![Feature::new("x").with_bounds(1.0, 1.0)]);
        assert!(bad.is_err());
        assert!(FeatureSchema::from_names(&["x", "x"]).is_err());
        assert!(FeatureSchema::from_names(&[""]).is_err());
    }
}
