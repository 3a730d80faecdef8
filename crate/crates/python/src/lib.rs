//! Python bindings: replay loading, the explanation pipeline, rules,
//! APE and the query layer.
//!
//! Structured results (reports, summaries, traces) cross over as plain
//! dicts and lists built from their JSON form.

use pyo3::create_exception;
use pyo3::exceptions::PyException;
use pyo3::prelude::*;
use serde::Serialize;

use xrl_explain::ape::ape_explain_all;
use xrl_explain::envs::EnvKind;
use xrl_explain::pipeline::{build_schema, run_pipeline, run_with_schema, summarize_per_action, LimitSource, PipelineConfig, RunOutput, EVAL_SEEDS};
use xrl_explain::predicates::PredicateSchema;
use xrl_explain::query::{parse_query, to_sql, validate_sql, QueryContext, ValidatedSelect};
use xrl_explain::refine::{maximize_f1, minimize_duplicates, RefineConfig};
use xrl_explain::replay::{ingest, Format, ReplaySet, SchemaFile};
use xrl_explain::rules::{RuleSet, WeightKind};
use xrl_explain::sweep::{format_sweep, run_sweep, Grid};
use xrl_explain::text::render_explanation;
use xrl_explain::trainer::{collect_replay, evaluate_returns, train_tabular_q, TabularPolicy, TrainConfig};
use xrl_explain::Error;

create_exception!(xrl_explain_py, XrlError, PyException, "Error raised by the explanation toolkit.");

fn err(e: Error) -> PyErr {
    XrlError::new_err(format!("[{}] {e}", e.kind()))
}

fn parse<T: std::str::FromStr<Err = Error>>(s: &str) -> PyResult<T> {
    s.parse().map_err(err)
}

fn to_py(py: Python<'_>, value: &impl Serialize) -> PyResult<Py<PyAny>> {
    let text = serde_json::to_string(value).map_err(|e| err(e.into()))?;
    Ok(py.import("json")?.call_method1("loads", (text,))?.unbind())
}

fn config(n_cat: usize, theta: f64, weights: &str, source: &str, k_max: usize, seed: u64) -> PyResult<PipelineConfig> {
    Ok(PipelineConfig {
        n_cat,
        theta,
        k_max,
        seed,
        weights: parse(weights)?,
        source: parse(source)?,
    })
}

/// Greedy tabular Q-learning policy.
#[pyclass(name = "Policy", frozen)]
struct Policy(TabularPolicy);

#[pymethods]
impl Policy {
    /// Train on "mountaincar" or "cartpole" with the default schedule.
    #[staticmethod]
    #[pyo3(signature = (env, episodes=None, seed=0))]
    fn train(env: &str, episodes: Option<usize>, seed: u64) -> PyResult<Self> {
        let kind: EnvKind = parse(env)?;
        let mut cfg = TrainConfig::for_env(kind);
        cfg.seed = seed;
        if let Some(n) = episodes {
            cfg.episodes = n;
        }
        let (policy, _) = train_tabular_q(kind, &cfg).map_err(err)?;
        Ok(Policy(policy))
    }

    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        TabularPolicy::load(path).map(Policy).map_err(err)
    }

    fn save(&self, path: &str) -> PyResult<()> {
        self.0.save(path).map_err(err)
    }

    #[getter]
    fn env(&self) -> String {
        self.0.env().to_string()
    }

    fn act(&self, state: Vec<f64>) -> PyResult<usize> {
        if state.len() != self.0.env().n_features() {
            return Err(err(Error::InvalidArgument(format!(
                "expected {} features, got {}",
                self.0.env().n_features(),
                state.len()
            ))));
        }
        Ok(self.0.act(&state))
    }

    /// Returns of the greedy policy, one episode per seed (default 0..9).
    #[pyo3(signature = (seeds=None))]
    fn evaluate(&self, seeds: Option<Vec<u64>>) -> PyResult<Vec<f64>> {
        let seeds = seeds.unwrap_or_else(|| EVAL_SEEDS.to_vec());
        evaluate_returns(self.0.env(), |s| Ok(self.0.act(s)), seeds).map_err(err)
    }

    /// Roll out whole episodes until at least `steps` transitions are logged.
    #[pyo3(signature = (steps=10_000))]
    fn collect(&self, steps: usize) -> PyResult<Replay> {
        collect_replay(self.0.env(), |s| Ok(self.0.act(s)), steps).map(Replay).map_err(err)
    }
}

/// Logged transitions with their feature and action names.
#[pyclass(name = "Replay", frozen)]
struct Replay(ReplaySet);

impl Replay {
    fn select(&self, question: &str, predicates: Option<&Predicates>) -> PyResult<ValidatedSelect> {
        let ctx = QueryContext {
            features: self.0.schema(),
            actions: self.0.action_names(),
            predicates: predicates.map(|p| &p.0),
        };
        let ast = parse_query(question, ctx).map_err(err)?;
        validate_sql(&to_sql(&ast, self.0.schema()), self.0.schema()).map_err(err)
    }
}

#[pymethods]
impl Replay {
    /// Load a .db, .csv or .jsonl replay, optionally with its schema.json sidecar.
    #[staticmethod]
    #[pyo3(signature = (path, schema=None))]
    fn load(path: &str, schema: Option<&str>) -> PyResult<Self> {
        let format = Format::from_path(path.as_ref())
            .ok_or_else(|| err(Error::InvalidArgument(format!("cannot tell the format of {path}"))))?;
        let sidecar = schema.map(SchemaFile::load).transpose().map_err(err)?;
        ingest(path, format, sidecar.as_ref()).map(Replay).map_err(err)
    }

    fn save(&self, path: &str) -> PyResult<()> {
        let format = Format::from_path(path.as_ref())
            .ok_or_else(|| err(Error::InvalidArgument(format!("cannot tell the format of {path}"))))?;
        self.0.write(path, format).map_err(err)
    }

    fn save_schema(&self, path: &str) -> PyResult<()> {
        self.0.sidecar().save(path).map_err(err)
    }

    fn __len__(&self) -> usize {
        self.0.len()
    }

    #[getter]
    fn feature_names(&self) -> Vec<String> {
        self.0.schema().names().into_iter().map(String::from).collect()
    }

    #[getter]
    fn action_names(&self) -> Vec<String> {
        self.0.action_names().to_vec()
    }

    fn states(&self) -> Vec<Vec<f64>> {
        self.0.states().map(<[f64]>::to_vec).collect()
    }

    fn actions(&self) -> Vec<usize> {
        self.0.actions()
    }

    /// SQL for a structured question.
    #[pyo3(signature = (question, predicates=None))]
    fn sql(&self, question: &str, predicates: Option<PyRef<'_, Predicates>>) -> PyResult<String> {
        Ok(self.select(question, predicates.as_deref())?.sql().to_string())
    }

    /// Records matching a structured question.
    #[pyo3(signature = (question, predicates=None))]
    fn query(&self, question: &str, predicates: Option<PyRef<'_, Predicates>>) -> PyResult<Replay> {
        Ok(Replay(self.0.filter(&self.select(question, predicates.as_deref())?)))
    }

    /// Records matching a SELECT statement; anything else is rejected.
    fn filter_sql(&self, sql: &str) -> PyResult<Replay> {
        let stmt = validate_sql(sql, self.0.schema()).map_err(err)?;
        Ok(Replay(self.0.filter(&stmt)))
    }
}

/// Per-feature thresholds and level labels.
#[pyclass(name = "Predicates", frozen)]
struct Predicates(PredicateSchema);

#[pymethods]
impl Predicates {
    /// Thresholds generated from the replay ("gini" or "median").
    #[staticmethod]
    #[pyo3(signature = (replay, n_cat=6, source="gini"))]
    fn build(replay: &Replay, n_cat: usize, source: &str) -> PyResult<Self> {
        let cfg = PipelineConfig {
            n_cat,
            source: parse::<LimitSource>(source)?,
            ..PipelineConfig::default()
        };
        build_schema(&replay.0, &cfg).map(Predicates).map_err(err)
    }

    #[staticmethod]
    fn from_thresholds(names: Vec<String>, thresholds: Vec<Vec<f64>>) -> PyResult<Self> {
        let names: Vec<&str> = names.iter().map(String::as_str).collect();
        PredicateSchema::from_thresholds(&names, thresholds).map(Predicates).map_err(err)
    }

    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        PredicateSchema::load(path).map(Predicates).map_err(err)
    }

    fn save(&self, path: &str) -> PyResult<()> {
        self.0.save(path).map_err(err)
    }

    #[getter]
    fn n_cat(&self) -> usize {
        self.0.n_cat()
    }

    fn thresholds(&self, feature: usize) -> PyResult<Vec<f64>> {
        if feature >= self.0.len() {
            return Err(err(Error::InvalidArgument(format!("feature {feature} out of range"))));
        }
        Ok(self.0.thresholds(feature).to_vec())
    }

    fn discretize(&self, state: Vec<f64>) -> PyResult<Vec<u16>> {
        self.0.discretize(&state).map(|d| d.0).map_err(err)
    }

    fn to_dict(&self, py: Python<'_>) -> PyResult<Py<PyAny>> {
        to_py(py, &self.0)
    }
}

/// Weighted (condition, action) rules.
#[pyclass(name = "RuleSet", frozen)]
struct Rules(RuleSet);

#[pymethods]
impl Rules {
    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        RuleSet::load(path).map(Rules).map_err(err)
    }

    fn save(&self, path: &str) -> PyResult<()> {
        self.0.save(path).map_err(err)
    }

    fn __len__(&self) -> usize {
        self.0.rules.len()
    }

    /// `(action or None, provenance dict)` for a raw state.
    fn select_action(&self, py: Python<'_>, predicates: &Predicates, state: Vec<f64>) -> PyResult<(Option<usize>, Py<PyAny>)> {
        let (action, provenance) = self.0.select_action(&predicates.0, &state).map_err(err)?;
        Ok((action, to_py(py, &provenance)?))
    }

    fn to_json(&self) -> PyResult<String> {
        self.0.to_json().map_err(err)
    }

    fn to_dict(&self, py: Python<'_>) -> PyResult<Py<PyAny>> {
        to_py(py, &self.0)
    }
}

/// Output of one pipeline run.
#[pyclass(name = "PipelineResult", frozen)]
struct PipelineResult {
    out: RunOutput,
    action_names: Vec<String>,
}

#[pymethods]
impl PipelineResult {
    #[getter]
    fn rules(&self) -> Rules {
        Rules(self.out.rules.clone())
    }

    #[getter]
    fn predicates(&self) -> Predicates {
        Predicates(self.out.schema.clone())
    }

    /// Evaluation report as a dict.
    #[getter]
    fn report(&self, py: Python<'_>) -> PyResult<Py<PyAny>> {
        to_py(py, &self.out.report)
    }

    fn report_json(&self) -> PyResult<String> {
        self.out.report.to_json().map_err(err)
    }

    /// Rendered explanation per action name.
    fn explanations(&self) -> PyResult<Vec<(String, String)>> {
        self.out
            .conditions
            .iter()
            .map(|(&a, conds)| {
                let name = &self.action_names[a];
                Ok((name.clone(), render_explanation(conds, &self.out.schema, name).map_err(err)?))
            })
            .collect()
    }

    fn summaries(&self, py: Python<'_>) -> PyResult<Py<PyAny>> {
        to_py(py, &self.out.summaries)
    }
}

/// Summarize, extract rules and evaluate. With `env`, the rules are also
/// deployed for the ten evaluation seeds.
#[pyfunction]
#[pyo3(signature = (replay, n_cat=6, theta=0.7, weights="w2", source="gini", k_max=40, seed=0, env=None, predicates=None))]
#[allow(clippy::too_many_arguments)]
fn pipeline(
    replay: &Replay,
    n_cat: usize,
    theta: f64,
    weights: &str,
    source: &str,
    k_max: usize,
    seed: u64,
    env: Option<&str>,
    predicates: Option<PyRef<'_, Predicates>>,
) -> PyResult<PipelineResult> {
    let env = env.map(parse::<EnvKind>).transpose()?;
    let mut cfg = config(n_cat, theta, weights, source, k_max, seed)?;
    let out = match predicates {
        Some(p) => {
            cfg.n_cat = p.0.n_cat();
            run_with_schema(&replay.0, p.0.clone(), &cfg, env)
        }
        None => run_pipeline(&replay.0, &cfg, env),
    }
    .map_err(err)?;
    Ok(PipelineResult {
        out,
        action_names: replay.0.action_names().to_vec(),
    })
}

/// Answer a structured question: summarize the matching records per action.
#[pyfunction]
#[pyo3(signature = (replay, question, predicates, theta=0.7, k_max=40, seed=0))]
fn explain(replay: &Replay, question: &str, predicates: &Predicates, theta: f64, k_max: usize, seed: u64) -> PyResult<Vec<(String, usize, String)>> {
    let filtered = replay.0.filter(&replay.select(question, Some(predicates))?);
    if filtered.is_empty() {
        return Err(err(Error::EmptyData(format!("no records match '{question}'"))));
    }
    let cfg = PipelineConfig {
        theta,
        k_max,
        seed,
        ..PipelineConfig::default()
    };
    let states = predicates.0.discretize_all(&filtered).map_err(err)?;
    let summaries = summarize_per_action(&states, &filtered.actions(), &cfg.summarizer()).map_err(err)?;
    summaries
        .iter()
        .map(|(&a, s)| {
            let name = &replay.0.action_names()[a];
            let n = filtered.records().iter().filter(|r| r.action == a).count();
            Ok((name.clone(), n, render_explanation(&s.conditions, &predicates.0, name).map_err(err)?))
        })
        .collect()
}

/// APE baseline over binary predicates: action id -> outcome dict.
#[pyfunction]
fn ape(py: Python<'_>, replay: &Replay, predicates: &Predicates) -> PyResult<Py<PyAny>> {
    to_py(py, &ape_explain_all(&replay.0, &predicates.0).map_err(err)?)
}

/// Threshold refinement, "min-dup" or "max-f1". Returns the refined
/// predicates and the trace.
#[pyfunction]
#[pyo3(signature = (replay, predicates, mode, theta=0.7, weights="w2", budget=None, alpha=None, m=None))]
#[allow(clippy::too_many_arguments)]
fn refine(
    py: Python<'_>,
    replay: &Replay,
    predicates: &Predicates,
    mode: &str,
    theta: f64,
    weights: &str,
    budget: Option<usize>,
    alpha: Option<f64>,
    m: Option<usize>,
) -> PyResult<(Predicates, Py<PyAny>)> {
    let pcfg = PipelineConfig {
        n_cat: predicates.0.n_cat(),
        theta,
        weights: parse::<WeightKind>(weights)?,
        ..PipelineConfig::default()
    };
    let min_dup = match mode {
        "min-dup" | "min_dup" => true,
        "max-f1" | "max_f1" => false,
        other => return Err(err(Error::InvalidArgument(format!("unknown mode '{other}' (min-dup or max-f1)")))),
    };
    let mut rcfg = if min_dup { RefineConfig::min_dup() } else { RefineConfig::max_f1() };
    rcfg.budget = budget.unwrap_or(rcfg.budget);
    rcfg.alpha = alpha.unwrap_or(rcfg.alpha);
    rcfg.m = m.unwrap_or(rcfg.m);
    let out = if min_dup {
        minimize_duplicates(&replay.0, &predicates.0, &pcfg, &rcfg)
    } else {
        maximize_f1(&replay.0, &predicates.0, &pcfg, &rcfg)
    }
    .map_err(err)?;
    let trace = out.trace_json().map_err(err)?;
    let trace = py.import("json")?.call_method1("loads", (trace,))?.unbind();
    Ok((Predicates(out.schema), trace))
}

/// Sweep table for one grid ("theta", "ncat", "weights" or "predicates").
#[pyfunction]
#[pyo3(signature = (replay, grid, n_cat=6, env=None))]
fn sweep(replay: &Replay, grid: &str, n_cat: usize, env: Option<&str>) -> PyResult<String> {
    let grid: Grid = parse(grid)?;
    let env = env.map(parse::<EnvKind>).transpose()?;
    let base = PipelineConfig {
        n_cat,
        ..PipelineConfig::default()
    };
    Ok(format_sweep(&run_sweep(&replay.0, grid, &base, env)))
}

/// Checks a statement against the SELECT whitelist; returns it trimmed.
#[pyfunction(name = "validate_sql")]
fn validate(sql: &str, replay: &Replay) -> PyResult<String> {
    validate_sql(sql, replay.0.schema()).map(|v| v.sql().to_string()).map_err(err)
}

#[pymodule]
fn xrl_explain_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add("XrlError", m.py().get_type::<XrlError>())?;
    m.add_class::<Policy>()?;
    m.add_class::<Replay>()?;
    m.add_class::<Predicates>()?;
    m.add_class::<Rules>()?;
    m.add_class::<PipelineResult>()?;
    m.add_function(wrap_pyfunction!(pipeline, m)?)?;
    m.add_function(wrap_pyfunction!(explain, m)?)?;
    m.add_function(wrap_pyfunction!(ape, m)?)?;
    m.add_function(wrap_pyfunction!(refine, m)?)?;
    m.add_function(wrap_pyfunction!(sweep, m)?)?;
    m.add_function(wrap_pyfunction!(validate, m)?)?;
    Ok(())
}
