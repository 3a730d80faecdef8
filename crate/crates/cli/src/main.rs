use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};
use xrl_explain::config::ExplainerConfig;
use xrl_explain::envs::EnvKind;
use xrl_explain::eval::{eval_fidelity, eval_performance, fingerprint, format_table, rule_policy, EvalReport};
use xrl_explain::pipeline::{build_schema, run_pipeline, run_with_schema, summarize_per_action, LimitSource, PipelineConfig, EVAL_SEEDS};
use xrl_explain::predicates::PredicateSchema;
use xrl_explain::query::llm::{translate, LlmConfig};
use xrl_explain::query::{parse_query, to_sql, validate_sql, QueryContext, QueryKind};
use xrl_explain::refine::{maximize_f1, minimize_duplicates, RefineConfig};
use xrl_explain::replay::{ingest, Format, ReplaySet, SchemaFile};
use xrl_explain::rules::{RuleSet, WeightKind};
use xrl_explain::sweep::{format_sweep, run_sweep, Grid};
use xrl_explain::text::render_explanation;
use xrl_explain::trainer::{collect_replay, evaluate_returns, train_tabular_q, TabularPolicy, TrainConfig};
use xrl_explain::{Error, Result};

#[derive(Parser)]
#[command(name = "xrl-explain", version, about = "Textual explanations and transparent rules for trained RL policies")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a tabular Q-learning agent.
    Train(TrainArgs),
    /// Run a trained policy and log its transitions.
    Collect(CollectArgs),
    /// Answer one question about the replayed policy.
    Explain(ExplainArgs),
    /// Extract rules from the full replay.
    Rules(RulesArgs),
    /// Evaluate a saved rule set.
    Eval(EvalArgs),
    /// Refine predicate thresholds.
    Refine(RefineArgs),
    /// Parameter sweeps.
    Sweep(SweepArgs),
    /// Interactive question loop; `exit` quits.
    Repl(ReplArgs),
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    env: EnvKind,
    #[arg(long)]
    episodes: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = "policy.json")]
    out: PathBuf,
}

#[derive(Args)]
struct CollectArgs {
    #[arg(long)]
    policy: PathBuf,
    /// Target number of transitions; whole episodes are kept.
    #[arg(long, default_value_t = 10_000)]
    steps: usize,
    /// Output replay (.db, .csv or .jsonl); a `<stem>.schema.json` sidecar is written next to it.
    #[arg(long, default_value = "replay.db")]
    out: PathBuf,
}

#[derive(Args)]
struct ReplayArgs {
    /// Replay file (.db, .csv or .jsonl).
    #[arg(long)]
    db: PathBuf,
    /// Sidecar schema; defaults to `<stem>.schema.json` when present.
    #[arg(long)]
    schema: Option<PathBuf>,
}

#[derive(Args, Clone)]
struct PipelineArgs {
    /// Levels per predicate (default 5 with --env mountaincar, else 6).
    #[arg(long)]
    ncat: Option<usize>,
    #[arg(long, default_value_t = 0.7)]
    theta: f64,
    #[arg(long, default_value_t = WeightKind::W2)]
    weights: WeightKind,
    /// Predicate limits: gini or median.
    #[arg(long, default_value_t = LimitSource::Gini)]
    source: LimitSource,
    #[arg(long, default_value_t = 40)]
    kmax: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

impl PipelineArgs {
    fn config(&self, env: Option<EnvKind>) -> PipelineConfig {
        let n_cat = self.ncat.unwrap_or(match env {
            Some(EnvKind::MountainCar) => 5,
            _ => 6,
        });
        PipelineConfig {
            n_cat,
            theta: self.theta,
            k_max: self.kmax,
            seed: self.seed,
            weights: self.weights,
            source: self.source,
        }
    }
}

#[derive(Args)]
struct ExplainArgs {
    #[command(flatten)]
    replay: ReplayArgs,
    #[arg(long)]
    question: String,
    /// Saved predicate schema; generated from the replay otherwise.
    #[arg(long)]
    predicates: Option<PathBuf>,
    #[command(flatten)]
    pipeline: PipelineArgs,
    /// Translate the question through the model endpoint in this config file.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value = "summary.json")]
    out: PathBuf,
}

#[derive(Args)]
struct RulesArgs {
    #[command(flatten)]
    replay: ReplayArgs,
    #[arg(long)]
    predicates: Option<PathBuf>,
    #[command(flatten)]
    pipeline: PipelineArgs,
    /// Environment for the performance defaults and evaluation.
    #[arg(long)]
    env: Option<EnvKind>,
    #[arg(long, default_value = "rules.json")]
    out: PathBuf,
    #[arg(long, default_value = "predicates.json")]
    predicates_out: PathBuf,
}

#[derive(Args)]
struct EvalArgs {
    #[command(flatten)]
    replay: ReplayArgs,
    #[arg(long, default_value = "rules.json")]
    rules: PathBuf,
    #[arg(long, default_value = "predicates.json")]
    predicates: PathBuf,
    /// Also deploy the rules in this environment for the ten evaluation seeds.
    #[arg(long)]
    env: Option<EnvKind>,
    #[arg(long, default_value = "eval_report.json")]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum RefineMode {
    MinDup,
    MaxF1,
}

#[derive(Args)]
struct RefineArgs {
    #[command(flatten)]
    replay: ReplayArgs,
    #[arg(long, value_enum)]
    mode: RefineMode,
    #[arg(long)]
    predicates: Option<PathBuf>,
    #[command(flatten)]
    pipeline: PipelineArgs,
    #[arg(long)]
    m: Option<usize>,
    #[arg(long)]
    budget: Option<usize>,
    #[arg(long)]
    alpha: Option<f64>,
    /// Duplicate minimization adopts only strict F1 increases.
    #[arg(long)]
    strict: bool,
    #[arg(long, default_value = "predicates.refined.json")]
    out: PathBuf,
    #[arg(long, default_value = "refine_trace.json")]
    trace: PathBuf,
}

#[derive(Args)]
struct SweepArgs {
    /// theta, ncat, weights, predicates or all.
    #[arg(long, default_value = "all")]
    grid: String,
    /// Environment for the performance columns; without --db a replay is
    /// trained and collected first.
    #[arg(long)]
    env: Option<EnvKind>,
    #[arg(long)]
    db: Option<PathBuf>,
    #[arg(long)]
    schema: Option<PathBuf>,
    #[command(flatten)]
    pipeline: PipelineArgs,
    /// Write the rows as JSON as well.
    #[arg(long)]
    json: Option<PathBuf>,
}

#[derive(Args)]
struct ReplArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    db: Option<PathBuf>,
    #[arg(long)]
    schema: Option<PathBuf>,
    #[command(flatten)]
    pipeline: PipelineArgs,
}

fn sidecar_path(db: &Path) -> PathBuf {
    let stem = db.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    db.with_file_name(format!("{stem}.schema.json"))
}

fn load_replay(db: &Path, schema: Option<&Path>) -> Result<ReplaySet> {
    let format = Format::from_path(db)
        .ok_or_else(|| Error::InvalidArgument(format!("cannot tell the format of {} (use .db, .csv or .jsonl)", db.display())))?;
    let sidecar = match schema {
        Some(p) => Some(SchemaFile::load(p)?),
        None => {
            let p = sidecar_path(db);
            p.exists().then(|| SchemaFile::load(&p)).transpose()?
        }
    };
    ingest(db, format, sidecar.as_ref())
}

fn write_json(path: &Path, value: &impl serde::Serialize) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}

fn predicates_for(rs: &ReplaySet, file: Option<&Path>, cfg: &PipelineConfig) -> Result<PredicateSchema> {
    match file {
        Some(p) => {
            let schema = PredicateSchema::load(p)?;
            schema.check_against(rs.schema())?;
            Ok(schema)
        }
        None => build_schema(rs, cfg),
    }
}

fn train(a: TrainArgs) -> Result<()> {
    let mut cfg = TrainConfig::for_env(a.env);
    cfg.seed = a.seed;
    if let Some(n) = a.episodes {
        cfg.episodes = n;
    }
    let (policy, report) = train_tabular_q(a.env, &cfg)?;
    policy.save(&a.out)?;
    let returns = evaluate_returns(a.env, |s| Ok(policy.act(s)), EVAL_SEEDS)?;
    let mean = returns.iter().sum::<f64>() / returns.len() as f64;
    let out = json!({
        "env": a.env,
        "episodes": cfg.episodes,
        "visited_cells": report.visited_cells,
        "eval_returns": returns,
        "mean_return": mean,
        "policy": a.out,
    });
    println!("{}", serde_json::to_string_pretty(&out)?);
    Ok(())
}

fn collect(a: CollectArgs) -> Result<()> {
    let policy = TabularPolicy::load(&a.policy)?;
    let format = Format::from_path(&a.out)
        .ok_or_else(|| Error::InvalidArgument(format!("cannot tell the format of {}", a.out.display())))?;
    let rs = collect_replay(policy.env(), |s| Ok(policy.act(s)), a.steps)?;
    if a.out.exists() {
        std::fs::remove_file(&a.out)?;
    }
    rs.write(&a.out, format)?;
    let sidecar = sidecar_path(&a.out);
    rs.sidecar().save(&sidecar)?;
    println!("wrote {} records to {} (schema {})", rs.len(), a.out.display(), sidecar.display());
    Ok(())
}

/// Structured parse, or the model endpoint when a config with `[llm]` is given.
fn question_to_sql(question: &str, rs: &ReplaySet, preds: &PredicateSchema, llm: Option<&LlmConfig>) -> Result<(xrl_explain::query::ValidatedSelect, Value)> {
    let ctx = QueryContext {
        features: rs.schema(),
        actions: rs.action_names(),
        predicates: Some(preds),
    };
    match llm {
        None => {
            let ast = parse_query(question, ctx)?;
            let sql = to_sql(&ast, rs.schema());
            let kind = ast.kind.to_string();
            Ok((validate_sql(&sql, rs.schema())?, json!({"translator": "structured", "kind": kind})))
        }
        Some(cfg) => {
            let t = translate(question, cfg, ctx)?;
            let info = json!({
                "translator": "llm",
                "candidate": t.candidate,
                "rejection": t.rejection,
                "fallback": t.fallback.as_ref().map(|f| match f {
                    Ok(v) => json!({"sql": v.sql()}),
                    Err(e) => json!({"error": e.to_string()}),
                }),
            });
            match t.statement() {
                Some(v) => Ok((v.clone(), info)),
                None => Err(Error::Validation(format!(
                    "model output rejected ({}) and the structured parse failed",
                    t.rejection.unwrap_or_default()
                ))),
            }
        }
    }
}

/// Summary JSON and rendered text for one question.
fn explain_question(question: &str, rs: &ReplaySet, preds: &PredicateSchema, cfg: &PipelineConfig, llm: Option<&LlmConfig>) -> Result<(Value, String)> {
    let (stmt, info) = question_to_sql(question, rs, preds, llm)?;
    let filtered = rs.filter(&stmt);
    if filtered.is_empty() {
        return Err(Error::EmptyData(format!("no records match '{}'", stmt.sql())));
    }
    let states = preds.discretize_all(&filtered)?;
    let summaries = summarize_per_action(&states, &filtered.actions(), &cfg.summarizer())?;
    let mut actions = Vec::new();
    let mut text = Vec::new();
    for (&a, s) in &summaries {
        let name = &rs.action_names()[a];
        let records = filtered.records().iter().filter(|r| r.action == a).count();
        let sentence = render_explanation(&s.conditions, preds, name)?;
        text.push(if summaries.len() > 1 {
            format!("[{name}: {records} of {} records] {sentence}", filtered.len())
        } else {
            sentence
        });
        actions.push(json!({"action": a, "name": name, "records": records, "text": text.last(), "summary": s}));
    }
    let kind = if parse_query(question, QueryContext { features: rs.schema(), actions: rs.action_names(), predicates: Some(preds) })
        .map(|a| a.kind == QueryKind::WhenAction)
        .unwrap_or(false)
    {
        "when-action"
    } else {
        "what-if"
    };
    let value = json!({
        "question": question,
        "kind": kind,
        "sql": stmt.sql(),
        "translation": info,
        "records": filtered.len(),
        "config": cfg,
        "predicates": preds,
        "actions": actions,
    });
    Ok((value, text.join("\n")))
}

fn explain(a: ExplainArgs) -> Result<()> {
    let rs = load_replay(&a.replay.db, a.replay.schema.as_deref())?;
    let cfg = a.pipeline.config(None);
    let preds = predicates_for(&rs, a.predicates.as_deref(), &cfg)?;
    let llm = a.config.as_deref().map(ExplainerConfig::load).transpose()?.map(|c| c.llm());
    let (value, text) = explain_question(&a.question, &rs, &preds, &cfg, llm.as_ref())?;
    write_json(&a.out, &value)?;
    println!("{text}");
    Ok(())
}

fn rules(a: RulesArgs) -> Result<()> {
    let rs = load_replay(&a.replay.db, a.replay.schema.as_deref())?;
    let cfg = a.pipeline.config(a.env);
    let out = match &a.predicates {
        Some(_) => run_with_schema(&rs, predicates_for(&rs, a.predicates.as_deref(), &cfg)?, &cfg, a.env)?,
        None => run_pipeline(&rs, &cfg, a.env)?,
    };
    out.rules.save(&a.out)?;
    out.schema.save(&a.predicates_out)?;
    for (&act, conds) in &out.conditions {
        println!("{}", render_explanation(conds, &out.schema, &rs.action_names()[act])?);
    }
    print!("{}", format_table(&[("rules".to_string(), &out.report)]));
    Ok(())
}

fn eval(a: EvalArgs) -> Result<()> {
    let rs = load_replay(&a.replay.db, a.replay.schema.as_deref())?;
    let ruleset = RuleSet::load(&a.rules)?;
    let preds = PredicateSchema::load(&a.predicates)?;
    preds.check_against(rs.schema())?;
    let fidelity = eval_fidelity(&ruleset, &preds, &rs)?;
    let performance = a.env.map(|env| eval_performance(env, rule_policy(&ruleset, &preds), &EVAL_SEEDS)).transpose()?;
    let fp = fingerprint(&json!({"rules": ruleset, "predicates": preds, "records": rs.len(), "env": a.env}))?;
    let report = EvalReport::new(fp, &ruleset.conditions_per_action(), &fidelity, performance);
    std::fs::write(&a.out, report.to_json()?)?;
    print!("{}", format_table(&[("eval".to_string(), &report)]));
    Ok(())
}

fn refine(a: RefineArgs) -> Result<()> {
    let rs = load_replay(&a.replay.db, a.replay.schema.as_deref())?;
    let pcfg = a.pipeline.config(None);
    let schema = predicates_for(&rs, a.predicates.as_deref(), &pcfg)?;
    let mut rcfg = match a.mode {
        RefineMode::MinDup => RefineConfig::min_dup(),
        RefineMode::MaxF1 => RefineConfig::max_f1(),
    };
    rcfg.m = a.m.unwrap_or(rcfg.m);
    rcfg.budget = a.budget.unwrap_or(rcfg.budget);
    rcfg.alpha = a.alpha.unwrap_or(rcfg.alpha);
    rcfg.strict = a.strict;
    let outcome = match a.mode {
        RefineMode::MinDup => minimize_duplicates(&rs, &schema, &pcfg, &rcfg)?,
        RefineMode::MaxF1 => maximize_f1(&rs, &schema, &pcfg, &rcfg)?,
    };
    outcome.schema.save(&a.out)?;
    std::fs::write(&a.trace, outcome.trace_json()?)?;
    println!(
        "E_dup {} -> {}, E_F1 {:.4} -> {:.4} after {} iterations; wrote {}",
        outcome.initial.e_dup,
        outcome.best.e_dup,
        outcome.initial.e_f1,
        outcome.best.e_f1,
        outcome.iterations,
        a.out.display()
    );
    Ok(())
}

fn sweep(a: SweepArgs) -> Result<()> {
    let grids: Vec<Grid> = if a.grid.eq_ignore_ascii_case("all") {
        Grid::ALL.to_vec()
    } else {
        vec![a.grid.parse()?]
    };
    let rs = match (&a.db, a.env) {
        (Some(db), _) => load_replay(db, a.schema.as_deref())?,
        (None, Some(env)) => {
            let (policy, _) = train_tabular_q(env, &TrainConfig::for_env(env))?;
            collect_replay(env, |s| Ok(policy.act(s)), 10_000)?
        }
        (None, None) => return Err(Error::InvalidArgument("sweep needs --db or --env".into())),
    };
    let base = a.pipeline.config(a.env);
    let mut all = Vec::new();
    for grid in grids {
        let rows = run_sweep(&rs, grid, &base, a.env);
        println!("== {grid} ({} records) ==", rs.len());
        print!("{}", format_sweep(&rows));
        println!();
        all.push(json!({"grid": grid, "rows": rows}));
    }
    if let Some(path) = &a.json {
        write_json(path, &all)?;
    }
    Ok(())
}

const STRUCTURED_HINT: &str = "try the structured syntax: 'when action = <name>', 'when will you do <name>?' or 'what if <feature> <op> <value> [and ...]'";

fn repl(a: ReplArgs) -> Result<()> {
    let config = a.config.as_deref().map(ExplainerConfig::load).transpose()?.unwrap_or_default();
    let db = a.db.clone().or(config.db.clone());
    let schema = a.schema.clone().or(config.schema.clone());
    let llm = config.llm.is_some().then(|| config.llm());
    let cfg = a.pipeline.config(None);
    let loaded = match &db {
        Some(db) => {
            let rs = load_replay(db, schema.as_deref())?;
            let preds = predicates_for(&rs, config.predicates.as_deref(), &cfg)?;
            Some((rs, preds))
        }
        None => None,
    };
    let stdin = std::io::stdin();
    let mut stdout = std::io::stdout();
    let mut line = String::new();
    loop {
        write!(stdout, "> ")?;
        stdout.flush()?;
        line.clear();
        if stdin.lock().read_line(&mut line)? == 0 {
            break;
        }
        let q = line.trim();
        match q {
            "" => continue,
            "exit" | "quit" => break,
            _ => {}
        }
        let Some((rs, preds)) = &loaded else {
            writeln!(stdout, "no replay loaded (pass --db or set db in the config file)")?;
            continue;
        };
        match explain_question(q, rs, preds, &cfg, llm.as_ref()) {
            Ok((_, text)) => writeln!(stdout, "{text}")?,
            Err(e @ Error::Unavailable(_)) => writeln!(stdout, "error: {e}\n{STRUCTURED_HINT}")?,
            Err(e) => writeln!(stdout, "error: {e}")?,
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Train(a) => train(a),
        Command::Collect(a) => collect(a),
        Command::Explain(a) => explain(a),
        Command::Rules(a) => rules(a),
        Command::Eval(a) => eval(a),
        Command::Refine(a) => refine(a),
        Command::Sweep(a) => sweep(a),
        Command::Repl(a) => repl(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", json!({"error": e.kind(), "message": e.to_string()}));
            ExitCode::from(1)
        }
    }
}
