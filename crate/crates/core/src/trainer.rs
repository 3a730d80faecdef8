//! Tabular Q-learning on a uniform state grid, and replay collection.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::envs::{run_episode, Env, EnvKind};
use crate::error::{Error, Result};
use crate::replay::ReplaySet;
use crate::rng::{streams, Rng};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub bins: Vec<usize>,
    pub alpha: f64,
    pub gamma: f64,
    pub epsilon_start: f64,
    pub epsilon_end: f64,
    pub episodes: usize,
    pub seed: u64,
}

impl TrainConfig {
    pub fn for_env(kind: EnvKind) -> Self {
        let (bins, episodes) = match kind {
            EnvKind::MountainCar => (vec![40, 40], 20_000),
            EnvKind::CartPole => (vec![10; 4], 10_000),
        };
        TrainConfig {
            bins,
            alpha: 0.1,
            gamma: 0.99,
            epsilon_start: 1.0,
            epsilon_end: 0.01,
            episodes,
            seed: 0,
        }
    }

    /// Linear schedule from `epsilon_start` at episode 0 to `epsilon_end`
    /// at the last episode.
    pub fn epsilon(&self, episode: usize) -> f64 {
        if self.episodes <= 1 {
            return self.epsilon_end;
        }
        let t = episode as f64 / (self.episodes - 1) as f64;
        self.epsilon_start + (self.epsilon_end - self.epsilon_start) * t
    }
}

/// Grid range per feature. Values outside fall into the edge bins.
fn grid_range(kind: EnvKind) -> Vec<(f64, f64)> {
    match kind {
        EnvKind::MountainCar => vec![(-1.2, 0.6), (-0.07, 0.07)],
        EnvKind::CartPole => vec![(-2.4, 2.4), (-4.0, 4.0), (-0.2095, 0.2095), (-4.0, 4.0)],
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct QEntry {
    cell: usize,
    values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct PolicyFile {
    env: EnvKind,
    edges: Vec<Vec<f64>>,
    n_actions: usize,
    q_table: Vec<QEntry>,
}

/// Greedy policy over a Q-table indexed by grid cell.
#[derive(Debug, Clone, PartialEq)]
pub struct TabularPolicy {
    env: EnvKind,
    /// Interior bin edges per feature.
    edges: Vec<Vec<f64>>,
    n_actions: usize,
    q: Vec<f64>,
    visited: Vec<bool>,
}

impl TabularPolicy {
    fn new(env: EnvKind, bins: &[usize]) -> Result<Self> {
        let ranges = grid_range(env);
        if bins.len() != ranges.len() {
            return Err(Error::InvalidArgument(format!(
                "{env} needs {} bin counts, got {}",
                ranges.len(),
                bins.len()
            )));
        }
        if bins.iter().any(|&b| b < 2) {
            return Err(Error::InvalidArgument("every feature needs at least 2 bins".into()));
        }
        let edges: Vec<Vec<f64>> = bins
            .iter()
            .zip(&ranges)
            .map(|(&b, &(lo, hi))| (1..b).map(|i| lo + (hi - lo) * i as f64 / b as f64).collect())
            .collect();
        let cells: usize = bins.iter().product();
        Ok(TabularPolicy {
            env,
            edges,
            n_actions: env.n_actions(),
            q: vec![0.0; cells * env.n_actions()],
            visited: vec![false; cells],
        })
    }

    pub fn env(&self) -> EnvKind {
        self.env
    }

    pub fn cell(&self, state: &[f64]) -> usize {
        self.edges.iter().zip(state).fold(0, |acc, (e, &v)| {
            acc * (e.len() + 1) + e.partition_point(|&t| t < v)
        })
    }

    fn row(&self, cell: usize) -> &[f64] {
        &self.q[cell * self.n_actions..(cell + 1) * self.n_actions]
    }

    pub fn q_values(&self, state: &[f64]) -> &[f64] {
        self.row(self.cell(state))
    }

    /// Greedy action; ties go to the lowest index.
    pub fn act(&self, state: &[f64]) -> usize {
        argmax(self.q_values(state))
    }

    pub fn visited_cells(&self) -> usize {
        self.visited.iter().filter(|&&v| v).count()
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let q_table = self
            .visited
            .iter()
            .enumerate()
            .filter(|(_, &v)| v)
            .map(|(cell, _)| QEntry {
                cell,
                values: self.row(cell).to_vec(),
            })
            .collect();
        let file = PolicyFile {
            env: self.env,
            edges: self.edges.clone(),
            n_actions: self.n_actions,
            q_table,
        };
        let mut w = BufWriter::new(File::create(path)?);
        serde_json::to_writer(&mut w, &file)?;
        w.write_all(b"\n")?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        if !path.exists() {
            return Err(Error::NotFound(path.to_path_buf()));
        }
        let file: PolicyFile = serde_json::from_reader(BufReader::new(File::open(path)?))?;
        if file.n_actions != file.env.n_actions() || file.edges.len() != file.env.n_features() {
            return Err(Error::Schema(format!("policy file does not fit {}", file.env)));
        }
        let bins: Vec<usize> = file.edges.iter().map(|e| e.len() + 1).collect();
        let mut p = TabularPolicy::new(file.env, &bins)?;
        p.edges = file.edges;
        for e in file.q_table {
            if e.cell >= p.visited.len() || e.values.len() != p.n_actions {
                return Err(Error::Schema(format!("bad q-table entry for cell {}", e.cell)));
            }
            p.visited[e.cell] = true;
            p.q[e.cell * p.n_actions..(e.cell + 1) * p.n_actions].copy_from_slice(&e.values);
        }
        Ok(p)
    }
}

fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate().skip(1) {
        if x > v[best] {
            best = i;
        }
    }
    best
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrainReport {
    pub returns: Vec<f64>,
    pub visited_cells: usize,
}

impl TrainReport {
    /// Mean return over consecutive windows of `width` episodes.
    pub fn curve(&self, width: usize) -> Vec<f64> {
        self.returns
            .chunks(width.max(1))
            .map(|c| c.iter().sum::<f64>() / c.len() as f64)
            .collect()
    }
}

/// Epsilon-greedy Q-learning. Training episode `k` resets with seed `k`;
/// exploration draws from its own stream seeded by `cfg.seed`. Time-limit
/// ends bootstrap, terminal states do not.
pub fn train_tabular_q(kind: EnvKind, cfg: &TrainConfig) -> Result<(TabularPolicy, TrainReport)> {
    if cfg.episodes == 0 {
        return Err(Error::Training("episodes must be at least 1".into()));
    }
    if !(cfg.alpha > 0.0 && cfg.alpha <= 1.0) || !(0.0..=1.0).contains(&cfg.gamma) {
        return Err(Error::InvalidArgument("alpha must be in (0,1] and gamma in [0,1]".into()));
    }
    let mut policy = TabularPolicy::new(kind, &cfg.bins)?;
    let mut explore = Rng::new(cfg.seed, streams::EXPLORATION);
    let na = policy.n_actions;
    let mut returns = Vec::with_capacity(cfg.episodes);
    for ep in 0..cfg.episodes {
        let eps = cfg.epsilon(ep);
        let mut env = Env::new(kind, ep as u64);
        let mut cell = policy.cell(env.state());
        let mut total = 0.0;
        loop {
            let action = if explore.next_f64() < eps {
                explore.below(na)
            } else {
                argmax(policy.row(cell))
            };
            let r = env.step(action)?;
            total += r.reward;
            let next = policy.cell(&r.next_state);
            let future = if r.done {
                0.0
            } else {
                policy.row(next).iter().copied().fold(f64::NEG_INFINITY, f64::max)
            };
            policy.visited[cell] = true;
            let q = &mut policy.q[cell * na + action];
            *q += cfg.alpha * (r.reward + cfg.gamma * future - *q);
            if !q.is_finite() {
                return Err(Error::Training(format!("non-finite Q value in episode {ep}")));
            }
            if r.done || r.truncated {
                break;
            }
            cell = next;
        }
        returns.push(total);
    }
    let visited_cells = policy.visited_cells();
    Ok((policy, TrainReport { returns, visited_cells }))
}

/// Per-seed returns of a policy over `seeds`.
pub fn evaluate_returns(kind: EnvKind, mut policy: impl FnMut(&[f64]) -> Result<usize>, seeds: impl IntoIterator<Item = u64>) -> Result<Vec<f64>> {
    seeds
        .into_iter()
        .map(|s| run_episode(kind, &mut policy, s).map(|t| t.total_reward()))
        .collect()
}

/// Runs episodes with seeds 0, 1, 2, ... until at least `min_steps`
/// transitions are logged; the episode in progress is always completed.
pub fn collect_replay(kind: EnvKind, mut policy: impl FnMut(&[f64]) -> Result<usize>, min_steps: usize) -> Result<ReplaySet> {
    if min_steps == 0 {
        return Err(Error::InvalidArgument("min_steps must be at least 1".into()));
    }
    let mut records = Vec::new();
    let mut seed = 0u64;
    while records.len() < min_steps {
        let traj = run_episode(kind, &mut policy, seed)?;
        records.extend(traj.records(seed));
        seed += 1;
    }
    ReplaySet::new(kind.feature_schema(), records, kind.action_names())
}

pub fn episode_lengths(rs: &ReplaySet) -> BTreeMap<u64, usize> {
    let mut out = BTreeMap::new();
    for r in rs.records() {
        *out.entry(r.episode).or_insert(0) += 1;
    }
    out
}
