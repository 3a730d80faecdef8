//! MountainCar-v0 and CartPole-v1 dynamics with seeded resets.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::replay::{Feature, FeatureSchema, ReplayRecord};
use crate::rng::{streams, Rng};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EnvKind {
    MountainCar,
    CartPole,
}

pub mod mountaincar {
    pub const MIN_POSITION: f64 = -1.2;
    pub const MAX_POSITION: f64 = 0.6;
    pub const MAX_SPEED: f64 = 0.07;
    pub const GOAL_POSITION: f64 = 0.5;
    pub const GOAL_VELOCITY: f64 = 0.0;
    pub const FORCE: f64 = 0.001;
    pub const GRAVITY: f64 = 0.0025;
    pub const MAX_STEPS: usize = 200;
}

pub mod cartpole {
    pub const GRAVITY: f64 = 9.8;
    pub const MASS_CART: f64 = 1.0;
    pub const MASS_POLE: f64 = 0.1;
    pub const TOTAL_MASS: f64 = MASS_CART + MASS_POLE;
    pub const HALF_LENGTH: f64 = 0.5;
    pub const POLE_MASS_LENGTH: f64 = MASS_POLE * HALF_LENGTH;
    pub const FORCE_MAG: f64 = 10.0;
    pub const TAU: f64 = 0.02;
    pub const THETA_LIMIT: f64 = 12.0 * std::f64::consts::PI / 180.0;
    pub const X_LIMIT: f64 = 2.4;
    pub const MAX_STEPS: usize = 500;
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepResult {
    pub next_state: Vec<f64>,
    pub reward: f64,
    /// Terminal state reached.
    pub done: bool,
    /// Time limit reached without termination.
    pub truncated: bool,
}

pub fn mountaincar_transition(s: &[f64], action: usize) -> Result<StepResult> {
    use mountaincar::*;
    if action > 2 {
        return Err(Error::InvalidAction { action, n_actions: 3 });
    }
    let (pos, vel) = (s[0], s[1]);
    let mut vel = vel + (action as f64 - 1.0) * FORCE + (3.0 * pos).cos() * (-GRAVITY);
    vel = vel.clamp(-MAX_SPEED, MAX_SPEED);
    let pos = (pos + vel).clamp(MIN_POSITION, MAX_POSITION);
    if pos == MIN_POSITION && vel < 0.0 {
        vel = 0.0;
    }
    Ok(StepResult {
        next_state: vec![pos, vel],
        reward: -1.0,
        done: pos >= GOAL_POSITION && vel >= GOAL_VELOCITY,
        truncated: false,
    })
}

pub fn cartpole_transition(s: &[f64], action: usize) -> Result<StepResult> {
    use cartpole::*;
    if action > 1 {
        return Err(Error::InvalidAction { action, n_actions: 2 });
    }
    let (x, x_dot, theta, theta_dot) = (s[0], s[1], s[2], s[3]);
    let force = if action == 1 { FORCE_MAG } else { -FORCE_MAG };
    let (sin, cos) = theta.sin_cos();
    let temp = (force + POLE_MASS_LENGTH * theta_dot * theta_dot * sin) / TOTAL_MASS;
    let theta_acc = (GRAVITY * sin - cos * temp) / (HALF_LENGTH * (4.0 / 3.0 - MASS_POLE * cos * cos / TOTAL_MASS));
    let x_acc = temp - POLE_MASS_LENGTH * theta_acc * cos / TOTAL_MASS;
    let next = vec![
        x + TAU * x_dot,
        x_dot + TAU * x_acc,
        theta + TAU * theta_dot,
        theta_dot + TAU * theta_acc,
    ];
    let done = next[0].abs() > X_LIMIT || next[2].abs() > THETA_LIMIT;
    Ok(StepResult {
        next_state: next,
        reward: 1.0,
        done,
        truncated: false,
    })
}

impl EnvKind {
    pub const ALL: [EnvKind; 2] = [EnvKind::MountainCar, EnvKind::CartPole];

    pub fn feature_schema(self) -> FeatureSchema {
        let features = match self {
            EnvKind::MountainCar => vec![
                Feature::new("position").with_unit("m").with_bounds(-1.2, 0.6),
                Feature::new("velocity").with_unit("m/step").with_bounds(-0.07, 0.07),
            ],
            EnvKind::CartPole => vec![
                Feature::new("cart_position").with_unit("m").with_bounds(-4.8, 4.8),
                Feature::new("cart_velocity").with_unit("m/s"),
                Feature::new("pole_angle").with_unit("rad").with_bounds(-0.418879, 0.418879),
                Feature::new("pole_angular_velocity").with_unit("rad/s"),
            ],
        };
        FeatureSchema::new(features).expect("built-in schema is valid")
    }

    pub fn action_names(self) -> Vec<String> {
        let names: &[&str] = match self {
            EnvKind::MountainCar => &["push_left", "no_push", "push_right"],
            EnvKind::CartPole => &["push_left", "push_right"],
        };
        names.iter().map(|s| s.to_string()).collect()
    }

    pub fn n_actions(self) -> usize {
        match self {
            EnvKind::MountainCar => 3,
            EnvKind::CartPole => 2,
        }
    }

    pub fn n_features(self) -> usize {
        match self {
            EnvKind::MountainCar => 2,
            EnvKind::CartPole => 4,
        }
    }

    pub fn max_steps(self) -> usize {
        match self {
            EnvKind::MountainCar => mountaincar::MAX_STEPS,
            EnvKind::CartPole => cartpole::MAX_STEPS,
        }
    }

    /// Initial state for `seed`, drawn from the reset stream.
    pub fn reset(self, seed: u64) -> Vec<f64> {
        let mut rng = Rng::new(seed, streams::ENV_RESET);
        match self {
            EnvKind::MountainCar => vec![rng.uniform(-0.6, -0.4), 0.0],
            EnvKind::CartPole => (0..4).map(|_| rng.uniform(-0.05, 0.05)).collect(),
        }
    }

    /// One transition, ignoring the time limit.
    pub fn transition(self, state: &[f64], action: usize) -> Result<StepResult> {
        match self {
            EnvKind::MountainCar => mountaincar_transition(state, action),
            EnvKind::CartPole => cartpole_transition(state, action),
        }
    }

    /// Whether a trajectory's final transition counts as task success.
    pub fn succeeded(self, traj: &Trajectory) -> bool {
        match self {
            EnvKind::MountainCar => traj.transitions.last().is_some_and(|t| t.done),
            EnvKind::CartPole => traj.transitions.last().is_some_and(|t| t.truncated),
        }
    }
}

impl fmt::Display for EnvKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EnvKind::MountainCar => "mountaincar",
            EnvKind::CartPole => "cartpole",
        })
    }
}

impl FromStr for EnvKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace(['-', '_'], "").as_str() {
            "mountaincar" | "mountaincarv0" => Ok(EnvKind::MountainCar),
            "cartpole" | "cartpolev1" => Ok(EnvKind::CartPole),
            _ => Err(Error::InvalidArgument(format!(
                "unknown environment '{s}' (expected mountaincar or cartpole)"
            ))),
        }
    }
}

/// A stateful environment instance with a step counter.
#[derive(Debug, Clone)]
pub struct Env {
    kind: EnvKind,
    state: Vec<f64>,
    steps: usize,
}

impl Env {
    pub fn new(kind: EnvKind, seed: u64) -> Self {
        Env {
            kind,
            state: kind.reset(seed),
            steps: 0,
        }
    }

    pub fn kind(&self) -> EnvKind {
        self.kind
    }

    pub fn state(&self) -> &[f64] {
        &self.state
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn step(&mut self, action: usize) -> Result<StepResult> {
        let mut r = self.kind.transition(&self.state, action)?;
        self.steps += 1;
        r.truncated = !r.done && self.steps >= self.kind.max_steps();
        self.state.clone_from(&r.next_state);
        Ok(r)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Transition {
    /// State the action was taken in.
    pub state: Vec<f64>,
    pub action: usize,
    pub reward: f64,
    pub done: bool,
    pub truncated: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Trajectory {
    pub seed: u64,
    pub transitions: Vec<Transition>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.transitions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.transitions.is_empty()
    }

    pub fn total_reward(&self) -> f64 {
        self.transitions.iter().map(|t| t.reward).sum()
    }

    /// Replay rows for this trajectory; time-limit ends are stored with both
    /// `done` and `truncated` set.
    pub fn records(&self, episode: u64) -> impl Iterator<Item = ReplayRecord> + '_ {
        self.transitions.iter().enumerate().map(move |(i, t)| ReplayRecord {
            episode,
            step: i as u64,
            state: t.state.clone(),
            action: t.action,
            reward: t.reward,
            done: t.done || t.truncated,
            truncated: t.truncated,
        })
    }
}

/// Runs one episode from the reset for `seed` until termination or the time
/// limit.
pub fn run_episode(kind: EnvKind, mut policy: impl FnMut(&[f64]) -> Result<usize>, seed: u64) -> Result<Trajectory> {
    let mut env = Env::new(kind, seed);
    let mut transitions = Vec::new();
    loop {
        let state = env.state().to_vec();
        let action = policy(&state)?;
        let r = env.step(action)?;
        let end = r.done || r.truncated;
        transitions.push(Transition {
            state,
            action,
            reward: r.reward,
            done: r.done,
            truncated: r.truncated,
        });
        if end {
            return Ok(Trajectory { seed, transitions });
        }
    }
}
