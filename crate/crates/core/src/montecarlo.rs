//! Monte Carlo rollouts of a profile under the stochastic dynamics.
//!
//! Each agent tracks its nominal controls with the error feedback
//! `u = ū + k (r̄ − x)`, clipped to the control box, and is retired at its
//! plan's goal step. Noise for `(trial, agent, step)` comes from its own
//! ChaCha8 stream position, so trials can run in any order.

use std::io::Write;

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::game::{GameSpec, Profile};
use crate::geometry::{collision_volume, AgentShape, Polytope};
use crate::planner::MarginTarget;
use crate::Vec2;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RolloutConfig {
    pub trials: usize,
    pub seed: u64,
    pub record_trajectories: bool,
}

impl Default for RolloutConfig {
    fn default() -> Self {
        RolloutConfig {
            trials: 10_000,
            seed: 0,
            record_trajectories: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CollisionCount {
    pub agent: usize,
    pub other: MarginTarget,
    /// Trials in which this pair collided at least once.
    pub trials: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryPoint {
    pub trial: usize,
    pub agent: usize,
    pub t: usize,
    pub x: f64,
    pub y: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RolloutReport {
    pub trials: usize,
    /// Fraction of trials with at least one collision.
    pub collision_rate: f64,
    pub collisions: Vec<CollisionCount>,
    /// Per agent, in game order: fraction of trials in which it was involved in a collision.
    #[serde(default)]
    pub agent_collision_rates: Vec<f64>,
    /// Fraction of (trial, agent) runs whose body covers the goal when retired.
    pub goal_reach_rate: f64,
    /// Mean goal step over the runs that reached their goal.
    pub mean_goal_step: Option<f64>,
    /// 95% normal-approximation half-width of `collision_rate`.
    pub confidence_halfwidth: f64,
    /// Largest realized control component over all runs.
    pub max_control: f64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub trajectories: Vec<TrajectoryPoint>,
}

/// Relative positions `x_i − x_j` at which the bodies of `i` and `j` overlap.
fn relative_volume(shape_i: &AgentShape, shape_j: &AgentShape) -> Option<Polytope> {
    match (shape_j, shape_i) {
        (AgentShape::Region(c), _) => Some(collision_volume(shape_i, c)),
        (AgentShape::Point, AgentShape::Region(c)) => Some(c.negate()),
        (AgentShape::Point, AgentShape::Point) => None,
    }
}

fn uniform(rng: &mut ChaCha8Rng) -> f64 {
    // (0, 1], never zero so the logarithm stays finite
    1.0 - (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

fn standard_normal_pair(rng: &mut ChaCha8Rng) -> Vec2 {
    let r = (-2.0 * uniform(rng).ln()).sqrt();
    let theta = std::f64::consts::TAU * uniform(rng);
    Vec2::new(r * theta.cos(), r * theta.sin())
}

struct AgentRun {
    positions: Vec<Vec2>,
    max_control: f64,
}

struct TrialOutcome {
    /// Per collision pair index: collided in this trial.
    hit: Vec<bool>,
    reached: Vec<bool>,
    max_control: f64,
    runs: Vec<AgentRun>,
}

struct Pair {
    i: usize,
    other: MarginTarget,
    j: Option<usize>,
    volume: Polytope,
}

fn simulate_agent(game: &GameSpec, profile: &Profile, i: usize, trial: usize, seed: u64) -> AgentRun {
    let agent = &game.agents[i];
    let plan = &profile.plans[i];
    let chol = agent.noise.cholesky_factor();
    let horizon = plan.horizon();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream((trial as u64) * game.agents.len() as u64 + i as u64);
    let mut x = agent.start;
    let mut positions = Vec::with_capacity(horizon + 1);
    positions.push(x);
    let mut max_control: f64 = 0.0;
    for t in 0..horizon {
        if t < plan.goal_step {
            // two u64 draws per step, four 32-bit words
            rng.set_word_pos(4 * t as u128);
            let noise = chol * standard_normal_pair(&mut rng);
            let correction = (plan.position(t) - x) * agent.feedback_gain;
            let u = (plan.controls[t] + correction).map(|c| c.clamp(-agent.control_bound, agent.control_bound));
            max_control = max_control.max(u.amax());
            x = agent.a * x + agent.b * u + noise;
        }
        positions.push(x);
    }
    AgentRun { positions, max_control }
}

fn goal_covered(shape: &AgentShape, at: &Vec2, goal: &Vec2, tol: f64) -> bool {
    match shape.placed(at) {
        Some(body) => body.contains(goal),
        None => (at - goal).lp_norm(1) <= tol,
    }
}

/// Runs `cfg.trials` noisy executions of `profile`, checking agent pairs and
/// static obstacles at every step where the agents involved are active.
pub fn rollout(
    game: &GameSpec,
    profile: &Profile,
    obstacles: &[Polytope],
    cfg: &RolloutConfig,
) -> Result<RolloutReport> {
    if cfg.trials == 0 {
        return Err(Error::invalid("trials must be at least 1"));
    }
    game.validate()?;
    profile.check_against(game)?;
    let n = game.agents.len();
    let mut pairs = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            if let Some(volume) = relative_volume(&game.agents[i].shape, &game.agents[j].shape) {
                pairs.push(Pair {
                    i,
                    other: MarginTarget::Agent(game.agents[j].id),
                    j: Some(j),
                    volume,
                });
            }
        }
        for (k, obstacle) in obstacles.iter().enumerate() {
            pairs.push(Pair {
                i,
                other: MarginTarget::Obstacle(k),
                j: None,
                volume: collision_volume(&game.agents[i].shape, obstacle),
            });
        }
    }
    let tol = game.params.goal_tolerance;

    let outcomes: Vec<TrialOutcome> = (0..cfg.trials)
        .into_par_iter()
        .map(|trial| {
            let runs: Vec<AgentRun> = (0..n)
                .map(|i| simulate_agent(game, profile, i, trial, cfg.seed))
                .collect();
            let hit = pairs
                .iter()
                .map(|p| {
                    let gi = profile.plans[p.i].goal_step;
                    let active = p.j.map_or(gi, |j| gi.min(profile.plans[j].goal_step));
                    (0..active.min(runs[p.i].positions.len())).any(|t| {
                        let xi = runs[p.i].positions[t];
                        let rel = match p.j {
                            Some(j) => xi - runs[j].positions[t],
                            None => xi,
                        };
                        p.volume.contains(&rel)
                    })
                })
                .collect();
            let reached = (0..n)
                .map(|i| {
                    let plan = &profile.plans[i];
                    let at = plan.goal_step.min(runs[i].positions.len() - 1);
                    let agent = &game.agents[i];
                    goal_covered(&agent.shape, &runs[i].positions[at], &agent.goal, tol)
                })
                .collect();
            let max_control = runs.iter().map(|r| r.max_control).fold(0.0, f64::max);
            TrialOutcome {
                hit,
                reached,
                max_control,
                runs: if cfg.record_trajectories { runs } else { Vec::new() },
            }
        })
        .collect();

    let mut pair_trials = vec![0u64; pairs.len()];
    let mut agent_trials = vec![0u64; n];
    let mut collided = 0u64;
    let mut reached = 0u64;
    let mut goal_steps = 0u64;
    let mut max_control: f64 = 0.0;
    let mut trajectories = Vec::new();
    for (trial, o) in outcomes.iter().enumerate() {
        if o.hit.iter().any(|&h| h) {
            collided += 1;
        }
        let mut involved = vec![false; n];
        for (k, &h) in o.hit.iter().enumerate() {
            pair_trials[k] += h as u64;
            if h {
                involved[pairs[k].i] = true;
                if let Some(j) = pairs[k].j {
                    involved[j] = true;
                }
            }
        }
        for (i, &v) in involved.iter().enumerate() {
            agent_trials[i] += v as u64;
        }
        for (i, &r) in o.reached.iter().enumerate() {
            if r {
                reached += 1;
                goal_steps += profile.plans[i].goal_step as u64;
            }
        }
        max_control = max_control.max(o.max_control);
        for (i, run) in o.runs.iter().enumerate() {
            for (t, p) in run.positions.iter().enumerate() {
                trajectories.push(TrajectoryPoint {
                    trial,
                    agent: game.agents[i].id,
                    t,
                    x: p.x,
                    y: p.y,
                });
            }
        }
    }
    let trials = cfg.trials as f64;
    let rate = collided as f64 / trials;
    let collisions = pairs
        .iter()
        .zip(pair_trials)
        .map(|(p, c)| CollisionCount {
            agent: game.agents[p.i].id,
            other: p.other,
            trials: c,
        })
        .collect();
    Ok(RolloutReport {
        trials: cfg.trials,
        collision_rate: rate,
        collisions,
        agent_collision_rates: agent_trials.iter().map(|&c| c as f64 / trials).collect(),
        goal_reach_rate: reached as f64 / (trials * n as f64),
        mean_goal_step: (reached > 0).then(|| goal_steps as f64 / reached as f64),
        confidence_halfwidth: 1.96 * (rate * (1.0 - rate) / trials).sqrt(),
        max_control,
        trajectories,
    })
}

/// The empirical rate does not exceed the profile's union bound by more
/// than three half-widths.
pub fn validate_bound(report: &RolloutReport, profile: &Profile) -> bool {
    report.collision_rate <= profile.risk_bound() + 3.0 * report.confidence_halfwidth
}

/// Writes recorded trajectories as `trial,agent,t,x,y` rows.
pub fn write_trajectories_csv<W: Write>(report: &RolloutReport, mut out: W) -> Result<()> {
    writeln!(out, "trial,agent,t,x,y")?;
    for p in &report.trajectories {
        writeln!(out, "{},{},{},{},{}", p.trial, p.agent, p.t, p.x, p.y)?;
    }
    Ok(())
}
