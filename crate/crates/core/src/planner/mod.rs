//! Chance-constrained planning programs for a single agent: against static
//! obstacles, and as a best response to other agents' fixed plans. The
//! joint program over all agents shares the same building blocks.

mod decode;
mod encode;

use std::sync::Arc;

use serde::{Deserialize, Serialize};

pub use decode::{decode_plan, decode_profile};
pub use encode::{encode_joint, encode_mp1, encode_mp2, AgentVars, Encoded, FaceRow, MarginVar, VarMap};

use crate::error::{Error, Result};
use crate::geometry::{AgentShape, Polytope};
use crate::milp::{BranchAndBound, MilpBackend, MilpModel, MilpSolution, SolveOptions, SolveStatus};
use crate::stochastic::{self, CovarianceSchedule, MarginConvention, NoiseModel};
use crate::{Mat2, Vec2};

/// One agent: linear dynamics `r' = A r + B u + ω`, box controls, start/goal
/// positions and a scalar error-feedback gain.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AgentSpec {
    pub id: usize,
    pub shape: AgentShape,
    pub a: Mat2,
    pub b: Mat2,
    pub noise: NoiseModel,
    /// Per-axis bound `|u| <= control_bound`.
    pub control_bound: f64,
    pub start: Vec2,
    pub goal: Vec2,
    pub feedback_gain: f64,
}

impl AgentSpec {
    /// Square agent with single-integrator dynamics (`A = B = I`) and
    /// isotropic noise `sigma_scale · I`.
    pub fn square(
        id: usize,
        start: Vec2,
        goal: Vec2,
        half_extent: f64,
        vmax: f64,
        sigma_scale: f64,
        feedback_gain: f64,
    ) -> Result<Self> {
        let spec = AgentSpec {
            id,
            shape: AgentShape::rect(Vec2::new(half_extent, half_extent))?,
            a: Mat2::identity(),
            b: Mat2::identity(),
            noise: NoiseModel::isotropic(sigma_scale)?,
            control_bound: vmax,
            start,
            goal,
            feedback_gain,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.control_bound > 0.0) || !self.control_bound.is_finite() {
            return Err(Error::invalid(format!(
                "agent {}: control bound must be positive",
                self.id
            )));
        }
        if !(self.feedback_gain >= 0.0) {
            return Err(Error::invalid(format!("agent {}: feedback gain must be >= 0", self.id)));
        }
        Ok(())
    }

    pub fn is_single_integrator(&self) -> bool {
        self.a == Mat2::identity() && self.b == Mat2::identity()
    }

    pub fn closed_loop(&self) -> Mat2 {
        stochastic::closed_loop_matrix(&self.a, &self.b, self.feedback_gain)
    }

    pub fn covariance(&self, horizon: usize) -> CovarianceSchedule {
        stochastic::propagate_covariance(&self.closed_loop(), &self.noise, horizon)
    }

    /// Fewest steps to the goal without obstacles (single integrator only).
    pub fn min_steps_to_goal(&self) -> Option<usize> {
        if !self.is_single_integrator() {
            return None;
        }
        let d = (self.goal - self.start).amax();
        Some((d / self.control_bound - 1e-9).ceil().max(0.0) as usize)
    }

    /// Body placed at the start position.
    pub fn body_at_start(&self) -> Option<Polytope> {
        self.shape.placed(&self.start)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlanParams {
    /// Number of control steps; positions are indexed `0..=horizon`.
    pub horizon: usize,
    /// Weight on time-to-goal; `1 − lambda` weighs the safety term.
    pub lambda: f64,
    pub big_m: f64,
    /// Upper bound on each margin variable.
    pub margin_cap: f64,
    pub goal_tolerance: f64,
    pub margin_convention: MarginConvention,
    /// Replace the uniform big-M by the smallest valid constant per row,
    /// computed from variable bounds (never larger than `big_m`).
    pub tighten_big_m: bool,
}

impl Default for PlanParams {
    fn default() -> Self {
        PlanParams {
            horizon: 12,
            lambda: 0.5,
            big_m: 1e4,
            margin_cap: 4.0,
            goal_tolerance: 1e-6,
            margin_convention: MarginConvention::Gaussian,
            tighten_big_m: true,
        }
    }
}

impl PlanParams {
    pub fn validate(&self) -> Result<()> {
        if self.horizon < 1 {
            return Err(Error::invalid("horizon must be at least 1"));
        }
        if !(0.0..=1.0).contains(&self.lambda) {
            return Err(Error::invalid(format!("lambda {} outside [0, 1]", self.lambda)));
        }
        if !(self.big_m > 0.0) || !self.big_m.is_finite() {
            return Err(Error::invalid("big_m must be positive and finite"));
        }
        if !(self.margin_cap > 0.0) || stochastic::erf(self.margin_cap) < 1.0 - 1e-7 {
            return Err(Error::invalid(format!(
                "margin cap {} too small: erf(cap) must be >= 1 - 1e-7",
                self.margin_cap
            )));
        }
        if !(self.goal_tolerance >= 0.0) {
            return Err(Error::invalid("goal tolerance must be >= 0"));
        }
        Ok(())
    }

    /// Checks `big_m` against a workspace of the given diameter.
    pub fn check_big_m(&self, workspace_diameter: f64) -> Result<()> {
        if self.big_m < 10.0 * workspace_diameter {
            return Err(Error::invalid(format!(
                "big_m {} must exceed 10 x workspace diameter ({workspace_diameter})",
                self.big_m
            )));
        }
        Ok(())
    }
}

/// Who a margin variable protects against.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum MarginTarget {
    Obstacle(usize),
    Agent(usize),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MarginRecord {
    pub target: MarginTarget,
    pub t: usize,
    /// Face chosen by the disjunction, if the step carries collision rows.
    pub face: Option<usize>,
    pub value: f64,
    /// The step carries collision rows (not padding past an opponent's goal).
    pub constrained: bool,
}

/// Decoded plan for one agent.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Plan {
    pub agent_id: usize,
    /// Nominal controls `ū_0 .. ū_{H-1}`; zero from the goal step on.
    pub controls: Vec<Vec2>,
    /// Expected positions `r̄_0 .. r̄_H`; held at the goal after arrival.
    pub expected_trajectory: Vec<Vec2>,
    pub goal_step: usize,
    pub goal_indicators: Vec<bool>,
    pub margins: Vec<MarginRecord>,
    /// `G = −Σ s`.
    pub safety_term: f64,
    /// `T_goal`.
    pub time_term: f64,
    /// `J = λ T + (1 − λ) G`.
    pub objective: f64,
    pub risk_bound: f64,
    pub lambda: f64,
}

impl Plan {
    pub fn horizon(&self) -> usize {
        self.controls.len()
    }

    /// Position at step `t`, held at the last entry past the horizon.
    pub fn position(&self, t: usize) -> Vec2 {
        let last = self.expected_trajectory.len() - 1;
        self.expected_trajectory[t.min(last)]
    }
}

/// Sum of per-face risks over the constrained margins up to the goal step.
pub fn plan_risk_bound(plan: &Plan) -> f64 {
    plan.margins
        .iter()
        .filter(|m| m.constrained && m.t <= plan.goal_step)
        .map(|m| stochastic::risk_from_margin(m.value))
        .sum()
}

/// Backend plus limits used for every program a caller solves.
#[derive(Clone)]
pub struct Solver {
    backend: Arc<dyn MilpBackend>,
    pub options: SolveOptions,
}

impl std::fmt::Debug for Solver {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Solver")
            .field("backend", &self.backend.name())
            .field("options", &self.options)
            .finish()
    }
}

impl Default for Solver {
    fn default() -> Self {
        Solver::new(SolveOptions::default())
    }
}

impl Solver {
    pub fn new(options: SolveOptions) -> Self {
        Solver {
            backend: Arc::new(BranchAndBound),
            options,
        }
    }

    pub fn with_backend(backend: Arc<dyn MilpBackend>, options: SolveOptions) -> Self {
        Solver { backend, options }
    }

    pub fn solve(&self, model: &MilpModel) -> Result<MilpSolution> {
        self.backend.solve(model, &self.options)
    }
}

/// Plan together with the solver outcome it came from.
#[derive(Clone, Debug)]
pub struct PlanOutcome {
    pub plan: Plan,
    pub solution: MilpSolution,
}

fn solve_single(encoded: &Encoded, agent: &AgentSpec, params: &PlanParams, solver: &Solver) -> Result<PlanOutcome> {
    let solution = solver.solve(&encoded.model)?;
    if !solution.status.has_solution() {
        return Err(Error::NoPlan(solution.status));
    }
    let plan = decode_plan(&solution, encoded, 0, agent, params)?;
    Ok(PlanOutcome { plan, solution })
}

/// Minimum-objective plan past static obstacles.
pub fn plan_mp1(
    agent: &AgentSpec,
    obstacles: &[Polytope],
    params: &PlanParams,
    solver: &Solver,
) -> Result<PlanOutcome> {
    let encoded = encode_mp1(agent, obstacles, params)?;
    solve_single(&encoded, agent, params, solver)
}

/// Best response of `agent` to the fixed plans of `others`.
pub fn best_response(
    agent: &AgentSpec,
    others: &[(&AgentSpec, &Plan)],
    params: &PlanParams,
    solver: &Solver,
) -> Result<PlanOutcome> {
    let encoded = encode_mp2(agent, others, params)?;
    solve_single(&encoded, agent, params, solver)
}

/// Objective `agent` gets from following `plan.controls` against `others`.
///
/// `Ok(None)` when those controls cannot satisfy the collision rows with
/// nonnegative margins.
pub fn evaluate_against(
    agent: &AgentSpec,
    plan: &Plan,
    others: &[(&AgentSpec, &Plan)],
    params: &PlanParams,
    solver: &Solver,
) -> Result<Option<PlanOutcome>> {
    let mut encoded = encode_mp2(agent, others, params)?;
    let vars = &encoded.vars.agents[0];
    let pinned: Vec<_> = vars
        .controls
        .iter()
        .zip(&plan.controls)
        .flat_map(|(ids, u)| [(ids[0], u.x), (ids[1], u.y)])
        .collect();
    for (id, value) in pinned {
        encoded.model.set_bounds(id, value, value)?;
    }
    let solution = solver.solve(&encoded.model)?;
    match solution.status {
        SolveStatus::Infeasible => Ok(None),
        s if s.has_solution() => {
            let plan = decode_plan(&solution, &encoded, 0, agent, params)?;
            Ok(Some(PlanOutcome { plan, solution }))
        }
        s => Err(Error::NoPlan(s)),
    }
}
