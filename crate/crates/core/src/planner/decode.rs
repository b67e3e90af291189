use crate::error::{Error, Result};
use crate::milp::{MilpSolution, INTEGRALITY_TOL, VERIFY_TOL};
use crate::Vec2;

use super::encode::{Encoded, MarginVar};
use super::{plan_risk_bound, AgentSpec, MarginRecord, Plan, PlanParams};

fn verification(msg: impl Into<String>) -> Error {
    Error::PlanVerification(msg.into())
}

fn indicator(values: &[f64], v: crate::milp::VarId) -> Result<bool> {
    let x = values[v.index()];
    if (x - x.round()).abs() > INTEGRALITY_TOL || !(-INTEGRALITY_TOL..=1.0 + INTEGRALITY_TOL).contains(&x) {
        return Err(verification(format!("goal indicator value {x} is not binary")));
    }
    Ok(x > 0.5)
}

/// Largest margin the position at `values` achieves on any face, within
/// `[0, cap]`. Points on or past a face with zero coefficient get the cap.
fn achieved_margin(m: &MarginVar, values: &[f64], cap: f64) -> f64 {
    m.faces
        .iter()
        .map(|f| {
            let slack = f.expr.eval(values) - f.rhs;
            if f.coef > 0.0 {
                slack / f.coef
            } else if slack >= -VERIFY_TOL {
                cap
            } else {
                0.0
            }
        })
        .fold(0.0_f64, f64::max)
        .min(cap)
}

/// Plan of the agent at `index` in the encoding's variable map.
pub fn decode_plan(
    solution: &MilpSolution,
    encoded: &Encoded,
    index: usize,
    agent: &AgentSpec,
    params: &PlanParams,
) -> Result<Plan> {
    let plan = decode_unchecked(solution, encoded, index, agent, params)?;
    if encoded.vars.agents.len() == 1 {
        check_objective(plan.objective, solution.objective)?;
    }
    Ok(plan)
}

/// Plans of every agent in a joint encoding, in variable-map order.
pub fn decode_profile(
    solution: &MilpSolution,
    encoded: &Encoded,
    agents: &[AgentSpec],
    params: &PlanParams,
) -> Result<Vec<Plan>> {
    if agents.len() != encoded.vars.agents.len() {
        return Err(Error::invalid("agent list does not match the encoding"));
    }
    let plans = agents
        .iter()
        .enumerate()
        .map(|(i, a)| decode_unchecked(solution, encoded, i, a, params))
        .collect::<Result<Vec<_>>>()?;
    check_objective(plans.iter().map(|p| p.objective).sum(), solution.objective)?;
    Ok(plans)
}

fn check_objective(decoded: f64, solver: f64) -> Result<()> {
    if (decoded - solver).abs() > 1e-6 * solver.abs().max(1.0) {
        return Err(verification(format!(
            "decoded objective {decoded} differs from solver objective {solver}"
        )));
    }
    Ok(())
}

fn decode_unchecked(
    solution: &MilpSolution,
    encoded: &Encoded,
    index: usize,
    agent: &AgentSpec,
    params: &PlanParams,
) -> Result<Plan> {
    if !solution.status.has_solution() {
        return Err(Error::NoPlan(solution.status));
    }
    let values = &solution.values;
    if values.len() != encoded.model.num_vars() {
        return Err(verification(format!(
            "solution has {} values for {} variables",
            values.len(),
            encoded.model.num_vars()
        )));
    }
    let av = encoded
        .vars
        .agents
        .get(index)
        .ok_or_else(|| Error::invalid(format!("no agent at index {index}")))?;
    if av.agent_id != agent.id {
        return Err(Error::invalid(format!(
            "encoding holds agent {} at index {index}, not {}",
            av.agent_id, agent.id
        )));
    }

    let goal_indicators = av
        .goal
        .iter()
        .map(|&d| indicator(values, d))
        .collect::<Result<Vec<_>>>()?;
    let hits = goal_indicators.iter().filter(|&&d| d).count();
    if hits != 1 {
        return Err(verification(format!(
            "agent {}: {hits} goal indicators set, expected 1",
            agent.id
        )));
    }
    let goal_step = goal_indicators.iter().position(|&d| d).unwrap_or_default();

    let bound = agent.control_bound + VERIFY_TOL;
    let mut controls = Vec::with_capacity(av.controls.len());
    for (t, ids) in av.controls.iter().enumerate() {
        let u = if t < goal_step {
            Vec2::new(values[ids[0].index()], values[ids[1].index()])
        } else {
            Vec2::zeros()
        };
        if u.amax() > bound {
            return Err(verification(format!(
                "agent {}: control {t} exceeds the bound",
                agent.id
            )));
        }
        controls.push(u);
    }
    let mut trajectory = Vec::with_capacity(controls.len() + 1);
    trajectory.push(agent.start);
    for t in 0..controls.len() {
        let next = if t < goal_step {
            agent.a * trajectory[t] + agent.b * controls[t]
        } else {
            trajectory[t]
        };
        trajectory.push(next);
    }
    let miss = (trajectory[goal_step] - agent.goal).lp_norm(1);
    if miss > params.goal_tolerance.max(VERIFY_TOL) {
        return Err(verification(format!(
            "agent {}: expected position at step {goal_step} misses the goal by {miss:e}",
            agent.id
        )));
    }

    let cap = params.margin_cap;
    let mut margins = Vec::new();
    for m in encoded.vars.margins.iter().filter(|m| m.agent == index) {
        let Some(s) = m.s else {
            margins.push(MarginRecord {
                target: m.target,
                t: m.t,
                face: None,
                value: cap,
                constrained: false,
            });
            continue;
        };
        let opponent_done = m.opponent_goal[..m.opponent_goal.len().min(m.t + 1)]
            .iter()
            .any(|&d| values[d.index()] > 0.5);
        let relaxed = m.t >= goal_step || opponent_done;
        let value = if relaxed {
            values[s.index()].clamp(0.0, cap)
        } else if params.lambda >= 1.0 {
            achieved_margin(m, values, cap)
        } else {
            values[s.index()].clamp(0.0, cap)
        };
        let separates = |f: &&super::FaceRow| f.expr.eval(values) - f.coef * value >= f.rhs - VERIFY_TOL;
        let face = m
            .faces
            .iter()
            .position(|f| values[f.z.index()] > 0.5 && separates(&f))
            .or_else(|| m.faces.iter().position(|f| separates(&f)));
        if !relaxed && face.is_none() {
            return Err(verification(format!(
                "agent {}: no face separates it from {:?} at step {} with margin {value}",
                agent.id, m.target, m.t
            )));
        }
        let value = if relaxed && params.lambda >= 1.0 { cap } else { value };
        margins.push(MarginRecord {
            target: m.target,
            t: m.t,
            face,
            value,
            constrained: !opponent_done,
        });
    }

    let lambda = params.lambda;
    let safety_term = -margins.iter().map(|m| m.value).sum::<f64>();
    let time_term = goal_step as f64;
    let mut plan = Plan {
        agent_id: agent.id,
        controls,
        expected_trajectory: trajectory,
        goal_step,
        goal_indicators,
        margins,
        safety_term,
        time_term,
        objective: lambda * time_term + (1.0 - lambda) * safety_term,
        risk_bound: 0.0,
        lambda,
    };
    plan.risk_bound = plan_risk_bound(&plan);
    Ok(plan)
}
