use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::geometry::{collision_volume, hausdorff_distance, AgentShape, Polytope};
use crate::milp::{LinExpr, MilpModel, Sense, VarId};
use crate::stochastic::{margin_coefficient, CovarianceSchedule};
use crate::Vec2;

use super::{AgentSpec, MarginTarget, Plan, PlanParams};

/// Variables and affine position expressions of one agent.
#[derive(Clone, Debug)]
pub struct AgentVars {
    pub agent_id: usize,
    /// `ū_t` for `t = 0..H-1`.
    pub controls: Vec<[VarId; 2]>,
    /// `r̄_t` for `t = 0..=H`, affine in the controls (or state variables).
    pub positions: Vec<[LinExpr; 2]>,
    /// Goal indicators `d_t` for `t = 0..=H`.
    pub goal: Vec<VarId>,
    pub covariance: CovarianceSchedule,
}

impl AgentVars {
    pub fn position_value(&self, t: usize, values: &[f64]) -> Vec2 {
        Vec2::new(self.positions[t][0].eval(values), self.positions[t][1].eval(values))
    }
}

/// One half-space row `expr − coef·s ≥ rhs` of a collision disjunction,
/// active when `z = 1` and no relaxing indicator is set.
#[derive(Clone, Debug)]
pub struct FaceRow {
    pub z: VarId,
    /// `aᵀ r̄_t − aᵀ Δ_t`.
    pub expr: LinExpr,
    pub rhs: f64,
    pub coef: f64,
    pub big_m: f64,
}

/// Margin `s(target, t)` of one agent. `s` is `None` for steps past an
/// opponent's goal in the best-response program, where the margin sits at
/// the cap as a constant.
#[derive(Clone, Debug)]
pub struct MarginVar {
    /// Index into [`VarMap::agents`].
    pub agent: usize,
    pub target: MarginTarget,
    pub t: usize,
    pub s: Option<VarId>,
    pub faces: Vec<FaceRow>,
    /// Goal indicators of the other agent in the joint program.
    pub opponent_goal: Vec<VarId>,
}

#[derive(Clone, Debug)]
pub struct VarMap {
    pub agents: Vec<AgentVars>,
    pub margins: Vec<MarginVar>,
}

#[derive(Clone, Debug)]
pub struct Encoded {
    pub model: MilpModel,
    pub vars: VarMap,
}

const REACH_TOL: f64 = 1e-9;

fn check_horizon(agent: &AgentSpec, params: &PlanParams) -> Result<()> {
    if let Some(steps) = agent.min_steps_to_goal() {
        if steps > params.horizon {
            return Err(Error::InfeasibleSetup(format!(
                "agent {}: horizon {} too short, goal needs at least {steps} steps",
                agent.id, params.horizon
            )));
        }
    }
    Ok(())
}

/// Adds controls, positions, goal indicators and goal rows for one agent and
/// returns its objective time term `Σ t·d_t`.
fn add_agent(model: &mut MilpModel, agent: &AgentSpec, params: &PlanParams) -> Result<(AgentVars, LinExpr)> {
    agent.validate()?;
    check_horizon(agent, params)?;
    let h = params.horizon;
    let id = agent.id;
    let vmax = agent.control_bound;
    let mut controls = Vec::with_capacity(h);
    for t in 0..h {
        let ux = model.add_continuous(-vmax, vmax, format!("u{id}_{t}_x"))?;
        let uy = model.add_continuous(-vmax, vmax, format!("u{id}_{t}_y"))?;
        controls.push([ux, uy]);
    }
    let mut positions: Vec<[LinExpr; 2]> = Vec::with_capacity(h + 1);
    positions.push([LinExpr::constant(agent.start.x), LinExpr::constant(agent.start.y)]);
    if agent.is_single_integrator() {
        for t in 0..h {
            let mut next = positions[t].clone();
            next[0].add_term(controls[t][0], 1.0);
            next[1].add_term(controls[t][1], 1.0);
            positions.push(next);
        }
    } else {
        let bound = params.big_m;
        for t in 0..h {
            let x = model.add_continuous(-bound, bound, format!("r{id}_{}_x", t + 1))?;
            let y = model.add_continuous(-bound, bound, format!("r{id}_{}_y", t + 1))?;
            let next = [LinExpr::var(x), LinExpr::var(y)];
            for (c, next_c) in next.iter().enumerate() {
                // r_{t+1,c} − Σ_k A[c,k] r_{t,k} − Σ_k B[c,k] u_{t,k} = 0
                let mut row = next_c.clone();
                for k in 0..2 {
                    row.add_scaled(&positions[t][k], -agent.a[(c, k)]);
                    row.add_term(controls[t][k], -agent.b[(c, k)]);
                }
                model.add_expr_constraint(format!("dyn{id}_{}_{c}", t + 1), &row, Sense::Eq, 0.0)?;
            }
            positions.push(next);
        }
    }

    let mut goal = Vec::with_capacity(h + 1);
    let mut time_term = LinExpr::default();
    let goal_xy = [agent.goal.x, agent.goal.y];
    for (t, pos) in positions.iter().enumerate() {
        let d = model.add_binary(format!("d{id}_{t}"));
        model.set_priority(d, 1)?;
        goal.push(d);
        time_term.add_term(d, t as f64);
        let mut reachable = true;
        for c in 0..2 {
            let g = goal_xy[c];
            let (lo, hi) = (pos[c].lower_bound(model), pos[c].upper_bound(model));
            let m = if params.tighten_big_m {
                if g < lo - REACH_TOL || g > hi + REACH_TOL {
                    reachable = false;
                }
                (hi - g).max(g - lo).max(0.0).min(params.big_m)
            } else {
                params.big_m
            };
            // r̄ − g ≤ M(1 − d)  and  r̄ − g ≥ −M(1 − d)
            let mut up = pos[c].clone();
            up.add_term(d, m);
            model.add_expr_constraint(format!("goal{id}_{t}_{c}_hi"), &up, Sense::Le, g + m)?;
            let mut down = pos[c].clone();
            down.add_term(d, -m);
            model.add_expr_constraint(format!("goal{id}_{t}_{c}_lo"), &down, Sense::Ge, g - m)?;
        }
        if !reachable {
            model.set_bounds(d, 0.0, 0.0)?;
        }
    }
    let terms: Vec<_> = goal.iter().map(|&d| (d, 1.0)).collect();
    model.add_named_constraint(format!("goal{id}_once"), &terms, Sense::Eq, 1.0)?;

    let vars = AgentVars {
        agent_id: id,
        controls,
        positions,
        goal,
        covariance: agent.covariance(h),
    };
    Ok((vars, time_term))
}

/// Collision disjunction for the volume `K + Δ` where `Δ` is affine:
/// `Σ_p z_p ≥ 1` and `aᵀ r̄ − aᵀΔ − coef_p s + M_p(1 − z_p) + M_p Σ relax ≥ b_p`.
#[allow(clippy::too_many_arguments)]
fn add_disjunction(
    model: &mut MilpModel,
    params: &PlanParams,
    label: &str,
    position: &[LinExpr; 2],
    volume: &Polytope,
    shift: &[LinExpr; 2],
    cov: &crate::Mat2,
    relax: &[VarId],
    s: VarId,
    shared_z: Option<&[VarId]>,
) -> Result<Vec<FaceRow>> {
    let mut rows = Vec::with_capacity(volume.faces().len());
    let mut zs = Vec::with_capacity(volume.faces().len());
    for (p, face) in volume.faces().iter().enumerate() {
        let a = face.normal;
        let mut expr = LinExpr::default();
        expr.add_scaled(&position[0], a.x).add_scaled(&position[1], a.y);
        expr.add_scaled(&shift[0], -a.x).add_scaled(&shift[1], -a.y);
        let coef = margin_coefficient(&a, cov, params.margin_convention);
        let big_m = if params.tighten_big_m {
            (face.offset + coef * params.margin_cap - expr.lower_bound(model))
                .max(0.0)
                .min(params.big_m)
        } else {
            params.big_m
        };
        let z = match shared_z {
            Some(z) => z[p],
            None => model.add_binary(format!("z_{label}_{p}")),
        };
        zs.push((z, 1.0));
        let mut row = expr.clone();
        row.add_term(s, -coef).add_term(z, -big_m);
        for &d in relax {
            row.add_term(d, big_m);
        }
        model.add_expr_constraint(format!("avoid_{label}_{p}"), &row, Sense::Ge, face.offset - big_m)?;
        rows.push(FaceRow {
            z,
            expr,
            rhs: face.offset,
            coef,
            big_m,
        });
    }
    if shared_z.is_none() {
        model.add_named_constraint(format!("pick_{label}"), &zs, Sense::Ge, 1.0)?;
    }
    Ok(rows)
}

fn constant_shift(delta: Vec2) -> [LinExpr; 2] {
    [LinExpr::constant(delta.x), LinExpr::constant(delta.y)]
}

fn finish(mut model: MilpModel, params: &PlanParams, vars: VarMap, time_terms: Vec<LinExpr>) -> Result<Encoded> {
    let lambda = params.lambda;
    let mut objective = LinExpr::default();
    for t in &time_terms {
        objective.add_scaled(t, lambda);
    }
    for m in &vars.margins {
        match m.s {
            Some(s) => objective.add_term(s, -(1.0 - lambda)),
            None => objective.add_constant(-(1.0 - lambda) * params.margin_cap),
        };
    }
    model.set_objective(&objective)?;
    Ok(Encoded { model, vars })
}

/// Single agent against static obstacles.
pub fn encode_mp1(agent: &AgentSpec, obstacles: &[Polytope], params: &PlanParams) -> Result<Encoded> {
    params.validate()?;
    let mut model = MilpModel::new(format!("mp1_agent{}", agent.id));
    let (av, time_term) = add_agent(&mut model, agent, params)?;
    let mut margins = Vec::new();
    for (n, obstacle) in obstacles.iter().enumerate() {
        let volume = collision_volume(&agent.shape, obstacle);
        if volume.contains(&agent.start) {
            return Err(Error::InfeasibleSetup(format!(
                "agent {} starts inside the collision volume of obstacle {n}",
                agent.id
            )));
        }
        if volume.contains(&agent.goal) {
            return Err(Error::InfeasibleSetup(format!(
                "agent {} goal lies inside the collision volume of obstacle {n}",
                agent.id
            )));
        }
        for t in 0..=params.horizon {
            let label = format!("{}_o{n}_{t}", agent.id);
            let s = model.add_continuous(0.0, params.margin_cap, format!("s_{label}"))?;
            let faces = add_disjunction(
                &mut model,
                params,
                &label,
                &av.positions[t],
                &volume,
                &constant_shift(Vec2::zeros()),
                av.covariance.at(t),
                &av.goal[..=t],
                s,
                None,
            )?;
            margins.push(MarginVar {
                agent: 0,
                target: MarginTarget::Obstacle(n),
                t,
                s: Some(s),
                faces,
                opponent_goal: Vec::new(),
            });
        }
    }
    let vars = VarMap {
        agents: vec![av],
        margins,
    };
    finish(model, params, vars, vec![time_term])
}

/// Volume of reference positions of `i` that overlap agent `j` placed at `at_j`.
/// `None` when both agents are points.
fn pair_volume(shape_i: &AgentShape, shape_j: &AgentShape, at_j: &Vec2) -> Option<Polytope> {
    match (shape_j.placed(at_j), shape_i) {
        (Some(body), _) => Some(collision_volume(shape_i, &body)),
        (None, AgentShape::Region(c)) => Some(c.negate().translate(at_j)),
        (None, AgentShape::Point) => None,
    }
}

/// Best response of `agent` to the fixed plans of the others.
pub fn encode_mp2(agent: &AgentSpec, others: &[(&AgentSpec, &Plan)], params: &PlanParams) -> Result<Encoded> {
    params.validate()?;
    let h = params.horizon;
    let mut model = MilpModel::new(format!("mp2_agent{}", agent.id));
    let (av, time_term) = add_agent(&mut model, agent, params)?;
    let mut margins = Vec::new();
    for (opp, plan) in others {
        if opp.id == agent.id {
            return Err(Error::invalid(format!("agent {} listed as its own opponent", agent.id)));
        }
        if plan.expected_trajectory.is_empty() || plan.goal_indicators.iter().filter(|&&d| d).count() != 1 {
            return Err(Error::invalid(format!("plan of agent {} is incomplete", opp.id)));
        }
        let target = MarginTarget::Agent(opp.id);
        let Some(volume) = pair_volume(&agent.shape, &opp.shape, &opp.start) else {
            continue;
        };
        if volume.translate(&(plan.position(0) - opp.start)).contains(&agent.start) {
            return Err(Error::InfeasibleSetup(format!(
                "agents {} and {} overlap at their start positions",
                agent.id, opp.id
            )));
        }
        let cov = av.covariance.combined(&opp.covariance(h));
        let last_constrained = plan.goal_step.min(h);
        for t in 0..=h {
            if t > last_constrained {
                margins.push(MarginVar {
                    agent: 0,
                    target,
                    t,
                    s: None,
                    faces: Vec::new(),
                    opponent_goal: Vec::new(),
                });
                continue;
            }
            let label = format!("{}_a{}_{t}", agent.id, opp.id);
            let s = model.add_continuous(0.0, params.margin_cap, format!("s_{label}"))?;
            let shift = constant_shift(plan.position(t) - opp.start);
            let faces = add_disjunction(
                &mut model,
                params,
                &label,
                &av.positions[t],
                &volume,
                &shift,
                cov.at(t),
                &av.goal[..=t],
                s,
                None,
            )?;
            margins.push(MarginVar {
                agent: 0,
                target,
                t,
                s: Some(s),
                faces,
                opponent_goal: Vec::new(),
            });
        }
    }
    let vars = VarMap {
        agents: vec![av],
        margins,
    };
    finish(model, params, vars, vec![time_term])
}

const SYMMETRY_TOL: f64 = 1e-9;

/// For each face of `volume`, the index of the face of `mirror` with the
/// opposite normal.
fn mirrored_faces(volume: &Polytope, mirror: &Polytope) -> Option<Vec<usize>> {
    volume
        .faces()
        .iter()
        .map(|f| {
            mirror
                .faces()
                .iter()
                .position(|g| f.normal.dot(&g.normal) < -1.0 + SYMMETRY_TOL)
        })
        .collect()
}

/// Joint program over all agents minimizing the sum of their objectives,
/// with collision rows for every ordered pair. The pairs `(i, j)` and
/// `(j, i)` constrain the same relative position, so they share face
/// binaries.
pub fn encode_joint(agents: &[AgentSpec], params: &PlanParams) -> Result<Encoded> {
    params.validate()?;
    let h = params.horizon;
    for (k, a) in agents.iter().enumerate() {
        if agents[..k].iter().any(|b| b.id == a.id) {
            return Err(Error::invalid(format!("duplicate agent id {}", a.id)));
        }
    }
    let mut model = MilpModel::new("mp3");
    let mut blocks = Vec::with_capacity(agents.len());
    let mut time_terms = Vec::with_capacity(agents.len());
    for agent in agents {
        let (av, tt) = add_agent(&mut model, agent, params)?;
        blocks.push(av);
        time_terms.push(tt);
    }
    let mut margins = Vec::new();
    // (i, j) with i < j -> (volume, face binaries per step)
    type PairFaces = (Polytope, Vec<Vec<VarId>>);
    let mut first_of_pair: HashMap<(usize, usize), PairFaces> = HashMap::new();
    for (i, ai) in agents.iter().enumerate() {
        for (j, aj) in agents.iter().enumerate() {
            if i == j {
                continue;
            }
            let Some(volume) = pair_volume(&ai.shape, &aj.shape, &aj.start) else {
                continue;
            };
            if volume.contains(&ai.start) {
                return Err(Error::InfeasibleSetup(format!(
                    "agents {} and {} overlap at their start positions",
                    ai.id, aj.id
                )));
            }
            // K_ij − r_j0 must mirror K_ji − r_i0
            if let Some(mirror) = pair_volume(&aj.shape, &ai.shape, &ai.start) {
                let rel_ij = volume.translate(&-aj.start);
                let rel_ji = mirror.translate(&-ai.start).negate();
                let d = hausdorff_distance(&rel_ij, &rel_ji);
                if d > SYMMETRY_TOL {
                    return Err(Error::Solver(format!(
                        "collision volumes of agents {} and {} are not mirror images (distance {d:e})",
                        ai.id, aj.id
                    )));
                }
            }
            let cov = blocks[i].covariance.combined(&blocks[j].covariance);
            let shared = if i > j {
                first_of_pair
                    .get(&(j, i))
                    .and_then(|(mirror, zs)| mirrored_faces(&volume, mirror).map(|map| (map, zs)))
            } else {
                None
            };
            let mut pair_z = Vec::with_capacity(h + 1);
            for t in 0..=h {
                let label = format!("{}_a{}_{t}", ai.id, aj.id);
                let s = model.add_continuous(0.0, params.margin_cap, format!("s_{label}"))?;
                let mut shift = blocks[j].positions[t].clone();
                shift[0].add_constant(-aj.start.x);
                shift[1].add_constant(-aj.start.y);
                let mut relax: Vec<VarId> = blocks[i].goal[..=t].to_vec();
                relax.extend_from_slice(&blocks[j].goal[..=t]);
                let shared_z: Option<Vec<VarId>> =
                    shared.as_ref().map(|(map, zs)| map.iter().map(|&q| zs[t][q]).collect());
                let faces = add_disjunction(
                    &mut model,
                    params,
                    &label,
                    &blocks[i].positions[t],
                    &volume,
                    &shift,
                    cov.at(t),
                    &relax,
                    s,
                    shared_z.as_deref(),
                )?;
                pair_z.push(faces.iter().map(|f| f.z).collect());
                margins.push(MarginVar {
                    agent: i,
                    target: MarginTarget::Agent(aj.id),
                    t,
                    s: Some(s),
                    faces,
                    opponent_goal: blocks[j].goal.clone(),
                });
            }
            if i < j {
                first_of_pair.insert((i, j), (volume, pair_z));
            }
        }
    }
    let vars = VarMap {
        agents: blocks,
        margins,
    };
    finish(model, params, vars, time_terms)
}
