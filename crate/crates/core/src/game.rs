//! Best-response dynamics, equilibrium checks and the social optimum.

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::milp::SolveStatus;
use crate::planner::{self, AgentSpec, Plan, PlanParams, Solver};

/// Agents sharing one set of planning parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GameSpec {
    pub agents: Vec<AgentSpec>,
    pub params: PlanParams,
}

impl GameSpec {
    pub fn new(agents: Vec<AgentSpec>, params: PlanParams) -> Result<Self> {
        let game = GameSpec { agents, params };
        game.validate()?;
        Ok(game)
    }

    pub fn validate(&self) -> Result<()> {
        if self.agents.is_empty() {
            return Err(Error::invalid("a game needs at least one agent"));
        }
        self.params.validate()?;
        for (k, a) in self.agents.iter().enumerate() {
            a.validate()?;
            for b in &self.agents[..k] {
                if a.id == b.id {
                    return Err(Error::invalid(format!("duplicate agent id {}", a.id)));
                }
                if a.start == b.start {
                    return Err(Error::invalid(format!(
                        "agents {} and {} share a start position",
                        b.id, a.id
                    )));
                }
            }
        }
        Ok(())
    }

    fn index_of(&self, id: usize) -> Option<usize> {
        self.agents.iter().position(|a| a.id == id)
    }
}

/// One plan per agent, in the game's agent order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Profile {
    pub plans: Vec<Plan>,
    pub params: PlanParams,
}

impl Profile {
    pub fn check_against(&self, game: &GameSpec) -> Result<()> {
        if self.plans.len() != game.agents.len() {
            return Err(Error::invalid(format!(
                "profile has {} plans for {} agents",
                self.plans.len(),
                game.agents.len()
            )));
        }
        for (p, a) in self.plans.iter().zip(&game.agents) {
            if p.agent_id != a.id {
                return Err(Error::invalid(format!(
                    "profile plan for agent {} out of order",
                    p.agent_id
                )));
            }
            if p.horizon() != game.params.horizon {
                return Err(Error::invalid(format!(
                    "plan of agent {} has a different horizon",
                    a.id
                )));
            }
        }
        Ok(())
    }

    pub fn total_objective(&self) -> f64 {
        self.plans.iter().map(|p| p.objective).sum()
    }

    pub fn risk_bound(&self) -> f64 {
        self.plans.iter().map(|p| p.risk_bound).sum()
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum UpdateOrder {
    /// Agents in id order every round.
    #[default]
    RoundRobin,
    /// A fresh permutation per round drawn from the seed.
    Shuffled { seed: u64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BrdOptions {
    pub max_rounds: usize,
    pub tol: f64,
    pub order: UpdateOrder,
}

impl Default for BrdOptions {
    fn default() -> Self {
        BrdOptions {
            max_rounds: 50,
            tol: 1e-6,
            order: UpdateOrder::RoundRobin,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EquilibriumResult {
    pub profile: Profile,
    pub rounds: usize,
    pub converged: bool,
    /// `history[r][i]`: objective of agent `i` after round `r + 1`.
    pub history: Vec<Vec<f64>>,
    /// Largest best-response slack of the final profile.
    pub epsilon: f64,
    /// Largest relative solver gap among the final best responses.
    pub solver_gap: f64,
}

fn others_of<'a>(game: &'a GameSpec, plans: &'a [Plan], i: usize) -> Vec<(&'a AgentSpec, &'a Plan)> {
    game.agents
        .iter()
        .zip(plans)
        .enumerate()
        .filter(|&(k, _)| k != i)
        .map(|(_, pair)| pair)
        .collect()
}

fn round_order(n: usize, order: UpdateOrder, round: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..n).collect();
    if let UpdateOrder::Shuffled { seed } = order {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(round as u64);
        for k in (1..n).rev() {
            let j = (rng.next_u64() % (k as u64 + 1)) as usize;
            idx.swap(k, j);
        }
    }
    idx
}

fn max_control_change(a: &Plan, b: &Plan) -> f64 {
    a.controls
        .iter()
        .zip(&b.controls)
        .map(|(u, v)| (u - v).amax())
        .fold(0.0, f64::max)
}

/// Iterated best responses starting from each agent's obstacle-free plan.
///
/// An agent switches to its best response only when that improves its
/// objective by more than `tol` over keeping its current controls; a round
/// in which nobody switches ends the iteration.
pub fn best_response_dynamics(game: &GameSpec, options: &BrdOptions, solver: &Solver) -> Result<EquilibriumResult> {
    game.validate()?;
    let params = &game.params;
    let mut plans: Vec<Plan> = game
        .agents
        .iter()
        .map(|a| planner::plan_mp1(a, &[], params, solver).map(|o| o.plan))
        .collect::<Result<_>>()?;
    let n = game.agents.len();
    let mut by_id: Vec<usize> = (0..n).collect();
    by_id.sort_by_key(|&i| game.agents[i].id);
    let mut history = Vec::new();
    let mut converged = false;
    let mut rounds = 0;
    while rounds < options.max_rounds {
        rounds += 1;
        let mut changed = false;
        for k in round_order(n, options.order, rounds) {
            let i = by_id[k];
            let agent = &game.agents[i];
            let (current, response) = {
                let others = others_of(game, &plans, i);
                let current = planner::evaluate_against(agent, &plans[i], &others, params, solver)?;
                let response = match planner::best_response(agent, &others, params, solver) {
                    Ok(o) => o,
                    Err(Error::NoPlan(SolveStatus::Infeasible)) => {
                        return Err(Error::BestResponseInfeasible {
                            agent: agent.id,
                            round: rounds,
                        })
                    }
                    Err(e) => return Err(e),
                };
                (current, response)
            };
            match current {
                Some(cur) if response.plan.objective >= cur.plan.objective - options.tol => plans[i] = cur.plan,
                current => {
                    let moved = max_control_change(&plans[i], &response.plan);
                    log::debug!(
                        "round {rounds}: agent {} switches (J {:?} -> {}, controls moved {moved:e})",
                        agent.id,
                        current.map(|c| c.plan.objective),
                        response.plan.objective
                    );
                    plans[i] = response.plan;
                    changed = true;
                }
            }
        }
        history.push(plans.iter().map(|p| p.objective).collect());
        if !changed {
            converged = true;
            break;
        }
    }
    // refresh margins of every plan against the final opponents
    let refreshed: Vec<Plan> = (0..n)
        .map(|i| {
            let others = others_of(game, &plans, i);
            match planner::evaluate_against(&game.agents[i], &plans[i], &others, params, solver)? {
                Some(o) => Ok(o.plan),
                None => Ok(plans[i].clone()),
            }
        })
        .collect::<Result<_>>()?;
    let profile = Profile {
        plans: refreshed,
        params: params.clone(),
    };
    let check = verify_equilibrium(game, &profile, options.tol.max(1e-9), solver)?;
    Ok(EquilibriumResult {
        profile,
        rounds,
        converged,
        history,
        epsilon: check.max_slack(),
        solver_gap: check.max_gap(),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AgentSlack {
    pub agent_id: usize,
    /// `J_i(profile) − J_i(best response)`; infinite when the agent's plan
    /// is infeasible against the others.
    pub slack: f64,
    /// The best response stopped at a limit, so `slack` is a lower bound.
    pub lower_bound_only: bool,
    pub gap: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EquilibriumCheck {
    pub is_equilibrium: bool,
    pub slacks: Vec<AgentSlack>,
}

impl EquilibriumCheck {
    pub fn max_slack(&self) -> f64 {
        self.slacks.iter().map(|s| s.slack).fold(0.0, f64::max)
    }

    pub fn max_gap(&self) -> f64 {
        self.slacks.iter().map(|s| s.gap).fold(0.0, f64::max)
    }
}

/// Best response of every agent against the fixed others, solved in parallel.
pub fn verify_equilibrium(
    game: &GameSpec,
    profile: &Profile,
    epsilon: f64,
    solver: &Solver,
) -> Result<EquilibriumCheck> {
    game.validate()?;
    profile.check_against(game)?;
    let slacks = (0..game.agents.len())
        .into_par_iter()
        .map(|i| {
            let agent = &game.agents[i];
            let others = others_of(game, &profile.plans, i);
            let current = planner::evaluate_against(agent, &profile.plans[i], &others, &game.params, solver)?;
            let response = planner::best_response(agent, &others, &game.params, solver)?;
            let slack = match current {
                Some(c) => (c.plan.objective - response.plan.objective).max(0.0),
                None => f64::INFINITY,
            };
            Ok(AgentSlack {
                agent_id: agent.id,
                slack,
                lower_bound_only: !matches!(response.solution.status, SolveStatus::Optimal),
                gap: response.solution.gap(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let is_equilibrium = slacks.iter().all(|s| s.slack <= epsilon);
    Ok(EquilibriumCheck { is_equilibrium, slacks })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SocialOutcome {
    pub profile: Profile,
    pub status: SolveStatus,
    pub objective: f64,
    pub gap: f64,
    pub nodes: u64,
}

/// Joint plan minimizing the sum of all agents' objectives.
pub fn social_optimum(game: &GameSpec, solver: &Solver) -> Result<SocialOutcome> {
    game.validate()?;
    let encoded = planner::encode_joint(&game.agents, &game.params)?;
    let solution = solver.solve(&encoded.model)?;
    if !solution.status.has_solution() {
        return Err(Error::NoPlan(solution.status));
    }
    let plans = planner::decode_profile(&solution, &encoded, &game.agents, &game.params)?;
    Ok(SocialOutcome {
        profile: Profile {
            plans,
            params: game.params.clone(),
        },
        status: solution.status,
        objective: solution.objective,
        gap: solution.gap(),
        nodes: solution.nodes_explored,
    })
}

/// Means over agents of the equilibrium and the social optimum.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub mean_j_eq: f64,
    pub mean_j_opt: f64,
    pub mean_t_eq: f64,
    pub mean_t_opt: f64,
    pub mean_g_eq: f64,
    pub mean_g_opt: f64,
}

impl Comparison {
    pub fn delta_j(&self) -> f64 {
        self.mean_j_eq - self.mean_j_opt
    }

    pub fn delta_t(&self) -> f64 {
        self.mean_t_eq - self.mean_t_opt
    }

    pub fn delta_g(&self) -> f64 {
        self.mean_g_eq - self.mean_g_opt
    }
}

fn mean(values: impl Iterator<Item = f64>) -> f64 {
    let (sum, count) = values.fold((0.0, 0usize), |(s, c), v| (s + v, c + 1));
    sum / count.max(1) as f64
}

pub fn compare_outcomes(eq: &EquilibriumResult, opt: &Profile) -> Result<Comparison> {
    let a = &eq.profile;
    if a.params != opt.params {
        return Err(Error::invalid("profiles were computed under different parameters"));
    }
    let ids = |p: &Profile| p.plans.iter().map(|x| x.agent_id).collect::<Vec<_>>();
    if ids(a) != ids(opt) {
        return Err(Error::invalid("profiles cover different agents"));
    }
    Ok(Comparison {
        mean_j_eq: mean(a.plans.iter().map(|p| p.objective)),
        mean_j_opt: mean(opt.plans.iter().map(|p| p.objective)),
        mean_t_eq: mean(a.plans.iter().map(|p| p.time_term)),
        mean_t_opt: mean(opt.plans.iter().map(|p| p.time_term)),
        mean_g_eq: mean(a.plans.iter().map(|p| p.safety_term)),
        mean_g_opt: mean(opt.plans.iter().map(|p| p.safety_term)),
    })
}

/// Index of agent `id` in the game, for callers holding ids.
pub fn agent_index(game: &GameSpec, id: usize) -> Result<usize> {
    game.index_of(id)
        .ok_or_else(|| Error::invalid(format!("no agent with id {id}")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::Vec2;

    fn square(id: usize, s: (f64, f64), g: (f64, f64)) -> AgentSpec {
        AgentSpec::square(id, Vec2::new(s.0, s.1), Vec2::new(g.0, g.1), 7.5, 10.0, 1.9, 0.0).unwrap()
    }

    fn params(lambda: f64) -> PlanParams {
        PlanParams {
            lambda,
            ..PlanParams::default()
        }
    }

    #[test]
    fn single_agent_game() {
        let a = square(0, (10.0, 50.0), (95.0, 50.0));
        let game = GameSpec::new(vec![a.clone()], params(0.5)).unwrap();
        let solver = Solver::default();
        let eq = best_response_dynamics(&game, &BrdOptions::default(), &solver).unwrap();
        assert!(eq.converged);
        assert_eq!(eq.rounds, 1);
        let mp1 = planner::plan_mp1(&a, &[], &game.params, &solver).unwrap().plan;
        assert_eq!(eq.profile.plans[0].controls, mp1.controls);
        assert!(eq.epsilon <= 1e-9);
        let opt = social_optimum(&game, &solver).unwrap();
        assert!((opt.objective - mp1.objective).abs() < 1e-6);
        let cmp = compare_outcomes(&eq, &opt.profile).unwrap();
        assert!(cmp.delta_j().abs() < 1e-9 && cmp.delta_t().abs() < 1e-9 && cmp.delta_g().abs() < 1e-9);
    }

    #[test]
    fn distant_agents_do_not_interact() {
        let a = square(0, (10.0, 50.0), (95.0, 50.0));
        let b = square(1, (1210.0, 50.0), (1295.0, 50.0));
        let game = GameSpec::new(vec![a.clone(), b.clone()], params(0.5)).unwrap();
        let solver = Solver::default();
        let eq = best_response_dynamics(&game, &BrdOptions::default(), &solver).unwrap();
        assert!(eq.converged);
        assert_eq!(eq.rounds, 1);
        let pa = planner::plan_mp1(&a, &[], &game.params, &solver).unwrap().plan;
        let pb = planner::plan_mp1(&b, &[], &game.params, &solver).unwrap().plan;
        assert_eq!(eq.profile.plans[0].controls, pa.controls);
        assert_eq!(eq.profile.plans[1].controls, pb.controls);
        let opt = social_optimum(&game, &solver).unwrap();
        assert_eq!(opt.profile.plans[0].goal_step, pa.goal_step);
        assert_eq!(opt.profile.plans[1].goal_step, pb.goal_step);
        // margins against the other agent saturate in both programs
        assert!(opt
            .profile
            .plans
            .iter()
            .all(|p| p.margins.iter().all(|m| (m.value - 4.0).abs() < 1e-9)));
    }

    #[test]
    fn opposing_agents_converge_and_verify() {
        let game = GameSpec::new(
            vec![
                square(0, (10.0, 50.0), (95.0, 50.0)),
                square(1, (90.0, 50.0), (5.0, 50.0)),
            ],
            params(0.5),
        )
        .unwrap();
        let solver = Solver::default();
        let eq = best_response_dynamics(&game, &BrdOptions::default(), &solver).unwrap();
        assert!(eq.converged, "rounds {}", eq.rounds);
        assert!(eq.rounds <= 20);
        let check = verify_equilibrium(&game, &eq.profile, 1e-4, &solver).unwrap();
        assert!(check.is_equilibrium, "{:?}", check.slacks);
        let opt = social_optimum(&game, &solver).unwrap();
        assert!(opt.profile.total_objective() <= eq.profile.total_objective() + 1e-6);
    }

    #[test]
    fn detour_is_not_a_best_response() {
        let a = square(0, (10.0, 50.0), (95.0, 50.0));
        let game = GameSpec::new(vec![a.clone()], params(1.0)).unwrap();
        let solver = Solver::default();
        let mut plan = planner::plan_mp1(&a, &[], &game.params, &solver).unwrap().plan;
        // go up first, then come back: two extra steps
        let up = Vec2::new(0.0, 10.0);
        let mut controls = vec![up];
        controls.extend(plan.controls[..9].iter().copied());
        controls.push(-up);
        controls.push(Vec2::zeros());
        let mut pos = a.start;
        let mut traj = vec![pos];
        for u in &controls {
            pos += u;
            traj.push(pos);
        }
        plan.controls = controls;
        plan.expected_trajectory = traj;
        let profile = Profile {
            plans: vec![plan],
            params: game.params.clone(),
        };
        let check = verify_equilibrium(&game, &profile, 1e-4, &solver).unwrap();
        assert!(!check.is_equilibrium);
        assert!((check.slacks[0].slack - 2.0).abs() < 1e-6, "{:?}", check.slacks);
    }

    #[test]
    fn game_validation() {
        let a = square(0, (10.0, 50.0), (95.0, 50.0));
        assert!(GameSpec::new(vec![], params(0.5)).is_err());
        assert!(GameSpec::new(vec![a.clone(), a.clone()], params(0.5)).is_err());
        let mut b = a.clone();
        b.id = 1;
        assert!(GameSpec::new(vec![a, b], params(0.5)).is_err());
    }

    #[test]
    fn shuffled_order_is_a_permutation() {
        for round in 1..10 {
            let mut o = round_order(5, UpdateOrder::Shuffled { seed: 7 }, round);
            assert_eq!(o, round_order(5, UpdateOrder::Shuffled { seed: 7 }, round));
            o.sort_unstable();
            assert_eq!(o, vec![0, 1, 2, 3, 4]);
        }
        assert_eq!(round_order(3, UpdateOrder::RoundRobin, 4), vec![0, 1, 2]);
    }
}
