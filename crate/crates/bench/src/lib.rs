//! Fixtures shared by the benchmarks in `benches/`.

use pathgame::game::{GameSpec, Profile};
use pathgame::planner::{plan_mp1, PlanParams, Solver};
use pathgame::scenario::{builtin_scenario, BuiltinOptions};

pub fn scenario_game(name: &str, lambda: f64) -> GameSpec {
    let s = builtin_scenario(name, BuiltinOptions::default()).expect("builtin");
    s.game(s.plan_params(lambda)).expect("valid game")
}

/// Each agent's obstacle-free plan, ignoring the others.
pub fn independent_profile(game: &GameSpec) -> Profile {
    let solver = Solver::default();
    let plans = game
        .agents
        .iter()
        .map(|a| plan_mp1(a, &[], &game.params, &solver).expect("plan").plan)
        .collect();
    Profile {
        plans,
        params: game.params.clone(),
    }
}

pub fn params(lambda: f64) -> PlanParams {
    PlanParams {
        horizon: 12,
        lambda,
        ..PlanParams::default()
    }
}
