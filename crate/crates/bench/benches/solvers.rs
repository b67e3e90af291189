use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use pathgame::game::{best_response_dynamics, social_optimum, BrdOptions};
use pathgame::geometry::Polytope;
use pathgame::milp::{solve, LinExpr, MilpModel, Sense, SolveOptions};
use pathgame::montecarlo::{rollout, RolloutConfig};
use pathgame::planner::{plan_mp1, AgentSpec, Solver};
use pathgame::Vec2;
use pathgame_bench::{independent_profile, params, scenario_game};

/// 0/1 knapsack with 20 items; weights and values from a fixed LCG.
fn knapsack() -> MilpModel {
    let mut m = MilpModel::new("knapsack");
    let mut state = 12345u64;
    let mut next = || {
        state = state
            .wrapping_mul(6364136223846793005)
            .wrapping_add(1442695040888963407);
        ((state >> 33) % 40 + 1) as f64
    };
    let mut weight = Vec::new();
    let mut value = LinExpr::default();
    for i in 0..20 {
        let x = m.add_binary(format!("x{i}"));
        weight.push((x, next()));
        value.add_term(x, -next());
    }
    m.add_constraint(&weight, Sense::Le, 150.0).unwrap();
    m.set_objective(&value).unwrap();
    m
}

fn milp(c: &mut Criterion) {
    let model = knapsack();
    c.bench_function("milp_knapsack_20", |b| {
        b.iter(|| solve(black_box(&model), &SolveOptions::default()).unwrap())
    });
}

fn planners(c: &mut Criterion) {
    let solver = Solver::default();
    let agent = AgentSpec::square(0, Vec2::new(10.0, 50.0), Vec2::new(95.0, 50.0), 7.5, 10.0, 1.9, 0.0).unwrap();
    let obstacle = [Polytope::rect(Vec2::new(50.0, 50.0), Vec2::new(8.0, 8.0)).unwrap()];
    let p = params(0.5);
    c.bench_function("mp1_free", |b| b.iter(|| plan_mp1(&agent, &[], &p, &solver).unwrap()));
    c.bench_function("mp1_obstacle", |b| {
        b.iter(|| plan_mp1(&agent, &obstacle, &p, &solver).unwrap())
    });

    let opposing = scenario_game("opposing", 0.5);
    let mut group = c.benchmark_group("games");
    group.sample_size(10);
    group.bench_function("brd_opposing", |b| {
        b.iter(|| best_response_dynamics(&opposing, &BrdOptions::default(), &solver).unwrap())
    });
    group.bench_function("mp3_opposing", |b| {
        b.iter(|| social_optimum(&opposing, &solver).unwrap())
    });
    group.finish();
}

fn rollouts(c: &mut Criterion) {
    let game = scenario_game("intersection3", 0.5);
    let profile = independent_profile(&game);
    let cfg = RolloutConfig {
        trials: 1000,
        seed: 0,
        record_trajectories: false,
    };
    c.bench_function("rollout_intersection3_1000", |b| {
        b.iter(|| rollout(&game, &profile, &[], &cfg).unwrap())
    });
}

criterion_group!(benches, milp, planners, rollouts);
criterion_main!(benches);
