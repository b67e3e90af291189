use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::ScenarioFile;
use crate::error::{Error, Result};
use crate::game::{best_response_dynamics, social_optimum, BrdOptions, GameSpec, Profile};
use crate::milp::SolveStatus;
use crate::montecarlo::{rollout, RolloutConfig, RolloutReport};
use crate::planner::Solver;

pub const SWEEP_HEADER: &str =
    "scenario,lambda,mode,feedback_gain,agent_id,T_goal,G,J,risk_bound,empirical_rate,rounds,solver_status";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepMode {
    Equilibrium,
    Social,
}

impl SweepMode {
    pub fn label(self) -> &'static str {
        match self {
            SweepMode::Equilibrium => "equilibrium",
            SweepMode::Social => "social",
        }
    }
}

/// One CSV line. Numeric fields are `None` when the solve for that λ failed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub scenario: String,
    pub lambda: f64,
    pub mode: SweepMode,
    pub feedback_gain: f64,
    /// Agent id, or `"mean"` for the average over agents.
    pub agent_id: String,
    pub t_goal: Option<f64>,
    pub g: Option<f64>,
    pub j: Option<f64>,
    pub risk_bound: Option<f64>,
    pub empirical_rate: Option<f64>,
    /// Best-response rounds; absent for the social optimum.
    pub rounds: Option<usize>,
    pub solver_status: String,
}

#[derive(Clone, Debug)]
pub struct SweepOptions {
    pub brd: BrdOptions,
    pub solver: Solver,
    /// Rollouts per profile; zero skips the Monte Carlo columns.
    pub trials: usize,
    pub seed: u64,
    /// Replaces the scenario's grid when set.
    pub lambdas: Option<Vec<f64>>,
    /// Replaces the scenario's horizon when set.
    pub horizon: Option<usize>,
}

impl Default for SweepOptions {
    fn default() -> Self {
        SweepOptions {
            brd: BrdOptions::default(),
            solver: Solver::default(),
            trials: 1000,
            seed: 0,
            lambdas: None,
            horizon: None,
        }
    }
}

/// `%g`-style with 9 significant digits; independent of locale.
pub fn format_number(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return if x.is_nan() {
            "nan".into()
        } else if x > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        };
    }
    let sci = format!("{x:.8e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if !(-5..9).contains(&exp) {
        let mantissa = trim_zeros(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{mantissa}e{sign}{:02}", exp.abs())
    } else {
        let decimals = (8 - exp) as usize;
        trim_zeros(&format!("{x:.decimals$}")).to_string()
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

fn opt(x: Option<f64>) -> String {
    x.map(format_number).unwrap_or_default()
}

impl SweepRow {
    pub fn csv_line(&self) -> String {
        [
            self.scenario.clone(),
            format_number(self.lambda),
            self.mode.label().to_string(),
            format_number(self.feedback_gain),
            self.agent_id.clone(),
            opt(self.t_goal),
            opt(self.g),
            opt(self.j),
            opt(self.risk_bound),
            opt(self.empirical_rate),
            self.rounds.map(|r| r.to_string()).unwrap_or_default(),
            self.solver_status.clone(),
        ]
        .join(",")
    }
}

pub fn write_sweep_csv(rows: &[SweepRow], mut out: impl Write) -> Result<()> {
    writeln!(out, "{SWEEP_HEADER}")?;
    for row in rows {
        writeln!(out, "{}", row.csv_line())?;
    }
    Ok(())
}

fn status_label(status: SolveStatus) -> String {
    // the CSV has no quoting, so keep commas out
    status.to_string().replace(',', ";")
}

fn error_label(e: &Error) -> String {
    match e {
        Error::NoPlan(s) => status_label(*s),
        Error::BestResponseInfeasible { agent, round } => format!("br_infeasible(agent={agent};round={round})"),
        other => format!("error({})", other.to_string().replace(',', ";")),
    }
}

struct Solved {
    profile: Profile,
    rounds: Option<usize>,
    status: String,
}

fn solve_mode(game: &GameSpec, mode: SweepMode, options: &SweepOptions) -> Result<Solved> {
    match mode {
        SweepMode::Equilibrium => {
            let eq = best_response_dynamics(game, &options.brd, &options.solver)?;
            let status = if !eq.converged {
                "not_converged".to_string()
            } else if eq.solver_gap > options.solver.options.gap_tol {
                status_label(SolveStatus::Feasible { gap: eq.solver_gap })
            } else {
                status_label(SolveStatus::Optimal)
            };
            Ok(Solved {
                profile: eq.profile,
                rounds: Some(eq.rounds),
                status,
            })
        }
        SweepMode::Social => {
            let opt = social_optimum(game, &options.solver)?;
            Ok(Solved {
                profile: opt.profile,
                rounds: None,
                status: status_label(opt.status),
            })
        }
    }
}

fn rows_for(
    scenario: &ScenarioFile,
    game: Result<GameSpec>,
    lambda: f64,
    mode: SweepMode,
    options: &SweepOptions,
) -> Vec<SweepRow> {
    let gain = scenario.agents.first().map_or(0.0, |a| a.feedback_gain);
    let row = |agent_id: String, rounds, status: &str| SweepRow {
        scenario: scenario.name.clone(),
        lambda,
        mode,
        feedback_gain: gain,
        agent_id,
        t_goal: None,
        g: None,
        j: None,
        risk_bound: None,
        empirical_rate: None,
        rounds,
        solver_status: status.to_string(),
    };
    let ids: Vec<String> = (0..scenario.agents.len()).map(|i| i.to_string()).collect();
    let failed = |status: String| {
        ids.iter()
            .cloned()
            .chain(std::iter::once("mean".to_string()))
            .map(|id| row(id, None, &status))
            .collect::<Vec<_>>()
    };
    let solved = match game.and_then(|g| solve_mode(&g, mode, options).map(|s| (g, s))) {
        Ok(s) => s,
        Err(e) => {
            log::warn!("{} λ={lambda} {}: {e}", scenario.name, mode.label());
            return failed(error_label(&e));
        }
    };
    let (game, solved) = solved;
    let report: Option<RolloutReport> = if options.trials > 0 {
        let cfg = RolloutConfig {
            trials: options.trials,
            seed: options.seed,
            record_trajectories: false,
        };
        match rollout(&game, &solved.profile, &[], &cfg) {
            Ok(r) => Some(r),
            Err(e) => return failed(error_label(&e)),
        }
    } else {
        None
    };
    let mut rows = Vec::with_capacity(ids.len() + 1);
    for (i, plan) in solved.profile.plans.iter().enumerate() {
        let mut r = row(plan.agent_id.to_string(), solved.rounds, &solved.status);
        r.t_goal = Some(plan.time_term);
        r.g = Some(plan.safety_term);
        r.j = Some(plan.objective);
        r.risk_bound = Some(plan.risk_bound);
        r.empirical_rate = report.as_ref().map(|rep| rep.agent_collision_rates[i]);
        rows.push(r);
    }
    let n = rows.len().max(1) as f64;
    let mean =
        |f: fn(&SweepRow) -> Option<f64>| -> Option<f64> { rows.iter().map(f).sum::<Option<f64>>().map(|s| s / n) };
    let mut m = row("mean".into(), solved.rounds, &solved.status);
    m.t_goal = mean(|r| r.t_goal);
    m.g = mean(|r| r.g);
    m.j = mean(|r| r.j);
    m.risk_bound = mean(|r| r.risk_bound);
    m.empirical_rate = mean(|r| r.empirical_rate);
    rows.push(m);
    rows
}

/// Equilibrium and social optimum at every λ of the grid.
///
/// Rows come out in λ order, equilibrium before social, agents in id order
/// followed by the mean row. A failed solve fills its rows with empty
/// numbers and the reason in `solver_status`.
pub fn run_sweep(scenario: &ScenarioFile, options: &SweepOptions) -> Result<Vec<SweepRow>> {
    scenario.validate()?;
    let lambdas = options.lambdas.clone().unwrap_or_else(|| scenario.lambda_grid.clone());
    if let Some(l) = lambdas.iter().find(|l| !(0.0..=1.0).contains(*l)) {
        return Err(Error::invalid(format!("lambda {l} outside [0, 1]")));
    }
    let per_lambda: Vec<Vec<SweepRow>> = lambdas
        .par_iter()
        .map(|&lambda| {
            let mut params = scenario.plan_params(lambda);
            if let Some(h) = options.horizon {
                params.horizon = h;
            }
            [SweepMode::Equilibrium, SweepMode::Social]
                .into_iter()
                .flat_map(|mode| rows_for(scenario, scenario.game(params.clone()), lambda, mode, options))
                .collect()
        })
        .collect();
    Ok(per_lambda.into_iter().flatten().collect())
}
