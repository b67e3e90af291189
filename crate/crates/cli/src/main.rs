use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use clap::{Args, Parser, Subcommand, ValueEnum};

use pathgame::game::{self, BrdOptions, GameSpec, Profile, UpdateOrder};
use pathgame::milp::{lp_format, SolveOptions, SolveStatus};
use pathgame::montecarlo::{self, RolloutConfig};
use pathgame::planner::{self, PlanParams, Solver};
use pathgame::scenario::{self, BuiltinOptions, ObstacleBox, ProfileFile, ScenarioFile, SweepOptions};
use pathgame::stochastic::MarginConvention;
use pathgame::Error;

/// `println!` that ends the process quietly when stdout has gone away.
macro_rules! out {
    ($($arg:tt)*) => {
        emit(&format!($($arg)*))
    };
}

fn emit(text: &str) {
    let mut stdout = std::io::stdout().lock();
    if writeln!(stdout, "{text}").is_err() {
        std::process::exit(0);
    }
}

#[derive(Parser)]
#[command(name = "pathgame", version, about = "Chance-constrained path planning games")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Plan one agent alone, optionally past static boxes.
    Plan {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 0)]
        agent: usize,
        /// Static box `xmin,ymin,xmax,ymax`; repeatable.
        #[arg(long = "obstacle")]
        obstacles: Vec<ObstacleBox>,
    },
    /// Best response of one agent to the other plans in a profile.
    Respond {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        agent: usize,
        #[arg(long)]
        profile: PathBuf,
    },
    /// Best-response dynamics.
    Equilibrium {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        brd: BrdArgs,
    },
    /// Joint plan minimizing the summed objective.
    Social {
        #[command(flatten)]
        common: Common,
    },
    /// Equilibrium and social optimum over a grid of λ, as CSV.
    Sweep {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        brd: BrdArgs,
        /// Comma-separated λ values replacing the scenario grid.
        #[arg(long, value_delimiter = ',', conflicts_with = "lambda")]
        lambda_grid: Option<Vec<f64>>,
    },
    /// Monte Carlo rollouts of a saved profile.
    Simulate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        profile: PathBuf,
        /// Also write every sampled trajectory as CSV.
        #[arg(long)]
        trajectories: Option<PathBuf>,
    },
    /// Draw a saved profile as SVG.
    Render {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        profile: PathBuf,
    },
    /// List the built-in scenarios.
    Scenarios,
}

#[derive(Args)]
struct Common {
    /// Built-in scenario name or path to a scenario file.
    #[arg(long)]
    scenario: Option<String>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    horizon: Option<usize>,
    /// Feedback gain applied to every agent.
    #[arg(long)]
    feedback_gain: Option<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    trials: Option<usize>,
    /// Seconds per MILP solve.
    #[arg(long)]
    time_limit: Option<f64>,
    #[arg(long)]
    node_limit: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Write the MILP in LP format before solving.
    #[arg(long)]
    dump_lp: Option<PathBuf>,
    /// Margin coefficient without the factor sqrt(2).
    #[arg(long)]
    legacy_margin: bool,
    /// Opposing scenario with the second goal at (5, 50).
    #[arg(long)]
    corrected_opposing: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum Order {
    RoundRobin,
    Shuffled,
}

#[derive(Args)]
struct BrdArgs {
    #[arg(long, default_value_t = 20)]
    max_rounds: usize,
    #[arg(long, value_enum, default_value = "round-robin")]
    order: Order,
    /// Seed of the shuffled update order.
    #[arg(long)]
    order_seed: Option<u64>,
}

impl BrdArgs {
    fn options(&self, seed: u64) -> BrdOptions {
        BrdOptions {
            max_rounds: self.max_rounds,
            order: match self.order {
                Order::RoundRobin => UpdateOrder::RoundRobin,
                Order::Shuffled => UpdateOrder::Shuffled {
                    seed: self.order_seed.unwrap_or(seed),
                },
            },
            ..BrdOptions::default()
        }
    }
}

/// Error plus the exit code it maps to.
struct Failure {
    code: u8,
    kind: &'static str,
    message: String,
}

impl Failure {
    fn usage(message: impl Into<String>) -> Self {
        Failure {
            code: 2,
            kind: "usage",
            message: message.into(),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let (code, kind) = match &e {
            Error::InvalidArgument(_) | Error::Domain(_) | Error::Scenario { .. } => (2, "usage"),
            Error::InfeasibleSetup(_) | Error::BestResponseInfeasible { .. } => (3, "infeasible"),
            Error::NoPlan(SolveStatus::Infeasible) => (3, "infeasible"),
            Error::NoPlan(SolveStatus::LimitReached) => (4, "limit"),
            Error::Io(_) | Error::Format(_) => (5, "io"),
            Error::NoPlan(_) | Error::PlanVerification(_) | Error::Solver(_) => (1, "internal"),
        };
        Failure {
            code,
            kind,
            message: e.to_string(),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e).into()
    }
}

type CliResult<T = ()> = Result<T, Failure>;

struct Setup {
    scenario: ScenarioFile,
    params: PlanParams,
    solver: Solver,
}

impl Common {
    fn builtin_options(&self) -> BuiltinOptions {
        BuiltinOptions {
            feedback: false,
            corrected_opposing: self.corrected_opposing,
        }
    }

    fn load(&self, embedded: Option<&ScenarioFile>) -> CliResult<ScenarioFile> {
        let mut s = match (&self.scenario, embedded) {
            (Some(name), _) => {
                if self.corrected_opposing && name != "opposing" {
                    return Err(Failure::usage(
                        "--corrected-opposing only applies to --scenario opposing",
                    ));
                }
                scenario::load_scenario(name, self.builtin_options())?
            }
            (None, Some(s)) => s.clone(),
            (None, None) => return Err(Failure::usage("--scenario is required")),
        };
        if let Some(k) = self.feedback_gain {
            s.set_feedback_gain(k);
        }
        Ok(s)
    }

    fn setup(&self, embedded: Option<&ScenarioFile>, base: Option<&PlanParams>) -> CliResult<Setup> {
        let scenario = self.load(embedded)?;
        let mut params = match base {
            Some(p) if self.scenario.is_none() => p.clone(),
            _ => scenario.plan_params(scenario.defaults.lambda),
        };
        if let Some(l) = self.lambda {
            params.lambda = l;
        }
        if let Some(h) = self.horizon {
            params.horizon = h;
        }
        if self.legacy_margin {
            params.margin_convention = MarginConvention::Legacy;
        }
        params.validate()?;
        scenario.validate()?;
        let mut options = SolveOptions::default();
        if let Some(t) = self.time_limit {
            if !(t > 0.0 && t.is_finite()) {
                return Err(Failure::usage("--time-limit must be positive"));
            }
            options.time_limit = Duration::from_secs_f64(t);
        }
        if let Some(n) = self.node_limit {
            options.node_limit = n;
        }
        Ok(Setup {
            scenario,
            params,
            solver: Solver::new(options),
        })
    }

    fn dump(&self, model: &pathgame::milp::MilpModel) -> CliResult {
        if let Some(path) = &self.dump_lp {
            write_file(path, &lp_format::write_lp(model))?;
        }
        Ok(())
    }

    fn rollout_config(&self, default_trials: usize) -> RolloutConfig {
        RolloutConfig {
            trials: self.trials.unwrap_or(default_trials),
            seed: self.seed,
            record_trajectories: false,
        }
    }
}

fn write_file(path: &Path, text: &str) -> CliResult {
    std::fs::write(path, text).map_err(|e| Failure {
        code: 5,
        kind: "io",
        message: format!("cannot write {}: {e}", path.display()),
    })
}

fn read_profile(path: &Path) -> CliResult<ProfileFile> {
    let text = std::fs::read_to_string(path).map_err(|e| Failure {
        code: 5,
        kind: "io",
        message: format!("cannot read {}: {e}", path.display()),
    })?;
    Ok(ProfileFile::from_json(&text)?)
}

fn save_profile(common: &Common, file: &ProfileFile) -> CliResult {
    if let Some(out) = &common.out {
        write_file(out, &file.to_json()?)?;
    }
    Ok(())
}

fn print_plans(profile: &Profile) {
    for p in &profile.plans {
        out!(
            "agent={} T_goal={} G={} J={} risk_bound={}",
            p.agent_id,
            p.goal_step,
            scenario::format_number(p.safety_term),
            scenario::format_number(p.objective),
            scenario::format_number(p.risk_bound)
        );
    }
}

fn agent_spec(game: &GameSpec, id: usize) -> CliResult<usize> {
    game::agent_index(game, id)
        .map_err(|_| Failure::usage(format!("--agent {id} out of range ({} agents)", game.agents.len())))
}

fn run(cli: Cli) -> CliResult {
    match cli.command {
        Command::Scenarios => {
            for name in scenario::BUILTIN_NAMES {
                let s = scenario::builtin_scenario(name, BuiltinOptions::default())?;
                out!("{name}\t{} agents", s.agents.len());
            }
        }
        Command::Plan {
            common,
            agent,
            obstacles,
        } => {
            let setup = common.setup(None, None)?;
            let game = setup.scenario.game(setup.params.clone())?;
            let i = agent_spec(&game, agent)?;
            let polys = obstacles
                .iter()
                .map(ObstacleBox::polytope)
                .collect::<Result<Vec<_>, _>>()?;
            let encoded = planner::encode_mp1(&game.agents[i], &polys, &setup.params)?;
            common.dump(&encoded.model)?;
            let outcome = planner::plan_mp1(&game.agents[i], &polys, &setup.params, &setup.solver)?;
            out!("status={}", outcome.solution.status);
            let profile = Profile {
                plans: vec![outcome.plan],
                params: setup.params.clone(),
            };
            print_plans(&profile);
            // the saved profile covers only the planned agent
            let mut single = setup.scenario.clone();
            single.agents = vec![single.agents[i].clone()];
            let mut profile = profile;
            profile.plans[0].agent_id = 0;
            save_profile(&common, &ProfileFile::new(&single, &obstacles, &profile))?;
        }
        Command::Respond { common, agent, profile } => {
            let file = read_profile(&profile)?;
            let setup = common.setup(Some(&file.scenario), Some(&file.profile.params))?;
            let game = setup.scenario.game(setup.params.clone())?;
            file.profile.check_against(&game)?;
            let i = agent_spec(&game, agent)?;
            let others: Vec<_> = (0..game.agents.len())
                .filter(|&j| j != i)
                .map(|j| (&game.agents[j], &file.profile.plans[j]))
                .collect();
            let encoded = planner::encode_mp2(&game.agents[i], &others, &setup.params)?;
            common.dump(&encoded.model)?;
            let outcome = planner::best_response(&game.agents[i], &others, &setup.params, &setup.solver)?;
            out!("status={}", outcome.solution.status);
            let mut updated = file.profile.clone();
            updated.plans[i] = outcome.plan;
            updated.params = setup.params.clone();
            print_plans(&Profile {
                plans: vec![updated.plans[i].clone()],
                params: setup.params.clone(),
            });
            save_profile(&common, &ProfileFile::new(&setup.scenario, &file.obstacles, &updated))?;
        }
        Command::Equilibrium { common, brd } => {
            let setup = common.setup(None, None)?;
            let game = setup.scenario.game(setup.params.clone())?;
            let options = brd.options(common.seed);
            let result = game::best_response_dynamics(&game, &options, &setup.solver)?;
            if !result.converged {
                eprintln!(
                    "pathgame: warning[not-converged]: no equilibrium after {} rounds; last profile reported",
                    result.rounds
                );
            }
            out!(
                "converged={} rounds={} epsilon={} solver_gap={}",
                result.converged,
                result.rounds,
                scenario::format_number(result.epsilon),
                scenario::format_number(result.solver_gap)
            );
            print_plans(&result.profile);
            save_profile(&common, &ProfileFile::new(&setup.scenario, &[], &result.profile))?;
        }
        Command::Social { common } => {
            let setup = common.setup(None, None)?;
            let game = setup.scenario.game(setup.params.clone())?;
            let encoded = planner::encode_joint(&game.agents, &setup.params)?;
            common.dump(&encoded.model)?;
            let outcome = game::social_optimum(&game, &setup.solver)?;
            out!(
                "status={} objective={} gap={} nodes={}",
                outcome.status,
                scenario::format_number(outcome.objective),
                scenario::format_number(outcome.gap),
                outcome.nodes
            );
            print_plans(&outcome.profile);
            save_profile(&common, &ProfileFile::new(&setup.scenario, &[], &outcome.profile))?;
        }
        Command::Sweep {
            common,
            brd,
            lambda_grid,
        } => {
            if common.dump_lp.is_some() {
                return Err(Failure::usage("--dump-lp is not available for sweep"));
            }
            let setup = common.setup(None, None)?;
            let mut scenario = setup.scenario;
            scenario.defaults.horizon = setup.params.horizon;
            scenario.defaults.margin_convention = setup.params.margin_convention;
            let options = SweepOptions {
                brd: brd.options(common.seed),
                solver: setup.solver,
                trials: common.trials.unwrap_or(1000),
                seed: common.seed,
                lambdas: lambda_grid.or(common.lambda.map(|l| vec![l])),
                horizon: None,
            };
            let rows = scenario::run_sweep(&scenario, &options)?;
            let mut buf = Vec::new();
            scenario::write_sweep_csv(&rows, &mut buf)?;
            let text = String::from_utf8(buf).expect("CSV is ASCII");
            match &common.out {
                Some(path) => write_file(path, &text)?,
                None => {
                    let mut stdout = std::io::stdout().lock();
                    if stdout.write_all(text.as_bytes()).is_err() {
                        std::process::exit(0);
                    }
                }
            }
        }
        Command::Simulate {
            common,
            profile,
            trajectories,
        } => {
            let file = read_profile(&profile)?;
            let setup = common.setup(Some(&file.scenario), Some(&file.profile.params))?;
            let game = setup.scenario.game(file.profile.params.clone())?;
            let mut cfg = common.rollout_config(10_000);
            cfg.record_trajectories = trajectories.is_some();
            let report = montecarlo::rollout(&game, &file.profile, &file.obstacle_polytopes()?, &cfg)?;
            if let Some(path) = &trajectories {
                let mut buf = Vec::new();
                montecarlo::write_trajectories_csv(&report, &mut buf)?;
                write_file(path, &String::from_utf8(buf).expect("CSV is ASCII"))?;
            }
            let bound = file.profile.risk_bound();
            out!(
                "trials={} collision_rate={} halfwidth={} risk_bound={} bound_holds={} goal_reach_rate={}",
                report.trials,
                scenario::format_number(report.collision_rate),
                scenario::format_number(report.confidence_halfwidth),
                scenario::format_number(bound),
                montecarlo::validate_bound(&report, &file.profile),
                scenario::format_number(report.goal_reach_rate)
            );
            if let Some(out) = &common.out {
                let mut slim = report.clone();
                slim.trajectories.clear();
                let json =
                    serde_json::to_string_pretty(&slim).map_err(|e| Failure::from(Error::Format(e.to_string())))?;
                write_file(out, &json)?;
            }
        }
        Command::Render { common, profile } => {
            let file = read_profile(&profile)?;
            let setup = common.setup(Some(&file.scenario), Some(&file.profile.params))?;
            let out = common
                .out
                .as_ref()
                .ok_or_else(|| Failure::usage("render needs --out"))?;
            let svg = scenario::svg_string(&setup.scenario, &file.profile)?;
            write_file(out, &svg)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            // help and version
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let text = e.to_string();
            let first = text.lines().next().unwrap_or("invalid usage");
            eprintln!("pathgame: error[usage]: {}", first.trim_start_matches("error: "));
            return ExitCode::from(2);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("pathgame: error[{}]: {}", f.kind, f.message.replace('\n', " "));
            ExitCode::from(f.code)
        }
    }
}
