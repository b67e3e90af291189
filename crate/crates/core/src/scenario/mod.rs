//! Scenario files, the built-in scenarios, sweeps and rendering.
//!
//! Scenario files are TOML; see `docs/scenario-format.md` for the grammar.

mod render;
mod sweep;

use serde::{Deserialize, Serialize};
use toml::Spanned;

pub use render::{render_svg, svg_string};
pub use sweep::{format_number, run_sweep, write_sweep_csv, SweepMode, SweepOptions, SweepRow, SWEEP_HEADER};

use crate::error::{Error, Result};
use crate::game::{GameSpec, Profile};
use crate::geometry::Polytope;
use crate::planner::{AgentSpec, PlanParams};
use crate::stochastic::MarginConvention;
use crate::Vec2;

pub const FORMAT_VERSION: u32 = 1;

pub const BUILTIN_NAMES: [&str; 4] = ["opposing", "parallel", "intersection2", "intersection3"];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Workspace {
    pub min: [f64; 2],
    pub max: [f64; 2],
}

impl Workspace {
    pub fn contains(&self, p: [f64; 2]) -> bool {
        (0..2).all(|c| p[c] >= self.min[c] && p[c] <= self.max[c])
    }

    pub fn diameter(&self) -> f64 {
        Vec2::new(self.max[0] - self.min[0], self.max[1] - self.min[1]).norm()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AgentEntry {
    pub start: [f64; 2],
    pub goal: [f64; 2],
    pub half_extent: [f64; 2],
    pub vmax: f64,
    pub sigma_scale: f64,
    pub feedback_gain: f64,
}

/// Planning parameters a scenario runs with unless overridden.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Defaults {
    pub horizon: usize,
    pub lambda: f64,
    pub big_m: f64,
    pub margin_cap: f64,
    pub goal_tolerance: f64,
    pub margin_convention: MarginConvention,
    pub tighten_big_m: bool,
}

impl Default for Defaults {
    fn default() -> Self {
        let p = PlanParams::default();
        Defaults {
            horizon: p.horizon,
            lambda: p.lambda,
            big_m: p.big_m,
            margin_cap: p.margin_cap,
            goal_tolerance: p.goal_tolerance,
            margin_convention: p.margin_convention,
            tighten_big_m: p.tighten_big_m,
        }
    }
}

impl Defaults {
    pub fn params(&self, lambda: f64) -> PlanParams {
        PlanParams {
            horizon: self.horizon,
            lambda,
            big_m: self.big_m,
            margin_cap: self.margin_cap,
            goal_tolerance: self.goal_tolerance,
            margin_convention: self.margin_convention,
            tighten_big_m: self.tighten_big_m,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScenarioFile {
    pub format_version: u32,
    pub name: String,
    pub lambda_grid: Vec<f64>,
    pub workspace: Workspace,
    pub defaults: Defaults,
    pub agents: Vec<AgentEntry>,
}

/// Part of a scenario a validation message refers to.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Field {
    Root,
    Version,
    Workspace,
    Defaults,
    LambdaGrid,
    Lambda(usize),
    Agent(usize),
    AgentStart(usize),
    AgentGoal(usize),
}

fn default_grid() -> Vec<f64> {
    (1..=9).map(|k| k as f64 / 10.0).collect()
}

impl ScenarioFile {
    /// Checks every invariant; errors carry line 0 when no source is known.
    pub fn validate(&self) -> Result<()> {
        self.validate_at(|_| 0)
    }

    fn validate_at(&self, line: impl Fn(Field) -> usize) -> Result<()> {
        let fail = |f: Field, message: String| Error::Scenario { line: line(f), message };
        if self.format_version != FORMAT_VERSION {
            return Err(fail(
                Field::Version,
                format!(
                    "format_version {} unsupported (expected {FORMAT_VERSION})",
                    self.format_version
                ),
            ));
        }
        if self.name.trim().is_empty() {
            return Err(fail(Field::Root, "name must not be empty".into()));
        }
        let ws = &self.workspace;
        if !(0..2).all(|c| ws.min[c].is_finite() && ws.max[c].is_finite() && ws.min[c] < ws.max[c]) {
            return Err(fail(
                Field::Workspace,
                "workspace min must be below max on both axes".into(),
            ));
        }
        if self.lambda_grid.is_empty() {
            return Err(fail(Field::LambdaGrid, "lambda_grid must not be empty".into()));
        }
        for (k, &l) in self.lambda_grid.iter().enumerate() {
            if !(0.0..=1.0).contains(&l) {
                return Err(fail(Field::Lambda(k), format!("lambda_grid[{k}] = {l} outside [0, 1]")));
            }
            if k > 0 && l <= self.lambda_grid[k - 1] {
                return Err(fail(
                    Field::Lambda(k),
                    format!("lambda_grid must be strictly ascending at index {k}"),
                ));
            }
        }
        let d = &self.defaults;
        let params = d.params(d.lambda);
        params
            .validate()
            .map_err(|e| fail(Field::Defaults, format!("defaults: {}", strip_kind(&e))))?;
        params
            .check_big_m(ws.diameter())
            .map_err(|e| fail(Field::Defaults, format!("defaults: {}", strip_kind(&e))))?;
        if self.agents.is_empty() {
            return Err(fail(Field::Root, "at least one [[agents]] entry is required".into()));
        }
        for (i, a) in self.agents.iter().enumerate() {
            if !ws.contains(a.start) {
                return Err(fail(
                    Field::AgentStart(i),
                    format!(
                        "agents[{i}].start ({}, {}) outside the workspace",
                        a.start[0], a.start[1]
                    ),
                ));
            }
            if !ws.contains(a.goal) {
                return Err(fail(
                    Field::AgentGoal(i),
                    format!("agents[{i}].goal ({}, {}) outside the workspace", a.goal[0], a.goal[1]),
                ));
            }
            if !(a.half_extent[0] > 0.0 && a.half_extent[1] > 0.0) {
                return Err(fail(
                    Field::Agent(i),
                    format!("agents[{i}].half_extent must be positive"),
                ));
            }
            if !(a.vmax > 0.0 && a.vmax.is_finite()) {
                return Err(fail(Field::Agent(i), format!("agents[{i}].vmax must be positive")));
            }
            if !(a.sigma_scale >= 0.0 && a.sigma_scale.is_finite()) {
                return Err(fail(Field::Agent(i), format!("agents[{i}].sigma_scale must be >= 0")));
            }
            if !(a.feedback_gain >= 0.0 && a.feedback_gain.is_finite()) {
                return Err(fail(Field::Agent(i), format!("agents[{i}].feedback_gain must be >= 0")));
            }
            if self.agents[..i].iter().any(|b| b.start == a.start) {
                return Err(fail(
                    Field::AgentStart(i),
                    format!("agents[{i}].start repeats an earlier start"),
                ));
            }
        }
        Ok(())
    }

    /// Agents with ids in file order.
    pub fn agent_specs(&self) -> Result<Vec<AgentSpec>> {
        self.agents
            .iter()
            .enumerate()
            .map(|(id, a)| {
                let mut spec = AgentSpec::square(
                    id,
                    Vec2::from(a.start),
                    Vec2::from(a.goal),
                    a.half_extent[0],
                    a.vmax,
                    a.sigma_scale,
                    a.feedback_gain,
                )?;
                spec.shape = crate::geometry::AgentShape::rect(Vec2::from(a.half_extent))?;
                Ok(spec)
            })
            .collect()
    }

    pub fn plan_params(&self, lambda: f64) -> PlanParams {
        self.defaults.params(lambda)
    }

    pub fn game(&self, params: PlanParams) -> Result<GameSpec> {
        GameSpec::new(self.agent_specs()?, params)
    }

    /// Overrides every agent's feedback gain.
    pub fn set_feedback_gain(&mut self, gain: f64) {
        for a in &mut self.agents {
            a.feedback_gain = gain;
        }
    }
}

fn strip_kind(e: &Error) -> String {
    match e {
        Error::InvalidArgument(m) => m.clone(),
        other => other.to_string(),
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct BuiltinOptions {
    /// Use feedback gain 0.5 instead of 0 for every agent.
    pub feedback: bool,
    /// Replace the opposing scenario's second goal (5, 10) by (5, 50).
    pub corrected_opposing: bool,
}

fn agent(start: [f64; 2], goal: [f64; 2], gain: f64) -> AgentEntry {
    AgentEntry {
        start,
        goal,
        half_extent: [7.5, 7.5],
        vmax: 10.0,
        sigma_scale: 1.9,
        feedback_gain: gain,
    }
}

pub fn builtin_scenario(name: &str, options: BuiltinOptions) -> Result<ScenarioFile> {
    let k = if options.feedback { 0.5 } else { 0.0 };
    let agents = match name {
        "opposing" => {
            let second_goal = if options.corrected_opposing {
                [5.0, 50.0]
            } else {
                [5.0, 10.0]
            };
            vec![
                agent([10.0, 50.0], [95.0, 50.0], k),
                agent([90.0, 50.0], second_goal, k),
            ]
        }
        "parallel" => vec![
            agent([10.0, 70.0], [95.0, 70.0], k),
            agent([10.0, 35.0], [95.0, 35.0], k),
        ],
        "intersection2" => vec![
            agent([10.0, 50.0], [90.0, 50.0], k),
            agent([50.0, 10.0], [50.0, 90.0], k),
        ],
        "intersection3" => vec![
            agent([50.0, 90.0], [50.0, 5.0], k),
            agent([85.0, 30.0], [11.0, 73.0], k),
            agent([14.0, 29.0], [90.0, 73.0], k),
        ],
        other => {
            return Err(Error::invalid(format!(
                "unknown scenario '{other}' (valid: {})",
                BUILTIN_NAMES.join(", ")
            )))
        }
    };
    Ok(ScenarioFile {
        format_version: FORMAT_VERSION,
        name: name.to_string(),
        lambda_grid: default_grid(),
        workspace: Workspace {
            min: [0.0, 0.0],
            max: [100.0, 100.0],
        },
        defaults: Defaults::default(),
        agents,
    })
}

// Spanned mirror of the file layout used for line-numbered diagnostics.
#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScenario {
    format_version: Spanned<u32>,
    name: Spanned<String>,
    #[serde(default)]
    lambda_grid: Option<Spanned<Vec<Spanned<f64>>>>,
    workspace: Spanned<Workspace>,
    #[serde(default)]
    defaults: Option<Spanned<Defaults>>,
    agents: Spanned<Vec<Spanned<RawAgent>>>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawAgent {
    start: Spanned<[f64; 2]>,
    goal: Spanned<[f64; 2]>,
    #[serde(default = "default_half_extent")]
    half_extent: [f64; 2],
    #[serde(default = "default_vmax")]
    vmax: f64,
    #[serde(default = "default_sigma")]
    sigma_scale: f64,
    #[serde(default)]
    feedback_gain: f64,
}

fn default_half_extent() -> [f64; 2] {
    [7.5, 7.5]
}
fn default_vmax() -> f64 {
    10.0
}
fn default_sigma() -> f64 {
    1.9
}

fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].bytes().filter(|&b| b == b'\n').count() + 1
}

pub fn parse_scenario(text: &str) -> Result<ScenarioFile> {
    let raw: RawScenario = toml::from_str(text).map_err(|e| Error::Scenario {
        line: e.span().map_or(0, |s| line_of(text, s.start)),
        message: e.message().trim().to_string(),
    })?;
    let file = ScenarioFile {
        format_version: *raw.format_version.get_ref(),
        name: raw.name.get_ref().clone(),
        lambda_grid: raw
            .lambda_grid
            .as_ref()
            .map_or_else(default_grid, |g| g.get_ref().iter().map(|l| *l.get_ref()).collect()),
        workspace: raw.workspace.get_ref().clone(),
        defaults: raw.defaults.as_ref().map(|d| d.get_ref().clone()).unwrap_or_default(),
        agents: raw
            .agents
            .get_ref()
            .iter()
            .map(|a| {
                let a = a.get_ref();
                AgentEntry {
                    start: *a.start.get_ref(),
                    goal: *a.goal.get_ref(),
                    half_extent: a.half_extent,
                    vmax: a.vmax,
                    sigma_scale: a.sigma_scale,
                    feedback_gain: a.feedback_gain,
                }
            })
            .collect(),
    };
    let at = |s: std::ops::Range<usize>| line_of(text, s.start);
    file.validate_at(|f| match f {
        Field::Root => 1,
        Field::Version => at(raw.format_version.span()),
        Field::Workspace => at(raw.workspace.span()),
        Field::Defaults => raw.defaults.as_ref().map_or(1, |d| at(d.span())),
        Field::LambdaGrid => raw.lambda_grid.as_ref().map_or(1, |g| at(g.span())),
        Field::Lambda(k) => raw.lambda_grid.as_ref().map_or(1, |g| at(g.get_ref()[k].span())),
        Field::Agent(i) => at(raw.agents.get_ref()[i].span()),
        Field::AgentStart(i) => at(raw.agents.get_ref()[i].get_ref().start.span()),
        Field::AgentGoal(i) => at(raw.agents.get_ref()[i].get_ref().goal.span()),
    })?;
    Ok(file)
}

pub fn serialize_scenario(file: &ScenarioFile) -> Result<String> {
    toml::to_string_pretty(file).map_err(|e| Error::Format(e.to_string()))
}

/// Built-in name or path to a scenario file.
pub fn load_scenario(name_or_path: &str, options: BuiltinOptions) -> Result<ScenarioFile> {
    if BUILTIN_NAMES.contains(&name_or_path) {
        return builtin_scenario(name_or_path, options);
    }
    let path = std::path::Path::new(name_or_path);
    if !path.exists() {
        return builtin_scenario(name_or_path, options);
    }
    let text = std::fs::read_to_string(path)?;
    parse_scenario(&text)
}

/// Axis-aligned static obstacle, as given on the command line.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObstacleBox {
    pub min: [f64; 2],
    pub max: [f64; 2],
}

impl ObstacleBox {
    pub fn polytope(&self) -> Result<Polytope> {
        let center = Vec2::new(self.min[0] + self.max[0], self.min[1] + self.max[1]) / 2.0;
        let half = Vec2::new(self.max[0] - self.min[0], self.max[1] - self.min[1]) / 2.0;
        Polytope::rect(center, half)
    }
}

impl std::str::FromStr for ObstacleBox {
    type Err = Error;

    /// `xmin,ymin,xmax,ymax`
    fn from_str(s: &str) -> Result<Self> {
        let v: Vec<f64> = s
            .split(',')
            .map(|p| p.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| Error::invalid(format!("obstacle '{s}' is not xmin,ymin,xmax,ymax")))?;
        if v.len() != 4 || !v.iter().all(|x| x.is_finite()) {
            return Err(Error::invalid(format!("obstacle '{s}' is not xmin,ymin,xmax,ymax")));
        }
        let b = ObstacleBox {
            min: [v[0], v[1]],
            max: [v[2], v[3]],
        };
        b.polytope()?;
        Ok(b)
    }
}

/// Profile together with the scenario and obstacles it was computed for.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProfileFile {
    pub format_version: u32,
    pub scenario: ScenarioFile,
    #[serde(default)]
    pub obstacles: Vec<ObstacleBox>,
    pub profile: Profile,
}

impl ProfileFile {
    pub fn new(scenario: &ScenarioFile, obstacles: &[ObstacleBox], profile: &Profile) -> Self {
        ProfileFile {
            format_version: FORMAT_VERSION,
            scenario: scenario.clone(),
            obstacles: obstacles.to_vec(),
            profile: profile.clone(),
        }
    }

    pub fn obstacle_polytopes(&self) -> Result<Vec<Polytope>> {
        self.obstacles.iter().map(ObstacleBox::polytope).collect()
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Format(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: ProfileFile =
            serde_json::from_str(text).map_err(|e| Error::Format(format!("profile line {}: {e}", e.line())))?;
        if file.format_version != FORMAT_VERSION {
            return Err(Error::Format(format!(
                "profile format_version {} unsupported",
                file.format_version
            )));
        }
        file.scenario.validate()?;
        Ok(file)
    }
}

#[cfg(test)]
mod tests;
