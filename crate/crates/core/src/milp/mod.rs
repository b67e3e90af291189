//! Mixed-integer linear programming: model builder, dense bounded simplex,
//! branch-and-bound over binaries and an LP-text writer.
//!
//! Solving goes through [`MilpBackend`] so another solver can stand in for
//! the built-in [`BranchAndBound`] kernel.

mod branch;
pub mod lp_format;
mod model;
mod simplex;

use std::fmt;
use std::time::Duration;

use serde::{Deserialize, Serialize};

pub use branch::{INTEGRALITY_TOL, VERIFY_TOL};
pub use model::{Constraint, ConstraintId, LinExpr, MilpModel, Sense, VarId, VarKind, Variable};

use crate::error::Result;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum SolveStatus {
    /// Incumbent within the relative gap tolerance of the best bound.
    Optimal,
    /// A limit stopped the search with an incumbent at the given relative gap.
    Feasible {
        gap: f64,
    },
    Infeasible,
    Unbounded,
    /// A limit stopped the search before any incumbent was found.
    LimitReached,
}

impl SolveStatus {
    pub fn has_solution(self) -> bool {
        matches!(self, SolveStatus::Optimal | SolveStatus::Feasible { .. })
    }

    pub fn label(self) -> &'static str {
        match self {
            SolveStatus::Optimal => "optimal",
            SolveStatus::Feasible { .. } => "feasible",
            SolveStatus::Infeasible => "infeasible",
            SolveStatus::Unbounded => "unbounded",
            SolveStatus::LimitReached => "limit",
        }
    }
}

impl fmt::Display for SolveStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SolveStatus::Feasible { gap } => write!(f, "feasible(gap={gap:.3e})"),
            other => f.write_str(other.label()),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolveOptions {
    pub gap_tol: f64,
    pub node_limit: u64,
    pub time_limit: Duration,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            gap_tol: 1e-6,
            node_limit: 200_000,
            time_limit: Duration::from_secs(120),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MilpSolution {
    pub status: SolveStatus,
    /// One value per variable (empty when there is no incumbent).
    pub values: Vec<f64>,
    pub objective: f64,
    pub best_bound: f64,
    pub nodes_explored: u64,
    pub wall_time: f64,
    pub lp_pivots: u64,
}

impl MilpSolution {
    pub fn value(&self, v: VarId) -> f64 {
        self.values[v.index()]
    }

    /// Relative gap between incumbent and bound.
    pub fn gap(&self) -> f64 {
        if !self.status.has_solution() {
            return f64::INFINITY;
        }
        ((self.objective - self.best_bound) / self.objective.abs().max(1.0)).max(0.0)
    }
}

/// A MILP solver behind the model interface.
pub trait MilpBackend: Send + Sync {
    fn name(&self) -> &str;
    fn solve(&self, model: &MilpModel, options: &SolveOptions) -> Result<MilpSolution>;
}

/// Built-in best-first branch-and-bound with simplex relaxations.
#[derive(Clone, Copy, Debug, Default)]
pub struct BranchAndBound;

impl MilpBackend for BranchAndBound {
    fn name(&self) -> &str {
        "branch-and-bound"
    }

    fn solve(&self, model: &MilpModel, options: &SolveOptions) -> Result<MilpSolution> {
        branch::branch_and_bound(model, options)
    }
}

/// Solves with the built-in kernel.
pub fn solve(model: &MilpModel, options: &SolveOptions) -> Result<MilpSolution> {
    BranchAndBound.solve(model, options)
}
