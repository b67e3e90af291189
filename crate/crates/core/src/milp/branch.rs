//! Best-first branch-and-bound over binary variables.
//!
//! The open node with the smallest relaxation bound is expanded next; after
//! each branching the search dives into the child on the rounding side of
//! the branching variable, reusing the warm tableau, and parks the sibling
//! in the queue with its parent's basis. Parked nodes are resumed by
//! refactoring that basis under their bounds.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::time::Instant;

use super::model::{LpData, MilpModel, VarKind};
use super::simplex::{LpStatus, Simplex, VarStatus};
use super::{MilpSolution, SolveOptions, SolveStatus};
use crate::error::{Error, Result};

/// Distance from {0, 1} below which a binary counts as integral.
pub const INTEGRALITY_TOL: f64 = 1e-6;
/// Absolute tolerance used by the post-solve verifier.
pub const VERIFY_TOL: f64 = 1e-6;

struct OpenNode {
    bound: f64,
    id: u64,
    fixes: Vec<(u32, bool)>,
    basis: Vec<VarStatus>,
}

impl PartialEq for OpenNode {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for OpenNode {}
impl PartialOrd for OpenNode {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for OpenNode {
    // BinaryHeap is a max-heap: invert so the smallest bound (then oldest id) pops first.
    fn cmp(&self, other: &Self) -> Ordering {
        other.bound.total_cmp(&self.bound).then_with(|| other.id.cmp(&self.id))
    }
}

struct Search<'a> {
    model: &'a MilpModel,
    root: LpData,
    binaries: Vec<usize>,
    options: &'a SolveOptions,
    started: Instant,
    incumbent: Option<(f64, Vec<f64>)>,
    nodes: u64,
    next_id: u64,
}

impl Search<'_> {
    fn prune_threshold(&self) -> f64 {
        match &self.incumbent {
            Some((obj, _)) => obj - self.options.gap_tol * obj.abs().max(1.0),
            None => f64::INFINITY,
        }
    }

    fn limits_hit(&self) -> bool {
        self.nodes >= self.options.node_limit || self.started.elapsed() >= self.options.time_limit
    }

    /// Most fractional binary of the highest priority class present; ties go
    /// to the lowest index.
    fn branching_variable(&self, x: &[f64]) -> Option<(usize, f64)> {
        let mut best: Option<(usize, f64)> = None;
        let mut best_key = (0u8, f64::INFINITY);
        for &j in &self.binaries {
            let v = x[j];
            let frac = v - v.floor();
            if frac <= INTEGRALITY_TOL || frac >= 1.0 - INTEGRALITY_TOL {
                continue;
            }
            let priority = self.model.variables[j].priority;
            let dist = (frac - 0.5).abs();
            let better = match best {
                None => true,
                Some(_) => priority > best_key.0 || (priority == best_key.0 && dist < best_key.1 - 1e-12),
            };
            if better {
                best_key = (priority, dist);
                best = Some((j, v));
            }
        }
        best
    }

    fn lp_with_fixes(&self, fixes: &[(u32, bool)]) -> LpData {
        let mut lp = self.root.clone();
        for &(j, up) in fixes {
            let v = if up { 1.0 } else { 0.0 };
            lp.lo[j as usize] = v;
            lp.hi[j as usize] = v;
        }
        lp
    }

    /// Fixes every binary at its rounded value and re-solves the continuous
    /// part, so accepted incumbents are exactly integral.
    fn polish(&self, lp: &LpData, simplex: &Simplex) -> Option<(f64, Vec<f64>)> {
        let mut lp = lp.clone();
        let mut s = simplex.clone();
        let x = s.values().to_vec();
        for &j in &self.binaries {
            let r = x[j].round().clamp(0.0, 1.0);
            s.set_bounds(&mut lp, j, r, r);
        }
        if s.reoptimize(&lp) != LpStatus::Optimal {
            return None;
        }
        let mut values = s.values().to_vec();
        for &j in &self.binaries {
            values[j] = values[j].round();
        }
        if self.model.verify(&values, VERIFY_TOL).is_err() {
            return None;
        }
        Some((self.model.evaluate_objective(&values), values))
    }

    fn run(&mut self) -> Result<MilpSolution> {
        let mut lp = self.root.clone();
        let mut simplex = Simplex::new(&lp);
        match simplex.solve_primal(&lp) {
            LpStatus::Optimal => {}
            LpStatus::Infeasible => return Ok(self.finish(SolveStatus::Infeasible, f64::INFINITY, simplex.pivots)),
            LpStatus::Unbounded => {
                return Err(Error::Solver(
                    "LP relaxation unbounded although every variable is bounded".into(),
                ))
            }
            LpStatus::IterationLimit => {
                return Err(Error::Solver("simplex iteration limit at the root relaxation".into()))
            }
        }
        let mut heap: BinaryHeap<OpenNode> = BinaryHeap::new();
        // The node currently loaded in `simplex`/`lp`, if any.
        let mut current: Option<Vec<(u32, bool)>> = Some(Vec::new());
        let global_bound;
        loop {
            if let Some(fixes) = current.take() {
                self.nodes += 1;
                let obj = self.root_objective_constant() + simplex.objective(&lp);
                if obj < self.prune_threshold() {
                    let x = simplex.values().to_vec();
                    match self.branching_variable(&x) {
                        None => {
                            if let Some((val, values)) = self.polish(&lp, &simplex) {
                                if self.incumbent.as_ref().is_none_or(|(best, _)| val < *best) {
                                    self.incumbent = Some((val, values));
                                }
                            }
                        }
                        Some((j, v)) => {
                            let up_first = v >= 0.5;
                            let mut sibling = fixes.clone();
                            sibling.push((j as u32, !up_first));
                            heap.push(OpenNode {
                                bound: obj,
                                id: self.next_id,
                                fixes: sibling,
                                basis: simplex.statuses().to_vec(),
                            });
                            self.next_id += 1;
                            let mut child = fixes;
                            child.push((j as u32, up_first));
                            let val = if up_first { 1.0 } else { 0.0 };
                            simplex.set_bounds(&mut lp, j, val, val);
                            match simplex.reoptimize(&lp) {
                                LpStatus::Optimal => current = Some(child),
                                LpStatus::Infeasible => {}
                                LpStatus::Unbounded => return Err(Error::Solver("unbounded node relaxation".into())),
                                LpStatus::IterationLimit => {
                                    return Err(Error::Solver("simplex iteration limit in node".into()))
                                }
                            }
                        }
                    }
                }
            }
            if current.is_some() {
                if self.limits_hit() {
                    let bound = heap
                        .peek()
                        .map_or(f64::INFINITY, |n| n.bound)
                        .min(self.root_objective_constant() + simplex.objective(&lp));
                    return Ok(self.finish_limit(bound, simplex.pivots));
                }
                continue;
            }
            // pick the best parked node
            let threshold = self.prune_threshold();
            let next = match heap.pop() {
                Some(node) if node.bound < threshold => Some(node),
                Some(_) => {
                    // every remaining node is at least as bad
                    heap.clear();
                    None
                }
                None => None,
            };
            let Some(node) = next else {
                global_bound = self.incumbent.as_ref().map_or(f64::INFINITY, |(v, _)| *v);
                break;
            };
            if self.limits_hit() {
                let bound = node.bound.min(heap.peek().map_or(f64::INFINITY, |n| n.bound));
                return Ok(self.finish_limit(bound, simplex.pivots));
            }
            lp = self.lp_with_fixes(&node.fixes);
            simplex.restore(&lp, &node.basis);
            match simplex.reoptimize(&lp) {
                LpStatus::Optimal => current = Some(node.fixes),
                LpStatus::Infeasible => {}
                LpStatus::Unbounded => return Err(Error::Solver("unbounded node relaxation".into())),
                LpStatus::IterationLimit => return Err(Error::Solver("simplex iteration limit in node".into())),
            }
        }
        let status = if self.incumbent.is_some() {
            SolveStatus::Optimal
        } else {
            SolveStatus::Infeasible
        };
        Ok(self.finish(status, global_bound, simplex.pivots))
    }

    fn root_objective_constant(&self) -> f64 {
        self.model.objective_constant
    }

    fn finish_limit(&mut self, bound: f64, pivots: u64) -> MilpSolution {
        match &self.incumbent {
            Some((obj, _)) => {
                let gap = ((obj - bound) / obj.abs().max(1.0)).max(0.0);
                if gap <= self.options.gap_tol {
                    self.finish(SolveStatus::Optimal, bound, pivots)
                } else {
                    self.finish(SolveStatus::Feasible { gap }, bound, pivots)
                }
            }
            None => self.finish(SolveStatus::LimitReached, bound, pivots),
        }
    }

    fn finish(&mut self, status: SolveStatus, bound: f64, pivots: u64) -> MilpSolution {
        let (objective, values) = match self.incumbent.take() {
            Some((o, v)) => (o, v),
            None => (f64::INFINITY, Vec::new()),
        };
        MilpSolution {
            status,
            values,
            objective,
            best_bound: bound.min(objective),
            nodes_explored: self.nodes,
            wall_time: self.started.elapsed().as_secs_f64(),
            lp_pivots: pivots,
        }
    }
}

pub(crate) fn branch_and_bound(model: &MilpModel, options: &SolveOptions) -> Result<MilpSolution> {
    let root = model.lp_data();
    let binaries = model
        .variables
        .iter()
        .enumerate()
        .filter(|(_, v)| v.kind == VarKind::Binary)
        .map(|(j, _)| j)
        .collect();
    let mut search = Search {
        model,
        root,
        binaries,
        options,
        started: Instant::now(),
        incumbent: None,
        nodes: 0,
        next_id: 0,
    };
    let solution = search.run()?;
    if matches!(solution.status, SolveStatus::Optimal | SolveStatus::Feasible { .. }) {
        model
            .verify(&solution.values, VERIFY_TOL)
            .map_err(|e| Error::Solver(format!("post-solve verification failed: {e}")))?;
    }
    Ok(solution)
}
