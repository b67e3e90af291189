//! Dense-tableau simplex over bounded variables.
//!
//! Every row `i` of the model becomes `Σ_j a_ij x_j − y_i = 0` with a
//! logical variable `y_i` carrying the row's range, so the all-logical
//! basis is always available. The primal method (composite phase 1, then
//! phase 2) solves cold relaxations; the dual method re-optimizes after
//! branching tightens a bound. Both fall back to Bland's smallest-index
//! rule after a run of degenerate pivots.

// index loops read closer to the tableau algebra
#![allow(clippy::needless_range_loop)]

use super::model::LpData;

pub(crate) const FEAS_TOL: f64 = 1e-9;
pub(crate) const OPT_TOL: f64 = 1e-9;
const PIVOT_TOL: f64 = 1e-9;
const REFACTOR_EVERY: usize = 200;
const DEGENERATE_RUN_FOR_BLAND: usize = 60;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) enum VarStatus {
    Basic,
    AtLower,
    AtUpper,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
    IterationLimit,
}

#[derive(Clone)]
pub(crate) struct Simplex {
    n: usize,
    m: usize,
    w: usize,
    tab: Vec<f64>,
    basis: Vec<usize>,
    status: Vec<VarStatus>,
    x: Vec<f64>,
    dj: Vec<f64>,
    since_refactor: usize,
    bland: bool,
    pub(crate) pivots: u64,
}

#[inline]
fn feas_tol(bound: f64) -> f64 {
    FEAS_TOL * (1.0 + bound.abs())
}

impl Simplex {
    /// All-logical basis with each structural at the bound its cost prefers,
    /// which is dual feasible because every structural bound is finite.
    pub(crate) fn new(lp: &LpData) -> Self {
        let (n, m) = (lp.n, lp.m);
        let w = n + m;
        let mut status = vec![VarStatus::Basic; w];
        for (j, st) in status.iter_mut().enumerate().take(n) {
            *st = if lp.cost[j] >= 0.0 {
                VarStatus::AtLower
            } else {
                VarStatus::AtUpper
            };
        }
        let mut s = Simplex {
            n,
            m,
            w,
            tab: Vec::new(),
            basis: Vec::new(),
            status,
            x: vec![0.0; w],
            dj: vec![0.0; w],
            since_refactor: 0,
            bland: false,
            pivots: 0,
        };
        s.refactor(lp);
        s
    }

    pub(crate) fn values(&self) -> &[f64] {
        &self.x[..self.n]
    }

    pub(crate) fn statuses(&self) -> &[VarStatus] {
        &self.status
    }

    pub(crate) fn objective(&self, lp: &LpData) -> f64 {
        lp.cost[..self.n]
            .iter()
            .zip(&self.x[..self.n])
            .map(|(c, x)| c * x)
            .sum()
    }

    /// Rebuilds the tableau from the original rows for the basis described by
    /// `self.status`. Columns that turn out singular are left nonbasic.
    pub(crate) fn refactor(&mut self, lp: &LpData) {
        let (n, m, w) = (self.n, self.m, self.w);
        self.tab.clear();
        self.tab.resize(m * w, 0.0);
        for i in 0..m {
            let row = &mut self.tab[i * w..(i + 1) * w];
            for j in 0..n {
                row[j] = -lp.a[i * n + j];
            }
            row[n + i] = 1.0;
        }
        self.basis = (n..w).collect();
        let desired: Vec<bool> = self.status.iter().map(|s| *s == VarStatus::Basic).collect();
        // Rows whose logical is not wanted in the final basis may be pivoted out.
        let mut free_row: Vec<bool> = (0..m).map(|i| !desired[n + i]).collect();
        for q in 0..n {
            if !desired[q] {
                continue;
            }
            let mut best = None;
            let mut best_abs = PIVOT_TOL * 1e3;
            for i in 0..m {
                if free_row[i] {
                    let v = self.tab[i * w + q].abs();
                    if v > best_abs {
                        best_abs = v;
                        best = Some(i);
                    }
                }
            }
            match best {
                Some(r) => {
                    self.pivot_rows_only(r, q);
                    free_row[r] = false;
                }
                None => {
                    self.status[q] = nearest_bound_status(lp, q, self.x[q]);
                }
            }
        }
        for k in 0..w {
            if self.status[k] == VarStatus::Basic && !self.basis.contains(&k) {
                self.status[k] = nearest_bound_status(lp, k, self.x[k]);
            }
        }
        for &b in &self.basis {
            self.status[b] = VarStatus::Basic;
        }
        for k in 0..w {
            match self.status[k] {
                VarStatus::AtLower => {
                    if lp.lo[k].is_finite() {
                        self.x[k] = lp.lo[k];
                    } else {
                        self.status[k] = VarStatus::AtUpper;
                        self.x[k] = lp.hi[k];
                    }
                }
                VarStatus::AtUpper => {
                    if lp.hi[k].is_finite() {
                        self.x[k] = lp.hi[k];
                    } else {
                        self.status[k] = VarStatus::AtLower;
                        self.x[k] = lp.lo[k];
                    }
                }
                VarStatus::Basic => {}
            }
        }
        self.compute_basics();
        self.compute_dj(&lp.cost);
        self.since_refactor = 0;
    }

    /// Restores a basis recorded with [`Simplex::statuses`] under new bounds.
    pub(crate) fn restore(&mut self, lp: &LpData, statuses: &[VarStatus]) {
        self.status.copy_from_slice(statuses);
        self.refactor(lp);
    }

    fn compute_basics(&mut self) {
        let w = self.w;
        for i in 0..self.m {
            let row = &self.tab[i * w..(i + 1) * w];
            let mut v = 0.0;
            for k in 0..w {
                if self.status[k] != VarStatus::Basic {
                    let t = row[k];
                    if t != 0.0 {
                        v -= t * self.x[k];
                    }
                }
            }
            self.x[self.basis[i]] = v;
        }
    }

    fn compute_dj(&mut self, cost: &[f64]) {
        let w = self.w;
        self.dj.copy_from_slice(cost);
        for i in 0..self.m {
            let cb = cost[self.basis[i]];
            if cb != 0.0 {
                let row = &self.tab[i * w..(i + 1) * w];
                for k in 0..w {
                    self.dj[k] -= cb * row[k];
                }
            }
        }
        for &b in &self.basis {
            self.dj[b] = 0.0;
        }
    }

    fn pivot_rows_only(&mut self, r: usize, q: usize) {
        let w = self.w;
        let piv = self.tab[r * w + q];
        {
            let row = &mut self.tab[r * w..(r + 1) * w];
            let inv = 1.0 / piv;
            for v in row.iter_mut() {
                *v *= inv;
            }
            row[q] = 1.0;
        }
        let (before, rest) = self.tab.split_at_mut(r * w);
        let (pivot_row, after) = rest.split_at_mut(w);
        for row in before.chunks_exact_mut(w).chain(after.chunks_exact_mut(w)) {
            let f = row[q];
            if f != 0.0 {
                for (v, p) in row.iter_mut().zip(pivot_row.iter()) {
                    *v -= f * p;
                }
                row[q] = 0.0;
            }
        }
        self.basis[r] = q;
    }

    fn pivot(&mut self, lp: &LpData, r: usize, q: usize, leaving_status: VarStatus) {
        let leaving = self.basis[r];
        self.pivot_rows_only(r, q);
        let w = self.w;
        let dq = self.dj[q];
        if dq != 0.0 {
            let row = &self.tab[r * w..(r + 1) * w];
            for (d, p) in self.dj.iter_mut().zip(row) {
                *d -= dq * p;
            }
        }
        self.dj[q] = 0.0;
        self.status[q] = VarStatus::Basic;
        self.status[leaving] = leaving_status;
        self.x[leaving] = match leaving_status {
            VarStatus::AtLower => lp.lo[leaving],
            VarStatus::AtUpper => lp.hi[leaving],
            VarStatus::Basic => unreachable!(),
        };
        self.pivots += 1;
        self.since_refactor += 1;
        if self.since_refactor >= REFACTOR_EVERY {
            self.refactor(lp);
        }
    }

    /// Moves nonbasic `k` by `delta`, keeping the row equations satisfied.
    fn shift_nonbasic(&mut self, k: usize, delta: f64) {
        if delta == 0.0 {
            return;
        }
        self.x[k] += delta;
        let w = self.w;
        for i in 0..self.m {
            let t = self.tab[i * w + k];
            if t != 0.0 {
                self.x[self.basis[i]] -= t * delta;
            }
        }
    }

    /// Tightens or replaces the bounds of variable `k` in place.
    pub(crate) fn set_bounds(&mut self, lp: &mut LpData, k: usize, lo: f64, hi: f64) {
        lp.lo[k] = lo;
        lp.hi[k] = hi;
        if self.status[k] == VarStatus::Basic {
            return;
        }
        let (target, st) = if self.dj[k] >= 0.0 {
            (lo, VarStatus::AtLower)
        } else {
            (hi, VarStatus::AtUpper)
        };
        self.status[k] = st;
        let delta = target - self.x[k];
        self.shift_nonbasic(k, delta);
        self.x[k] = target;
    }

    pub(crate) fn is_dual_feasible(&self, lp: &LpData) -> bool {
        (0..self.w).all(|k| match self.status[k] {
            VarStatus::Basic => true,
            _ if lp.lo[k] == lp.hi[k] => true,
            VarStatus::AtLower => self.dj[k] >= -OPT_TOL,
            VarStatus::AtUpper => self.dj[k] <= OPT_TOL,
        })
    }

    fn iteration_cap(&self) -> usize {
        50 * (self.w + 100)
    }

    /// Primal simplex from the current basis (phase 1 if infeasible).
    pub(crate) fn solve_primal(&mut self, lp: &LpData) -> LpStatus {
        self.bland = false;
        let mut degenerate_run = 0usize;
        let mut in_phase2 = false;
        for _ in 0..self.iteration_cap() {
            let infeasible = self.primal_infeasibility_gradient(lp);
            let phase1 = infeasible.is_some();
            let reduced: Vec<f64> = match &infeasible {
                Some(g) => self.phase1_reduced_costs(g),
                None => {
                    if !in_phase2 {
                        self.compute_dj(&lp.cost);
                        in_phase2 = true;
                    }
                    self.dj.clone()
                }
            };
            if phase1 && in_phase2 {
                // drift pushed a basic variable out of bounds
                in_phase2 = false;
            }
            let Some((q, dir)) = self.primal_entering(lp, &reduced) else {
                return if phase1 {
                    LpStatus::Infeasible
                } else {
                    LpStatus::Optimal
                };
            };
            let Some(theta) = self.primal_step(lp, q, dir, phase1) else {
                return LpStatus::Unbounded;
            };
            if theta.abs() <= 1e-12 {
                degenerate_run += 1;
                if degenerate_run >= DEGENERATE_RUN_FOR_BLAND {
                    self.bland = true;
                }
            } else {
                degenerate_run = 0;
            }
        }
        LpStatus::IterationLimit
    }

    /// `Some(g)` with `g_i = ∂(sum of infeasibilities)/∂x_B(i)` when infeasible.
    fn primal_infeasibility_gradient(&self, lp: &LpData) -> Option<Vec<f64>> {
        let mut g = vec![0.0; self.m];
        let mut any = false;
        for (i, gi) in g.iter_mut().enumerate() {
            let b = self.basis[i];
            let v = self.x[b];
            if v < lp.lo[b] - feas_tol(lp.lo[b]) {
                *gi = -1.0;
                any = true;
            } else if v > lp.hi[b] + feas_tol(lp.hi[b]) {
                *gi = 1.0;
                any = true;
            }
        }
        any.then_some(g)
    }

    fn phase1_reduced_costs(&self, g: &[f64]) -> Vec<f64> {
        let w = self.w;
        let mut d = vec![0.0; w];
        for (i, &gi) in g.iter().enumerate() {
            if gi != 0.0 {
                let row = &self.tab[i * w..(i + 1) * w];
                for k in 0..w {
                    d[k] -= gi * row[k];
                }
            }
        }
        for &b in &self.basis {
            d[b] = 0.0;
        }
        d
    }

    fn primal_entering(&self, lp: &LpData, d: &[f64]) -> Option<(usize, f64)> {
        let mut best: Option<(usize, f64)> = None;
        let mut best_score = 0.0;
        for k in 0..self.w {
            if lp.lo[k] == lp.hi[k] {
                continue;
            }
            let dir = match self.status[k] {
                VarStatus::Basic => continue,
                VarStatus::AtLower if d[k] < -OPT_TOL => 1.0,
                VarStatus::AtUpper if d[k] > OPT_TOL => -1.0,
                _ => continue,
            };
            if self.bland {
                return Some((k, dir));
            }
            let score = d[k].abs();
            if score > best_score {
                best_score = score;
                best = Some((k, dir));
            }
        }
        best
    }

    /// Ratio test and update; returns the step length, `None` if unbounded.
    fn primal_step(&mut self, lp: &LpData, q: usize, dir: f64, phase1: bool) -> Option<f64> {
        let w = self.w;
        // Candidate rows: (row, exact ratio, |alpha|, leaving status)
        let mut cands: Vec<(usize, f64, f64, VarStatus)> = Vec::new();
        for i in 0..self.m {
            let alpha = self.tab[i * w + q] * dir;
            if alpha.abs() <= PIVOT_TOL {
                continue;
            }
            let b = self.basis[i];
            let v = self.x[b];
            let (lo, hi) = (lp.lo[b], lp.hi[b]);
            // basic moves by -alpha * theta
            if alpha > 0.0 {
                // decreasing
                if phase1 && v > hi + feas_tol(hi) {
                    cands.push((i, (v - hi) / alpha, alpha, VarStatus::AtUpper));
                } else if lo.is_finite() && !(phase1 && v < lo - feas_tol(lo)) {
                    cands.push((i, ((v - lo) / alpha).max(0.0), alpha, VarStatus::AtLower));
                }
            } else {
                let a = -alpha;
                if phase1 && v < lo - feas_tol(lo) {
                    cands.push((i, (lo - v) / a, a, VarStatus::AtLower));
                } else if hi.is_finite() && !(phase1 && v > hi + feas_tol(hi)) {
                    cands.push((i, ((hi - v) / a).max(0.0), a, VarStatus::AtUpper));
                }
            }
        }
        let range = lp.hi[q] - lp.lo[q];
        let chosen = if self.bland {
            cands
                .iter()
                .min_by(|a, b| a.1.total_cmp(&b.1).then(self.basis[a.0].cmp(&self.basis[b.0])))
                .copied()
        } else {
            // Harris two-pass: relaxed bound, then the largest pivot under it.
            let relaxed = cands.iter().map(|c| c.1 + FEAS_TOL / c.2).fold(f64::INFINITY, f64::min);
            cands
                .iter()
                .filter(|c| c.1 <= relaxed)
                .max_by(|a, b| a.2.total_cmp(&b.2).then(b.0.cmp(&a.0)))
                .copied()
        };
        match chosen {
            Some((r, theta, _, leaving)) if theta < range => {
                self.shift_nonbasic(q, dir * theta);
                self.pivot(lp, r, q, leaving);
                Some(theta)
            }
            _ if !range.is_finite() => None,
            _ => {
                let theta = range;
                let target = if dir > 0.0 { lp.hi[q] } else { lp.lo[q] };
                self.shift_nonbasic(q, target - self.x[q]);
                self.x[q] = target;
                self.status[q] = if dir > 0.0 {
                    VarStatus::AtUpper
                } else {
                    VarStatus::AtLower
                };
                Some(theta)
            }
        }
    }

    /// Dual simplex; requires a dual feasible basis.
    pub(crate) fn solve_dual(&mut self, lp: &LpData) -> LpStatus {
        self.bland = false;
        let w = self.w;
        let mut degenerate_run = 0usize;
        for _ in 0..self.iteration_cap() {
            // leaving row: largest bound violation
            let mut leave: Option<(usize, f64, VarStatus)> = None;
            let mut worst = 0.0;
            for i in 0..self.m {
                let b = self.basis[i];
                let v = self.x[b];
                let (viol, target) = if v < lp.lo[b] - feas_tol(lp.lo[b]) {
                    (lp.lo[b] - v, VarStatus::AtLower)
                } else if v > lp.hi[b] + feas_tol(lp.hi[b]) {
                    (v - lp.hi[b], VarStatus::AtUpper)
                } else {
                    continue;
                };
                let better = if self.bland {
                    leave.is_none_or(|(r, _, _)| b < self.basis[r])
                } else {
                    viol > worst
                };
                if better {
                    worst = viol;
                    leave = Some((i, viol, target));
                }
            }
            let Some((r, _, target)) = leave else {
                return LpStatus::Optimal;
            };
            let increase = target == VarStatus::AtLower;
            // entering candidates keep dual feasibility
            let row = &self.tab[r * w..(r + 1) * w];
            let mut cands: Vec<(usize, f64, f64)> = Vec::new();
            for k in 0..w {
                let st = self.status[k];
                if st == VarStatus::Basic || lp.lo[k] == lp.hi[k] {
                    continue;
                }
                let t = row[k];
                if t.abs() <= PIVOT_TOL {
                    continue;
                }
                // x_B(r) changes by -t * delta_k
                let ok = match (st, increase) {
                    (VarStatus::AtLower, true) => t < 0.0,
                    (VarStatus::AtUpper, true) => t > 0.0,
                    (VarStatus::AtLower, false) => t > 0.0,
                    (VarStatus::AtUpper, false) => t < 0.0,
                    _ => false,
                };
                if ok {
                    cands.push((k, self.dj[k].abs() / t.abs(), t.abs()));
                }
            }
            let chosen = if self.bland {
                cands
                    .iter()
                    .min_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)))
                    .copied()
            } else {
                let relaxed = cands.iter().map(|c| c.1 + OPT_TOL / c.2).fold(f64::INFINITY, f64::min);
                cands
                    .iter()
                    .filter(|c| c.1 <= relaxed)
                    .max_by(|a, b| a.2.total_cmp(&b.2).then(b.0.cmp(&a.0)))
                    .copied()
            };
            let Some((q, ratio, _)) = chosen else {
                return LpStatus::Infeasible;
            };
            let b = self.basis[r];
            let bound = if increase { lp.lo[b] } else { lp.hi[b] };
            let t = self.tab[r * w + q];
            let delta = (self.x[b] - bound) / t;
            self.shift_nonbasic(q, delta);
            self.pivot(lp, r, q, target);
            if ratio <= 1e-12 {
                degenerate_run += 1;
                if degenerate_run >= DEGENERATE_RUN_FOR_BLAND {
                    self.bland = true;
                }
            } else {
                degenerate_run = 0;
            }
        }
        LpStatus::IterationLimit
    }

    /// Re-optimizes after bound changes: dual simplex when the basis is still
    /// dual feasible, primal otherwise, with a primal clean-up pass.
    pub(crate) fn reoptimize(&mut self, lp: &LpData) -> LpStatus {
        let status = if self.is_dual_feasible(lp) {
            self.solve_dual(lp)
        } else {
            self.solve_primal(lp)
        };
        match status {
            LpStatus::Optimal if !self.is_dual_feasible(lp) => self.solve_primal(lp),
            LpStatus::IterationLimit => {
                self.refactor(lp);
                self.solve_primal(lp)
            }
            s => s,
        }
    }
}

fn nearest_bound_status(lp: &LpData, k: usize, v: f64) -> VarStatus {
    let (lo, hi) = (lp.lo[k], lp.hi[k]);
    if !hi.is_finite() || (lo.is_finite() && (v - lo).abs() <= (hi - v).abs()) {
        VarStatus::AtLower
    } else {
        VarStatus::AtUpper
    }
}
