//! Shared test oracles. Nothing here calls into the code under test except
//! to build inputs.
#![allow(dead_code)]

use minilp::{ComparisonOp, OptimizationDirection, Problem};
use pathgame::milp::{LinExpr, MilpModel, Sense, VarKind};
use pathgame::Vec2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub struct RandomMilp {
    pub model: MilpModel,
}

/// Random MILP with up to `max_bin` binaries, `max_cont` continuous
/// variables in [-20, 20] and `max_rows` constraints.
pub fn random_milp(seed: u64, max_bin: usize, max_cont: usize, max_rows: usize) -> MilpModel {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let nb = rng.random_range(1..=max_bin);
    let nc = rng.random_range(1..=max_cont);
    let rows = rng.random_range(1..=max_rows);
    let mut m = MilpModel::new(format!("random-{seed}"));
    let mut vars = Vec::new();
    for i in 0..nb {
        vars.push(m.add_binary(format!("b{i}")));
    }
    for i in 0..nc {
        let lo = rng.random_range(-20.0..0.0f64).round();
        let hi = rng.random_range(0.0..20.0f64).round();
        vars.push(m.add_continuous(lo, hi, format!("x{i}")).unwrap());
    }
    // a reference point keeps most rows satisfiable
    let point: Vec<f64> = m
        .variables
        .iter()
        .map(|v| match v.kind {
            VarKind::Binary => rng.random_range(0..=1) as f64,
            VarKind::Continuous => rng.random_range(v.lower..=v.upper),
        })
        .collect();
    for _ in 0..rows {
        let k = rng.random_range(1..=vars.len().min(8));
        let mut terms = Vec::new();
        for t in 0..k {
            // bias toward binaries so the relaxation is fractional
            let v = if t % 2 == 0 {
                vars[rng.random_range(0..nb)]
            } else {
                vars[rng.random_range(0..vars.len())]
            };
            let c = (rng.random_range(-10.0..10.0f64) * 4.0).round() / 4.0;
            terms.push((v, c));
        }
        let act: f64 = terms.iter().map(|&(v, c)| c * point[v.index()]).sum();
        let roll = rng.random_range(0..20);
        let slack = if rng.random_range(0..12) == 0 {
            -rng.random_range(0.0..2.0f64)
        } else {
            rng.random_range(0.0..2.5f64)
        };
        let (sense, rhs) = if roll < 10 {
            (Sense::Le, act + slack)
        } else if roll < 19 {
            (Sense::Ge, act - slack)
        } else {
            (Sense::Eq, act)
        };
        m.add_constraint(&terms, sense, rhs).unwrap();
    }
    let mut obj = LinExpr::default();
    for &v in &vars {
        obj.add_term(v, (rng.random_range(-10.0..10.0f64) * 8.0).round() / 8.0);
    }
    m.set_objective(&obj).unwrap();
    m
}

/// Enumerates every binary assignment and solves the remaining LP with an
/// independent LP solver. Returns `None` when infeasible.
pub fn brute_force_milp(model: &MilpModel) -> Option<f64> {
    let bins: Vec<usize> = (0..model.num_vars())
        .filter(|&j| model.variables[j].kind == VarKind::Binary)
        .collect();
    let mut best: Option<f64> = None;
    for mask in 0u64..(1u64 << bins.len()) {
        let mut fixed = vec![None; model.num_vars()];
        for (bit, &j) in bins.iter().enumerate() {
            let v = ((mask >> bit) & 1) as f64;
            if v < model.variables[j].lower || v > model.variables[j].upper {
                fixed[j] = Some(f64::NAN);
            } else {
                fixed[j] = Some(v);
            }
        }
        if fixed.iter().any(|f| matches!(f, Some(v) if v.is_nan())) {
            continue;
        }
        if let Some(v) = lp_with_fixed(model, &fixed) {
            best = Some(best.map_or(v, |b: f64| b.min(v)));
        }
    }
    best
}

fn lp_with_fixed(model: &MilpModel, fixed: &[Option<f64>]) -> Option<f64> {
    let mut p = Problem::new(OptimizationDirection::Minimize);
    let mut cost = vec![0.0; model.num_vars()];
    for &(v, c) in &model.objective {
        cost[v.index()] += c;
    }
    let mut constant = model.objective_constant;
    let mut handles = vec![None; model.num_vars()];
    for (j, var) in model.variables.iter().enumerate() {
        match fixed[j] {
            Some(v) => constant += cost[j] * v,
            None => handles[j] = Some(p.add_var(cost[j], (var.lower, var.upper))),
        }
    }
    if handles.iter().all(|h| h.is_none()) {
        // pure binary: just check the rows
        let x: Vec<f64> = fixed.iter().map(|f| f.unwrap()).collect();
        return model.verify(&x, 1e-9).ok().map(|_| constant);
    }
    for c in &model.constraints {
        let mut rhs = c.rhs;
        let mut terms = Vec::new();
        for &(v, a) in &c.terms {
            match fixed[v.index()] {
                Some(val) => rhs -= a * val,
                None => terms.push((handles[v.index()].unwrap(), a)),
            }
        }
        if terms.is_empty() {
            let ok = match c.sense {
                Sense::Le => 0.0 <= rhs + 1e-9,
                Sense::Ge => 0.0 >= rhs - 1e-9,
                Sense::Eq => rhs.abs() <= 1e-9,
            };
            if !ok {
                return None;
            }
            continue;
        }
        let op = match c.sense {
            Sense::Le => ComparisonOp::Le,
            Sense::Ge => ComparisonOp::Ge,
            Sense::Eq => ComparisonOp::Eq,
        };
        p.add_constraint(terms.as_slice(), op, rhs);
    }
    match p.solve() {
        Ok(sol) => Some(sol.objective() + constant),
        Err(_) => None,
    }
}

/// Convex polygon from 3..=8 points on a jittered circle, as a CCW vertex list.
pub fn random_convex_points(rng: &mut ChaCha8Rng) -> Vec<Vec2> {
    let n = rng.random_range(3..=8);
    let center = Vec2::new(rng.random_range(-20.0..20.0), rng.random_range(-20.0..20.0));
    let radius = rng.random_range(0.5..10.0);
    let mut angles: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..std::f64::consts::TAU)).collect();
    angles.sort_by(f64::total_cmp);
    let pts: Vec<Vec2> = angles
        .iter()
        .map(|a| center + Vec2::new(a.cos(), a.sin()) * radius * rng.random_range(0.7..1.0))
        .collect();
    gift_wrap(&pts)
}

fn cross(o: &Vec2, a: &Vec2, b: &Vec2) -> f64 {
    (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x)
}

/// Jarvis march; O(n h), CCW, strictly convex corners only.
pub fn gift_wrap(points: &[Vec2]) -> Vec<Vec2> {
    let start = points
        .iter()
        .copied()
        .min_by(|a, b| a.x.total_cmp(&b.x).then(a.y.total_cmp(&b.y)))
        .expect("points");
    let mut hull = vec![start];
    let mut current = start;
    loop {
        let mut next = points[0];
        for p in points {
            if next == current {
                next = *p;
                continue;
            }
            let c = cross(&current, &next, p);
            // take the clockwise-most candidate, farthest when collinear
            if c < 0.0 || (c == 0.0 && (p - current).norm() > (next - current).norm()) {
                next = *p;
            }
        }
        if next == start || hull.len() > points.len() {
            break;
        }
        hull.push(next);
        current = next;
    }
    hull
}

/// Hull of every pairwise vertex sum.
pub fn vertex_sum_hull(a: &[Vec2], b: &[Vec2]) -> Vec<Vec2> {
    let sums: Vec<Vec2> = a.iter().flat_map(|p| b.iter().map(move |q| p + q)).collect();
    gift_wrap(&sums)
}

fn point_segment(x: &Vec2, a: &Vec2, b: &Vec2) -> f64 {
    let ab = b - a;
    let t = if ab.norm_squared() > 0.0 {
        ((x - a).dot(&ab) / ab.norm_squared()).clamp(0.0, 1.0)
    } else {
        0.0
    };
    (x - (a + ab * t)).norm()
}

fn inside(x: &Vec2, poly: &[Vec2]) -> bool {
    let n = poly.len();
    (0..n).all(|i| cross(&poly[i], &poly[(i + 1) % n], x) >= -1e-12)
}

/// Hausdorff distance of two convex CCW polygons from their vertex lists.
pub fn hausdorff(a: &[Vec2], b: &[Vec2]) -> f64 {
    let one_way = |from: &[Vec2], to: &[Vec2]| {
        from.iter()
            .map(|v| {
                if inside(v, to) {
                    0.0
                } else {
                    (0..to.len())
                        .map(|i| point_segment(v, &to[i], &to[(i + 1) % to.len()]))
                        .fold(f64::INFINITY, f64::min)
                }
            })
            .fold(0.0, f64::max)
    };
    one_way(a, b).max(one_way(b, a))
}

/// `(x, erf(x))` reference pairs from `tests/data/erf_grid.txt`.
pub fn erf_reference() -> Vec<(f64, f64)> {
    include_str!("../data/erf_grid.txt")
        .lines()
        .filter(|l| !l.starts_with('#'))
        .map(|l| {
            let (x, v) = l.split_once(' ').expect("two columns");
            (x.parse().unwrap(), v.parse().unwrap())
        })
        .collect()
}
