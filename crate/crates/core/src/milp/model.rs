use std::sync::atomic::{AtomicU32, Ordering};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

static NEXT_MODEL_TAG: AtomicU32 = AtomicU32::new(1);

/// Handle to a variable; only meaningful for the model that issued it.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct VarId {
    index: u32,
    model: u32,
}

impl VarId {
    pub fn index(self) -> usize {
        self.index as usize
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum VarKind {
    Continuous,
    Binary,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Sense {
    Le,
    Eq,
    Ge,
}

impl Sense {
    pub fn symbol(self) -> &'static str {
        match self {
            Sense::Le => "<=",
            Sense::Eq => "=",
            Sense::Ge => ">=",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Variable {
    pub kind: VarKind,
    pub lower: f64,
    pub upper: f64,
    pub name: String,
    /// Branching class: fractional binaries of a higher class are branched on first.
    #[serde(default)]
    pub priority: u8,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Constraint {
    /// Merged terms, sorted by variable index, no zero coefficients.
    pub terms: Vec<(VarId, f64)>,
    pub sense: Sense,
    pub rhs: f64,
    pub name: String,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ConstraintId(pub usize);

/// Affine expression `Σ coef·var + constant`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct LinExpr {
    pub terms: Vec<(VarId, f64)>,
    pub constant: f64,
}

impl LinExpr {
    pub fn constant(c: f64) -> Self {
        LinExpr {
            terms: Vec::new(),
            constant: c,
        }
    }

    pub fn var(v: VarId) -> Self {
        LinExpr {
            terms: vec![(v, 1.0)],
            constant: 0.0,
        }
    }

    pub fn add_term(&mut self, v: VarId, coef: f64) -> &mut Self {
        self.terms.push((v, coef));
        self
    }

    pub fn add_scaled(&mut self, other: &LinExpr, scale: f64) -> &mut Self {
        self.terms.extend(other.terms.iter().map(|&(v, c)| (v, c * scale)));
        self.constant += other.constant * scale;
        self
    }

    pub fn add_constant(&mut self, c: f64) -> &mut Self {
        self.constant += c;
        self
    }

    pub fn scaled(&self, scale: f64) -> LinExpr {
        LinExpr {
            terms: self.terms.iter().map(|&(v, c)| (v, c * scale)).collect(),
            constant: self.constant * scale,
        }
    }

    /// Value under an assignment indexed by `VarId::index`.
    pub fn eval(&self, values: &[f64]) -> f64 {
        self.constant + self.terms.iter().map(|&(v, c)| c * values[v.index()]).sum::<f64>()
    }

    /// Smallest value over the variables' boxes.
    pub fn lower_bound(&self, model: &MilpModel) -> f64 {
        self.constant
            + self
                .terms
                .iter()
                .map(|&(v, c)| {
                    let var = &model.variables[v.index()];
                    if c >= 0.0 {
                        c * var.lower
                    } else {
                        c * var.upper
                    }
                })
                .sum::<f64>()
    }

    /// Largest value over the variables' boxes.
    pub fn upper_bound(&self, model: &MilpModel) -> f64 {
        -self.scaled(-1.0).lower_bound(model)
    }
}

/// Mixed-integer linear program, always minimized.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MilpModel {
    tag: u32,
    pub name: String,
    pub variables: Vec<Variable>,
    pub constraints: Vec<Constraint>,
    /// Merged objective terms.
    pub objective: Vec<(VarId, f64)>,
    pub objective_constant: f64,
}

impl MilpModel {
    pub fn new(name: impl Into<String>) -> Self {
        MilpModel {
            tag: NEXT_MODEL_TAG.fetch_add(1, Ordering::Relaxed),
            name: name.into(),
            variables: Vec::new(),
            constraints: Vec::new(),
            objective: Vec::new(),
            objective_constant: 0.0,
        }
    }

    pub fn num_vars(&self) -> usize {
        self.variables.len()
    }

    pub fn num_binaries(&self) -> usize {
        self.variables.iter().filter(|v| v.kind == VarKind::Binary).count()
    }

    pub fn var_ids(&self) -> impl Iterator<Item = VarId> + '_ {
        (0..self.variables.len() as u32).map(move |index| VarId { index, model: self.tag })
    }

    pub fn add_variable(&mut self, kind: VarKind, lower: f64, upper: f64, name: impl Into<String>) -> Result<VarId> {
        if lower.is_nan() || upper.is_nan() || lower > upper {
            return Err(Error::invalid(format!(
                "variable bounds [{lower}, {upper}] are inverted"
            )));
        }
        match kind {
            VarKind::Binary if lower < 0.0 || upper > 1.0 => {
                return Err(Error::invalid("binary variable bounds must lie within [0, 1]"));
            }
            VarKind::Continuous if !lower.is_finite() || !upper.is_finite() => {
                return Err(Error::invalid("continuous variables need finite bounds"));
            }
            _ => {}
        }
        let (lower, upper) = match kind {
            VarKind::Binary => (lower.ceil(), upper.floor()),
            VarKind::Continuous => (lower, upper),
        };
        if lower > upper {
            return Err(Error::invalid("binary variable has no integral value in its bounds"));
        }
        let id = VarId {
            index: self.variables.len() as u32,
            model: self.tag,
        };
        self.variables.push(Variable {
            kind,
            lower,
            upper,
            name: name.into(),
            priority: 0,
        });
        Ok(id)
    }

    pub fn add_binary(&mut self, name: impl Into<String>) -> VarId {
        self.add_variable(VarKind::Binary, 0.0, 1.0, name)
            .expect("binary bounds are valid")
    }

    pub fn add_continuous(&mut self, lower: f64, upper: f64, name: impl Into<String>) -> Result<VarId> {
        self.add_variable(VarKind::Continuous, lower, upper, name)
    }

    fn check_owned(&self, v: VarId) -> Result<()> {
        if v.model != self.tag || v.index() >= self.variables.len() {
            return Err(Error::invalid(format!(
                "variable handle {} does not belong to model '{}'",
                v.index, self.name
            )));
        }
        Ok(())
    }

    fn merge_terms(&self, terms: &[(VarId, f64)]) -> Result<Vec<(VarId, f64)>> {
        for &(v, c) in terms {
            self.check_owned(v)?;
            if !c.is_finite() {
                return Err(Error::invalid("coefficients must be finite"));
            }
        }
        let mut sorted = terms.to_vec();
        sorted.sort_by_key(|&(v, _)| v.index);
        let mut merged: Vec<(VarId, f64)> = Vec::with_capacity(sorted.len());
        for (v, c) in sorted {
            match merged.last_mut() {
                Some((last, acc)) if *last == v => *acc += c,
                _ => merged.push((v, c)),
            }
        }
        merged.retain(|&(_, c)| c != 0.0);
        Ok(merged)
    }

    pub fn add_constraint(&mut self, terms: &[(VarId, f64)], sense: Sense, rhs: f64) -> Result<ConstraintId> {
        let name = format!("c{}", self.constraints.len());
        self.add_named_constraint(name, terms, sense, rhs)
    }

    pub fn add_named_constraint(
        &mut self,
        name: impl Into<String>,
        terms: &[(VarId, f64)],
        sense: Sense,
        rhs: f64,
    ) -> Result<ConstraintId> {
        if !rhs.is_finite() {
            return Err(Error::invalid("constraint right-hand side must be finite"));
        }
        let terms = self.merge_terms(terms)?;
        self.constraints.push(Constraint {
            terms,
            sense,
            rhs,
            name: name.into(),
        });
        Ok(ConstraintId(self.constraints.len() - 1))
    }

    /// Adds `expr sense rhs`, moving the expression's constant to the right.
    pub fn add_expr_constraint(
        &mut self,
        name: impl Into<String>,
        expr: &LinExpr,
        sense: Sense,
        rhs: f64,
    ) -> Result<ConstraintId> {
        self.add_named_constraint(name, &expr.terms, sense, rhs - expr.constant)
    }

    pub fn set_objective(&mut self, expr: &LinExpr) -> Result<()> {
        self.objective = self.merge_terms(&expr.terms)?;
        self.objective_constant = expr.constant;
        Ok(())
    }

    pub fn set_bounds(&mut self, v: VarId, lower: f64, upper: f64) -> Result<()> {
        self.check_owned(v)?;
        let var = &mut self.variables[v.index()];
        if lower > upper || (var.kind == VarKind::Binary && (lower < 0.0 || upper > 1.0)) {
            return Err(Error::invalid(format!(
                "invalid bounds [{lower}, {upper}] for {}",
                var.name
            )));
        }
        var.lower = lower;
        var.upper = upper;
        Ok(())
    }

    pub fn set_priority(&mut self, v: VarId, priority: u8) -> Result<()> {
        self.check_owned(v)?;
        self.variables[v.index()].priority = priority;
        Ok(())
    }

    pub fn evaluate_objective(&self, values: &[f64]) -> f64 {
        self.objective_constant + self.objective.iter().map(|&(v, c)| c * values[v.index()]).sum::<f64>()
    }

    /// Checks bounds, integrality and every row within `tol` absolute.
    pub fn verify(&self, values: &[f64], tol: f64) -> std::result::Result<(), String> {
        if values.len() != self.variables.len() {
            return Err(format!(
                "expected {} values, got {}",
                self.variables.len(),
                values.len()
            ));
        }
        for (var, &x) in self.variables.iter().zip(values) {
            if !x.is_finite() || x < var.lower - tol || x > var.upper + tol {
                return Err(format!(
                    "variable {} = {x} outside [{}, {}]",
                    var.name, var.lower, var.upper
                ));
            }
            if var.kind == VarKind::Binary && (x - x.round()).abs() > tol {
                return Err(format!("binary {} = {x} is fractional", var.name));
            }
        }
        for c in &self.constraints {
            let lhs: f64 = c.terms.iter().map(|&(v, a)| a * values[v.index()]).sum();
            let ok = match c.sense {
                Sense::Le => lhs <= c.rhs + tol,
                Sense::Ge => lhs >= c.rhs - tol,
                Sense::Eq => (lhs - c.rhs).abs() <= tol,
            };
            if !ok {
                return Err(format!(
                    "constraint {}: {lhs} {} {} violated",
                    c.name,
                    c.sense.symbol(),
                    c.rhs
                ));
            }
        }
        Ok(())
    }

    pub(crate) fn lp_data(&self) -> LpData {
        let n = self.variables.len();
        let m = self.constraints.len();
        let mut a = vec![0.0; m * n];
        let mut lo = Vec::with_capacity(n + m);
        let mut hi = Vec::with_capacity(n + m);
        for v in &self.variables {
            lo.push(v.lower);
            hi.push(v.upper);
        }
        for (i, c) in self.constraints.iter().enumerate() {
            for &(v, coef) in &c.terms {
                a[i * n + v.index()] += coef;
            }
            let (l, h) = match c.sense {
                Sense::Le => (f64::NEG_INFINITY, c.rhs),
                Sense::Ge => (c.rhs, f64::INFINITY),
                Sense::Eq => (c.rhs, c.rhs),
            };
            lo.push(l);
            hi.push(h);
        }
        let mut cost = vec![0.0; n + m];
        for &(v, c) in &self.objective {
            cost[v.index()] += c;
        }
        LpData { n, m, a, cost, lo, hi }
    }
}

/// Dense LP in bounded form consumed by the simplex engine.
#[derive(Clone, Debug)]
pub(crate) struct LpData {
    pub n: usize,
    pub m: usize,
    /// Row-major `m × n` constraint matrix.
    pub a: Vec<f64>,
    /// Cost for structurals followed by zeros for the row logicals.
    pub cost: Vec<f64>,
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn variables_and_bounds() {
        let mut m = MilpModel::new("t");
        let x = m.add_continuous(-10.0, 10.0, "x").unwrap();
        let b = m.add_binary("b");
        assert_eq!(m.num_vars(), 2);
        assert_eq!(m.variables[b.index()].lower, 0.0);
        assert_eq!(m.variables[b.index()].upper, 1.0);
        assert!(m.add_continuous(1.0, 0.0, "bad").is_err());
        assert!(m.add_variable(VarKind::Binary, 0.0, 2.0, "bad").is_err());
        assert!(m.add_continuous(0.0, f64::INFINITY, "inf").is_err());
        m.add_constraint(&[(x, 1.0), (b, 1.0)], Sense::Le, 1.0).unwrap();
        assert_eq!(m.constraints[0].terms.len(), 2);
    }

    #[test]
    fn duplicate_terms_merge() {
        let mut m = MilpModel::new("t");
        let x = m.add_continuous(0.0, 5.0, "x").unwrap();
        m.add_constraint(&[(x, 2.0), (x, 3.0)], Sense::Le, 5.0).unwrap();
        assert_eq!(m.constraints[0].terms, vec![(x, 5.0)]);
    }

    #[test]
    fn foreign_variable_rejected() {
        let mut a = MilpModel::new("a");
        let mut b = MilpModel::new("b");
        let x = a.add_continuous(0.0, 1.0, "x").unwrap();
        let _ = b.add_continuous(0.0, 1.0, "y").unwrap();
        assert!(b.add_constraint(&[(x, 1.0)], Sense::Le, 1.0).is_err());
    }

    #[test]
    fn expression_bounds() {
        let mut m = MilpModel::new("t");
        let x = m.add_continuous(-1.0, 2.0, "x").unwrap();
        let y = m.add_continuous(0.0, 3.0, "y").unwrap();
        let mut e = LinExpr::constant(1.0);
        e.add_term(x, 2.0).add_term(y, -1.0);
        assert_eq!(e.lower_bound(&m), 1.0 - 2.0 - 3.0);
        assert_eq!(e.eval(&[1.0, 1.0]), 2.0);
    }
}
