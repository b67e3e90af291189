//! Writes a [`MilpModel`] in a CPLEX-style LP text format.
//!
//! ```text
//! \ model <name>
//! \ objective constant <c>
//! Minimize
//!  obj: <terms>
//! Subject To
//!  <row name>: <terms> <= | = | >= <rhs>
//! Bounds
//!  <lower> <= <var> <= <upper>
//! Binary
//!  <var> ...
//! End
//! ```
//!
//! Terms are written `+ <coef> <var>` / `- <coef> <var>` with coefficients in
//! shortest round-trip decimal form. Names are sanitized to
//! `[A-Za-z0-9_.]`; a clash gets the variable index appended. The objective
//! constant is only recorded in the comment line because not every reader
//! accepts a constant term.

use std::collections::HashSet;
use std::fmt::Write as _;

use super::model::{MilpModel, VarKind};

fn sanitize(name: &str) -> String {
    let mut s: String = name
        .chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || c == '_' || c == '.' {
                c
            } else {
                '_'
            }
        })
        .collect();
    if s.is_empty() || s.starts_with(|c: char| c.is_ascii_digit() || c == '.') {
        s.insert(0, 'v');
    }
    s
}

fn unique_names<'a>(names: impl Iterator<Item = &'a str>) -> Vec<String> {
    let mut seen = HashSet::new();
    names
        .enumerate()
        .map(|(i, n)| {
            let mut s = sanitize(n);
            if !seen.insert(s.clone()) {
                s = format!("{s}_{i}");
                seen.insert(s.clone());
            }
            s
        })
        .collect()
}

fn write_terms(out: &mut String, terms: &[(super::VarId, f64)], names: &[String]) {
    if terms.is_empty() {
        out.push_str(" 0");
        return;
    }
    for &(v, c) in terms {
        let sign = if c < 0.0 { '-' } else { '+' };
        let _ = write!(out, " {sign} {} {}", c.abs(), names[v.index()]);
    }
}

pub fn write_lp(model: &MilpModel) -> String {
    let var_names = unique_names(model.variables.iter().map(|v| v.name.as_str()));
    let row_names = unique_names(model.constraints.iter().map(|c| c.name.as_str()));
    let mut out = String::new();
    let _ = writeln!(out, "\\ model {}", model.name);
    let _ = writeln!(out, "\\ objective constant {}", model.objective_constant);
    out.push_str("Minimize\n obj:");
    write_terms(&mut out, &model.objective, &var_names);
    out.push_str("\nSubject To\n");
    for (c, name) in model.constraints.iter().zip(&row_names) {
        let _ = write!(out, " {name}:");
        write_terms(&mut out, &c.terms, &var_names);
        let _ = writeln!(out, " {} {}", c.sense.symbol(), c.rhs);
    }
    out.push_str("Bounds\n");
    for (v, name) in model.variables.iter().zip(&var_names) {
        let _ = writeln!(out, " {} <= {name} <= {}", v.lower, v.upper);
    }
    let binaries: Vec<&String> = model
        .variables
        .iter()
        .zip(&var_names)
        .filter(|(v, _)| v.kind == VarKind::Binary)
        .map(|(_, n)| n)
        .collect();
    if !binaries.is_empty() {
        out.push_str("Binary\n");
        for chunk in binaries.chunks(8) {
            let line: Vec<&str> = chunk.iter().map(|s| s.as_str()).collect();
            let _ = writeln!(out, " {}", line.join(" "));
        }
    }
    out.push_str("End\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::milp::{LinExpr, Sense};

    #[test]
    fn small_model_text() {
        let mut m = MilpModel::new("demo");
        let x = m.add_continuous(-10.0, 10.0, "x").unwrap();
        let b = m.add_binary("b[0]");
        let dup = m.add_continuous(0.0, 1.0, "x").unwrap();
        m.add_named_constraint("cap", &[(x, 1.0), (b, -2.5)], Sense::Le, 4.0)
            .unwrap();
        m.add_named_constraint("link", &[(dup, 1.0)], Sense::Ge, 0.5).unwrap();
        let mut obj = LinExpr::constant(1.5);
        obj.add_term(x, 1.0).add_term(b, -3.0);
        m.set_objective(&obj).unwrap();
        let text = write_lp(&m);
        let expected = "\\ model demo\n\\ objective constant 1.5\nMinimize\n obj: + 1 x - 3 b_0_\n\
Subject To\n cap: + 1 x - 2.5 b_0_ <= 4\n link: + 1 x_2 >= 0.5\n\
Bounds\n -10 <= x <= 10\n 0 <= b_0_ <= 1\n 0 <= x_2 <= 1\nBinary\n b_0_\nEnd\n";
        assert_eq!(text, expected);
    }
}
