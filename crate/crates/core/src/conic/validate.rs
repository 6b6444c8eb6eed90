use std::fmt;

use super::{ConicProgram, Integrality};

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Diagnostic {
    /// Variable appears in no row, cone, or objective term.
    UnreferencedVariable(String),
    EmptyRow(String),
    BadBinaryBounds(String),
    EmptyBounds(String),
    EmptyCone(String),
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Diagnostic::UnreferencedVariable(n) => {
                write!(f, "warning: variable `{n}` is never referenced")
            }
            Diagnostic::EmptyRow(n) => write!(f, "warning: linear row `{n}` has no nonzero terms"),
            Diagnostic::BadBinaryBounds(n) => {
                write!(f, "error: binary `{n}` has bounds outside {{0, 1}}")
            }
            Diagnostic::EmptyBounds(n) => write!(f, "error: variable `{n}` has lb > ub"),
            Diagnostic::EmptyCone(n) => write!(f, "warning: cone `{n}` has no right-hand entries"),
        }
    }
}

pub fn validate(prog: &ConicProgram) -> Vec<Diagnostic> {
    let mut out = Vec::new();
    let mut used = vec![false; prog.num_vars()];
    for row in prog.rows() {
        if row.terms.is_empty() {
            out.push(Diagnostic::EmptyRow(row.name.clone()));
        }
        for (v, _) in &row.terms {
            used[v.0] = true;
        }
    }
    for c in prog.cones() {
        let mut any_tail = false;
        for (k, v) in c.cone.vars().enumerate() {
            used[v.0] = true;
            let head = match c.cone {
                super::Cone::Rotated { .. } => 2,
                super::Cone::Standard { .. } => 1,
            };
            any_tail |= k >= head;
        }
        if !any_tail {
            out.push(Diagnostic::EmptyCone(c.name.clone()));
        }
    }
    for (i, c) in prog.objective().iter().enumerate() {
        if *c != 0.0 {
            used[i] = true;
        }
    }
    for (v, used) in prog.variables().iter().zip(used) {
        if !used {
            out.push(Diagnostic::UnreferencedVariable(v.name.clone()));
        }
        if v.lb > v.ub {
            out.push(Diagnostic::EmptyBounds(v.name.clone()));
        }
        if v.kind == Integrality::Binary {
            let ok = |b: f64| b == 0.0 || b == 1.0;
            if !(ok(v.lb) && ok(v.ub)) {
                out.push(Diagnostic::BadBinaryBounds(v.name.clone()));
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::conic::Relation;

    #[test]
    fn clean_program_has_no_diagnostics() {
        let mut p = ConicProgram::new();
        let x = p.continuous("x", 0.0, 1.0).unwrap();
        p.add_linear("r", &[(x, 1.0)], Relation::Le, 1.0).unwrap();
        assert!(validate(&p).is_empty());
    }

    #[test]
    fn dangling_variable_warns() {
        let mut p = ConicProgram::new();
        p.continuous("x", 0.0, 1.0).unwrap();
        assert_eq!(
            validate(&p),
            vec![Diagnostic::UnreferencedVariable("x".into())]
        );
    }

    #[test]
    fn empty_row_warns() {
        let mut p = ConicProgram::new();
        let x = p.continuous("x", 0.0, 1.0).unwrap();
        p.set_objective(&[(x, 1.0)], 0.0).unwrap();
        p.add_linear("empty", &[(x, 0.0)], Relation::Le, 1.0)
            .unwrap();
        assert_eq!(validate(&p), vec![Diagnostic::EmptyRow("empty".into())]);
    }
}
