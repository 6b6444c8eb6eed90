//! Solver-agnostic mixed-integer second-order-cone programs.
//!
//! A [`ConicProgram`] minimizes a linear objective over bounded variables
//! subject to linear rows and two cone families:
//!
//! * rotated: `u * w >= sum(y_k^2)` with `u, w >= 0`
//! * standard: `||y||_2 <= t`
//!
//! Cones reference variables only; affine cone entries need an auxiliary
//! variable tied by an equality row.

mod dump;
mod eval;
mod validate;

pub use dump::{parse_dump, write_dump};
pub use eval::{evaluate, Residuals};
pub use validate::{validate, Diagnostic};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ConicError {
    #[error("unknown variable handle {0}")]
    UnknownVariable(usize),
    #[error("binary variable `{name}` must have bounds within {{0, 1}}, got [{lb}, {ub}]")]
    BadBinaryBounds { name: String, lb: f64, ub: f64 },
    #[error("variable `{name}` has empty bound interval [{lb}, {ub}]")]
    EmptyBounds { name: String, lb: f64, ub: f64 },
    #[error("duplicate variable name `{0}`")]
    DuplicateName(String),
    #[error("invalid name `{0}`: names must be non-empty without whitespace")]
    BadName(String),
    #[error("non-finite coefficient in `{0}`")]
    NonFinite(String),
    #[error("dump line {line}: {msg}")]
    Dump { line: usize, msg: String },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct VarId(pub usize);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RowId(pub usize);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ConeId(pub usize);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Integrality {
    Continuous,
    Binary,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Variable {
    pub name: String,
    pub lb: f64,
    pub ub: f64,
    pub kind: Integrality,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Relation {
    Le,
    Eq,
    Ge,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearRow {
    pub name: String,
    pub terms: Vec<(VarId, f64)>,
    pub relation: Relation,
    pub rhs: f64,
}

impl LinearRow {
    pub fn activity(&self, x: &[f64]) -> f64 {
        self.terms.iter().map(|&(v, a)| a * x[v.0]).sum()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Cone {
    Rotated { u: VarId, w: VarId, y: Vec<VarId> },
    Standard { t: VarId, y: Vec<VarId> },
}

impl Cone {
    pub fn vars(&self) -> impl Iterator<Item = VarId> + '_ {
        let head: Vec<VarId> = match self {
            Cone::Rotated { u, w, .. } => vec![*u, *w],
            Cone::Standard { t, .. } => vec![*t],
        };
        let tail = match self {
            Cone::Rotated { y, .. } | Cone::Standard { y, .. } => y.iter().copied(),
        };
        head.into_iter().chain(tail)
    }

    /// `u*w - sum(y^2)` for rotated cones, `t - ||y||` for standard cones.
    pub fn gap(&self, x: &[f64]) -> f64 {
        match self {
            Cone::Rotated { u, w, y } => {
                x[u.0] * x[w.0] - y.iter().map(|v| x[v.0] * x[v.0]).sum::<f64>()
            }
            Cone::Standard { t, y } => {
                x[t.0] - y.iter().map(|v| x[v.0] * x[v.0]).sum::<f64>().sqrt()
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConeConstraint {
    pub name: String,
    pub cone: Cone,
}

/// Minimization program. Grows monotonically; handles stay valid.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ConicProgram {
    variables: Vec<Variable>,
    rows: Vec<LinearRow>,
    cones: Vec<ConeConstraint>,
    objective: Vec<f64>,
    objective_constant: f64,
    #[serde(skip)]
    names: std::collections::HashMap<String, usize>,
}

fn check_name(name: &str) -> Result<(), ConicError> {
    if name.is_empty()
        || name
            .chars()
            .any(|c| c.is_whitespace() || c == ':' || c == '|')
    {
        return Err(ConicError::BadName(name.to_string()));
    }
    Ok(())
}

impl ConicProgram {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_variable(
        &mut self,
        name: impl Into<String>,
        lb: f64,
        ub: f64,
        kind: Integrality,
    ) -> Result<VarId, ConicError> {
        let name = name.into();
        check_name(&name)?;
        if kind == Integrality::Binary {
            let ok = |b: f64| b == 0.0 || b == 1.0;
            if !(ok(lb) && ok(ub) && lb <= ub) {
                return Err(ConicError::BadBinaryBounds { name, lb, ub });
            }
        }
        if lb.is_nan() || ub.is_nan() || lb > ub {
            return Err(ConicError::EmptyBounds { name, lb, ub });
        }
        if self.names.contains_key(&name) {
            return Err(ConicError::DuplicateName(name));
        }
        let id = self.variables.len();
        self.names.insert(name.clone(), id);
        self.variables.push(Variable { name, lb, ub, kind });
        self.objective.push(0.0);
        Ok(VarId(id))
    }

    pub fn continuous(
        &mut self,
        name: impl Into<String>,
        lb: f64,
        ub: f64,
    ) -> Result<VarId, ConicError> {
        self.add_variable(name, lb, ub, Integrality::Continuous)
    }

    pub fn binary(&mut self, name: impl Into<String>) -> Result<VarId, ConicError> {
        self.add_variable(name, 0.0, 1.0, Integrality::Binary)
    }

    fn check_var(&self, v: VarId) -> Result<(), ConicError> {
        if v.0 < self.variables.len() {
            Ok(())
        } else {
            Err(ConicError::UnknownVariable(v.0))
        }
    }

    /// Adds `sum(a_k x_k) <rel> rhs`. Repeated variables are merged.
    pub fn add_linear(
        &mut self,
        name: impl Into<String>,
        terms: &[(VarId, f64)],
        relation: Relation,
        rhs: f64,
    ) -> Result<RowId, ConicError> {
        let name = name.into();
        check_name(&name)?;
        if !rhs.is_finite() {
            return Err(ConicError::NonFinite(name));
        }
        let mut merged: Vec<(VarId, f64)> = Vec::with_capacity(terms.len());
        for &(v, a) in terms {
            self.check_var(v)?;
            if !a.is_finite() {
                return Err(ConicError::NonFinite(name));
            }
            match merged.iter_mut().find(|(u, _)| *u == v) {
                Some(entry) => entry.1 += a,
                None => merged.push((v, a)),
            }
        }
        merged.retain(|&(_, a)| a != 0.0);
        self.rows.push(LinearRow {
            name,
            terms: merged,
            relation,
            rhs,
        });
        Ok(RowId(self.rows.len() - 1))
    }

    /// `u * w >= sum(y_k^2)`, `u, w >= 0`.
    pub fn add_rotated_cone(
        &mut self,
        name: impl Into<String>,
        u: VarId,
        w: VarId,
        y: &[VarId],
    ) -> Result<ConeId, ConicError> {
        self.add_cone(
            name.into(),
            Cone::Rotated {
                u,
                w,
                y: y.to_vec(),
            },
        )
    }

    /// `||y||_2 <= t`.
    pub fn add_soc(
        &mut self,
        name: impl Into<String>,
        t: VarId,
        y: &[VarId],
    ) -> Result<ConeId, ConicError> {
        self.add_cone(name.into(), Cone::Standard { t, y: y.to_vec() })
    }

    pub fn add_cone(&mut self, name: String, cone: Cone) -> Result<ConeId, ConicError> {
        check_name(&name)?;
        for v in cone.vars() {
            self.check_var(v)?;
        }
        self.cones.push(ConeConstraint { name, cone });
        Ok(ConeId(self.cones.len() - 1))
    }

    /// Replaces the objective with `constant + sum(c_k x_k)`.
    pub fn set_objective(
        &mut self,
        terms: &[(VarId, f64)],
        constant: f64,
    ) -> Result<(), ConicError> {
        let mut obj = vec![0.0; self.variables.len()];
        for &(v, c) in terms {
            self.check_var(v)?;
            if !c.is_finite() {
                return Err(ConicError::NonFinite("objective".into()));
            }
            obj[v.0] += c;
        }
        if !constant.is_finite() {
            return Err(ConicError::NonFinite("objective".into()));
        }
        self.objective = obj;
        self.objective_constant = constant;
        Ok(())
    }

    /// Adds `c` to the objective coefficient of `v`.
    pub fn add_objective_term(&mut self, v: VarId, c: f64) -> Result<(), ConicError> {
        self.check_var(v)?;
        if !c.is_finite() {
            return Err(ConicError::NonFinite("objective".into()));
        }
        self.objective[v.0] += c;
        Ok(())
    }

    /// Tightens or replaces the bounds of `v` under the same checks as
    /// [`ConicProgram::add_variable`].
    pub fn set_bounds(&mut self, v: VarId, lb: f64, ub: f64) -> Result<(), ConicError> {
        self.check_var(v)?;
        let var = &self.variables[v.0];
        let name = var.name.clone();
        if var.kind == Integrality::Binary {
            let ok = |b: f64| b == 0.0 || b == 1.0;
            if !(ok(lb) && ok(ub) && lb <= ub) {
                return Err(ConicError::BadBinaryBounds { name, lb, ub });
            }
        }
        if lb.is_nan() || ub.is_nan() || lb > ub {
            return Err(ConicError::EmptyBounds { name, lb, ub });
        }
        let var = &mut self.variables[v.0];
        var.lb = lb;
        var.ub = ub;
        Ok(())
    }

    pub fn variables(&self) -> &[Variable] {
        &self.variables
    }

    pub fn rows(&self) -> &[LinearRow] {
        &self.rows
    }

    pub fn cones(&self) -> &[ConeConstraint] {
        &self.cones
    }

    pub fn objective(&self) -> &[f64] {
        &self.objective
    }

    pub fn objective_constant(&self) -> f64 {
        self.objective_constant
    }

    pub fn num_vars(&self) -> usize {
        self.variables.len()
    }

    pub fn var(&self, name: &str) -> Option<VarId> {
        self.names.get(name).map(|&i| VarId(i))
    }

    pub fn binaries(&self) -> Vec<VarId> {
        self.variables
            .iter()
            .enumerate()
            .filter(|(_, v)| v.kind == Integrality::Binary)
            .map(|(i, _)| VarId(i))
            .collect()
    }

    pub fn bounds(&self) -> Vec<(f64, f64)> {
        self.variables.iter().map(|v| (v.lb, v.ub)).collect()
    }

    pub fn objective_value(&self, x: &[f64]) -> f64 {
        self.objective_constant
            + self
                .objective
                .iter()
                .zip(x)
                .map(|(c, v)| c * v)
                .sum::<f64>()
    }

    pub(crate) fn rebuild_names(&mut self) {
        self.names = self
            .variables
            .iter()
            .enumerate()
            .map(|(i, v)| (v.name.clone(), i))
            .collect();
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    Unbounded,
    /// Search stopped with a proven relative gap at most the tolerance.
    GapLimit,
    NodeLimit,
    TimeLimit,
    NumericalFailure,
}

impl SolveStatus {
    /// A primal point satisfying all constraints is attached.
    pub fn has_solution(self) -> bool {
        matches!(self, SolveStatus::Optimal | SolveStatus::GapLimit)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Solution {
    pub status: SolveStatus,
    pub objective: f64,
    pub values: Vec<f64>,
    /// Best proven lower bound.
    pub bound: f64,
    /// `(objective - bound) / max(1, |objective|)`.
    pub gap: f64,
    pub cone_gaps: Vec<f64>,
    pub nodes: usize,
}

impl Solution {
    pub fn without_point(status: SolveStatus) -> Self {
        Self {
            status,
            objective: f64::NAN,
            values: Vec::new(),
            bound: f64::NAN,
            gap: f64::NAN,
            cone_gaps: Vec::new(),
            nodes: 0,
        }
    }

    pub fn value(&self, v: VarId) -> f64 {
        self.values[v.0]
    }

    /// A feasible point is attached: a finished search, or a limit stop
    /// that already holds an incumbent.
    pub fn has_point(&self) -> bool {
        match self.status {
            SolveStatus::Optimal | SolveStatus::GapLimit => true,
            SolveStatus::NodeLimit | SolveStatus::TimeLimit => self.objective.is_finite(),
            _ => false,
        }
    }

    pub fn relative_gap(objective: f64, bound: f64) -> f64 {
        ((objective - bound) / objective.abs().max(1.0)).max(0.0)
    }
}
