//! Continuous SOCP backends.
//!
//! A backend solves one continuous relaxation: the program with its
//! integrality flags dropped and its variable bounds replaced by the
//! `bounds` slice the caller passes. It returns a primal point, the dual
//! objective, and a status. Callers never see backend-specific types.

use clarabel::algebra::CscMatrix;
use clarabel::solver::{
    DefaultSettingsBuilder, DefaultSolver, IPSolver, SolverStatus, SupportedConeT,
};

use super::SolveParams;
use crate::conic::{Cone, ConicProgram, Relation};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BackendStatus {
    Optimal,
    Infeasible,
    Unbounded,
    NumericalFailure,
}

#[derive(Clone, Debug)]
pub struct BackendResult {
    pub status: BackendStatus,
    /// Primal point (empty unless `Optimal`).
    pub x: Vec<f64>,
    /// Primal objective including the constant term.
    pub objective: f64,
    pub dual_objective: f64,
    pub iterations: u32,
}

impl BackendResult {
    pub fn failed(status: BackendStatus) -> Self {
        Self {
            status,
            x: Vec::new(),
            objective: f64::NAN,
            dual_objective: f64::NAN,
            iterations: 0,
        }
    }
}

pub trait ConicBackend: Send + Sync {
    fn name(&self) -> &str;

    /// `attempt` is 0 for the first try and 1 for the single retry after a
    /// numerical failure; backends may use tighter settings on the retry.
    fn solve(
        &self,
        prog: &ConicProgram,
        bounds: &[(f64, f64)],
        params: &SolveParams,
        attempt: u32,
    ) -> BackendResult;
}

/// Interior-point backend built on Clarabel.
#[derive(Clone, Copy, Debug, Default)]
pub struct ClarabelBackend;

struct Rows {
    rows: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
    b: Vec<f64>,
}

impl Rows {
    fn new() -> Self {
        Self {
            rows: Vec::new(),
            cols: Vec::new(),
            vals: Vec::new(),
            b: Vec::new(),
        }
    }

    /// Appends `s = rhs - a.x`.
    fn push(&mut self, terms: impl IntoIterator<Item = (usize, f64)>, rhs: f64) {
        let r = self.b.len();
        for (c, v) in terms {
            self.rows.push(r);
            self.cols.push(c);
            self.vals.push(v);
        }
        self.b.push(rhs);
    }

    fn len(&self) -> usize {
        self.b.len()
    }
}

impl ClarabelBackend {
    fn assemble(
        prog: &ConicProgram,
        bounds: &[(f64, f64)],
    ) -> (CscMatrix<f64>, Vec<f64>, Vec<SupportedConeT<f64>>) {
        let n = prog.num_vars();
        let mut zero = Rows::new();
        let mut nonneg = Rows::new();
        for row in prog.rows() {
            let terms = row.terms.iter().map(|&(v, a)| (v.0, a));
            match row.relation {
                Relation::Eq => zero.push(terms, row.rhs),
                Relation::Le => nonneg.push(terms, row.rhs),
                Relation::Ge => nonneg.push(terms.map(|(c, a)| (c, -a)), -row.rhs),
            }
        }
        for (j, &(lb, ub)) in bounds.iter().enumerate() {
            if lb == ub {
                zero.push([(j, 1.0)], lb);
                continue;
            }
            if ub.is_finite() {
                nonneg.push([(j, 1.0)], ub);
            }
            if lb.is_finite() {
                nonneg.push([(j, -1.0)], -lb);
            }
        }
        let mut cones: Vec<SupportedConeT<f64>> = Vec::new();
        if zero.len() > 0 {
            cones.push(SupportedConeT::ZeroConeT(zero.len()));
        }
        if nonneg.len() > 0 {
            cones.push(SupportedConeT::NonnegativeConeT(nonneg.len()));
        }
        let mut soc = Rows::new();
        for c in prog.cones() {
            match &c.cone {
                // u*w >= |y|^2  <=>  (u + w, u - w, 2y) in the standard cone.
                Cone::Rotated { u, w, y } => {
                    soc.push([(u.0, -1.0), (w.0, -1.0)], 0.0);
                    soc.push([(u.0, -1.0), (w.0, 1.0)], 0.0);
                    for v in y {
                        soc.push([(v.0, -2.0)], 0.0);
                    }
                    cones.push(SupportedConeT::SecondOrderConeT(2 + y.len()));
                }
                Cone::Standard { t, y } => {
                    soc.push([(t.0, -1.0)], 0.0);
                    for v in y {
                        soc.push([(v.0, -1.0)], 0.0);
                    }
                    cones.push(SupportedConeT::SecondOrderConeT(1 + y.len()));
                }
            }
        }
        let mut rows = Vec::new();
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        let mut b = Vec::new();
        let mut offset = 0;
        for block in [zero, nonneg, soc] {
            rows.extend(block.rows.iter().map(|r| r + offset));
            cols.extend(block.cols);
            vals.extend(block.vals);
            offset += block.b.len();
            b.extend(block.b);
        }
        let a = CscMatrix::new_from_triplets(b.len(), n, rows, cols, vals);
        (a, b, cones)
    }
}

impl ConicBackend for ClarabelBackend {
    fn name(&self) -> &str {
        "clarabel"
    }

    fn solve(
        &self,
        prog: &ConicProgram,
        bounds: &[(f64, f64)],
        params: &SolveParams,
        attempt: u32,
    ) -> BackendResult {
        let n = prog.num_vars();
        if bounds.iter().any(|&(lb, ub)| lb > ub) {
            return BackendResult::failed(BackendStatus::Infeasible);
        }
        if n == 0 {
            let infeasible = prog.rows().iter().any(|r| match r.relation {
                Relation::Le => r.rhs < 0.0,
                Relation::Ge => r.rhs > 0.0,
                Relation::Eq => r.rhs != 0.0,
            });
            if infeasible {
                return BackendResult::failed(BackendStatus::Infeasible);
            }
            return BackendResult {
                status: BackendStatus::Optimal,
                x: Vec::new(),
                objective: prog.objective_constant(),
                dual_objective: prog.objective_constant(),
                iterations: 0,
            };
        }
        let (a, b, cones) = Self::assemble(prog, bounds);
        let p = CscMatrix::zeros((n, n));
        let tol = params.feasibility_tol;
        let mut builder = DefaultSettingsBuilder::default();
        builder
            .verbose(false)
            .tol_gap_abs(tol)
            .tol_gap_rel(tol)
            .tol_feas(tol)
            .tol_infeas_abs(tol)
            .tol_infeas_rel(tol)
            .max_iter(200);
        if attempt > 0 {
            builder
                .tol_gap_abs(tol * 1e-2)
                .tol_gap_rel(tol * 1e-2)
                .tol_feas(tol * 1e-2)
                .max_iter(500)
                .equilibrate_max_iter(50)
                .static_regularization_constant(1e-7);
        }
        if let Some(limit) = params.time_limit {
            builder.time_limit(limit.max(1e-3));
        }
        let settings = builder.build().expect("valid solver settings");
        let mut solver = match DefaultSolver::new(&p, prog.objective(), &a, &b, &cones, settings) {
            Ok(s) => s,
            Err(_) => return BackendResult::failed(BackendStatus::NumericalFailure),
        };
        solver.solve();
        let sol = &solver.solution;
        let status = match sol.status {
            SolverStatus::Solved | SolverStatus::AlmostSolved => BackendStatus::Optimal,
            SolverStatus::PrimalInfeasible | SolverStatus::AlmostPrimalInfeasible => {
                BackendStatus::Infeasible
            }
            SolverStatus::DualInfeasible | SolverStatus::AlmostDualInfeasible => {
                BackendStatus::Unbounded
            }
            _ => BackendStatus::NumericalFailure,
        };
        if status != BackendStatus::Optimal {
            return BackendResult {
                iterations: sol.iterations,
                ..BackendResult::failed(status)
            };
        }
        let x = sol.x.clone();
        BackendResult {
            status,
            objective: prog.objective_value(&x),
            dual_objective: sol.obj_val_dual + prog.objective_constant(),
            x,
            iterations: sol.iterations,
        }
    }
}
