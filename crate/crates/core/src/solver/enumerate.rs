use thiserror::Error;

use super::{SolveParams, Solver};
use crate::conic::{ConicProgram, Solution, SolveStatus, VarId};

pub const MAX_ENUMERATED_BINARIES: usize = 20;

#[derive(Debug, Error, PartialEq, Eq)]
#[error("{0} binaries exceed the enumeration limit of {MAX_ENUMERATED_BINARIES}")]
pub struct TooManyBinaries(pub usize);

/// Solves the continuous program for every binary assignment and keeps the
/// best. Ties go to the assignment enumerated first (binary counting order
/// over declaration order). Only meant as a test oracle.
pub fn enumerate_oracle(
    prog: &ConicProgram,
    params: &SolveParams,
) -> Result<Solution, TooManyBinaries> {
    let bins = prog.binaries();
    if bins.len() > MAX_ENUMERATED_BINARIES {
        return Err(TooManyBinaries(bins.len()));
    }
    let solver = Solver::new(params.clone());
    let mut best: Option<Solution> = None;
    let total = 1usize << bins.len();
    for mask in 0..total {
        let fix: Vec<(VarId, f64)> = bins
            .iter()
            .enumerate()
            .map(|(k, &v)| (v, ((mask >> k) & 1) as f64))
            .collect();
        let Some(inc) = solver.solve_fixed(prog, &fix) else {
            continue;
        };
        if best.as_ref().map_or(true, |b| inc.objective < b.objective) {
            best = Some(Solution {
                status: SolveStatus::Optimal,
                objective: inc.objective,
                bound: inc.objective,
                gap: 0.0,
                cone_gaps: crate::conic::evaluate(prog, &inc.x).cone_gaps,
                values: inc.x,
                nodes: total,
            });
        }
    }
    Ok(best.unwrap_or(Solution {
        nodes: total,
        ..Solution::without_point(SolveStatus::Infeasible)
    }))
}
