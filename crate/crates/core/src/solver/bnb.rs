use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::time::Instant;

use log::{debug, info};

use super::backend::{BackendResult, BackendStatus, ClarabelBackend, ConicBackend};
use super::SolveParams;
use crate::conic::{evaluate, ConicProgram, Solution, SolveStatus, VarId};

/// Turns a fractional relaxed point into a full binary assignment to try as
/// an incumbent. Returning `None` skips the attempt.
pub trait IncumbentHeuristic: Send + Sync {
    fn propose(&self, prog: &ConicProgram, x: &[f64]) -> Option<Vec<(VarId, f64)>>;
}

/// Rounds every binary at 0.5.
#[derive(Clone, Copy, Debug, Default)]
pub struct RoundingHeuristic;

impl IncumbentHeuristic for RoundingHeuristic {
    fn propose(&self, prog: &ConicProgram, x: &[f64]) -> Option<Vec<(VarId, f64)>> {
        Some(
            prog.binaries()
                .into_iter()
                .map(|v| (v, if x[v.0] >= 0.5 { 1.0 } else { 0.0 }))
                .collect(),
        )
    }
}

/// Gap below which a finished search reports `Optimal` rather than `GapLimit`.
const OPTIMAL_GAP: f64 = 1e-9;

pub struct Solver<'a> {
    params: SolveParams,
    backend: Box<dyn ConicBackend + 'a>,
    heuristic: Box<dyn IncumbentHeuristic + 'a>,
}

struct Node {
    bounds: Vec<(f64, f64)>,
    /// Relaxation objective of the parent.
    bound: f64,
}

#[derive(PartialEq)]
struct Key(f64, usize);

impl Eq for Key {}

impl PartialOrd for Key {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Key {
    // Max-heap order: smallest bound first, then oldest node.
    fn cmp(&self, other: &Self) -> Ordering {
        other.0.total_cmp(&self.0).then(other.1.cmp(&self.1))
    }
}

pub(crate) struct Incumbent {
    pub(crate) objective: f64,
    pub(crate) x: Vec<f64>,
}

impl<'a> Solver<'a> {
    pub fn new(params: SolveParams) -> Self {
        Self {
            params,
            backend: Box::new(ClarabelBackend),
            heuristic: Box::new(RoundingHeuristic),
        }
    }

    pub fn with_backend(mut self, backend: impl ConicBackend + 'a) -> Self {
        self.backend = Box::new(backend);
        self
    }

    pub fn with_heuristic(mut self, heuristic: impl IncumbentHeuristic + 'a) -> Self {
        self.heuristic = Box::new(heuristic);
        self
    }

    pub fn params(&self) -> &SolveParams {
        &self.params
    }

    /// One backend solve with a single retry, with tighter settings, on a
    /// numerical failure or a point that fails residual certification.
    pub(crate) fn solve_node(&self, prog: &ConicProgram, bounds: &[(f64, f64)]) -> BackendResult {
        let mut res = BackendResult::failed(BackendStatus::NumericalFailure);
        for attempt in 0..2 {
            res = self.backend.solve(prog, bounds, &self.params, attempt);
            match res.status {
                BackendStatus::Optimal if self.certified(prog, &res.x) => return res,
                BackendStatus::Optimal => debug!(
                    "{}: point fails residual certification (attempt {attempt})",
                    self.backend.name()
                ),
                BackendStatus::NumericalFailure => {
                    debug!("{}: numerical failure (attempt {attempt})", self.backend.name())
                }
                _ => return res,
            }
        }
        if res.status == BackendStatus::Optimal {
            debug!("{}: point fails residual certification", self.backend.name());
        }
        BackendResult::failed(BackendStatus::NumericalFailure)
    }

    fn certified(&self, prog: &ConicProgram, x: &[f64]) -> bool {
        if x.len() != prog.num_vars() || x.iter().any(|v| !v.is_finite()) {
            return false;
        }
        let tol = self.params.certify_tol;
        let r = evaluate_relaxed(prog, x);
        r.linear <= tol && r.cone_min >= -tol
    }

    fn finish(
        &self,
        prog: &ConicProgram,
        status: SolveStatus,
        inc: &Incumbent,
        bound: f64,
        nodes: usize,
    ) -> Solution {
        let r = evaluate(prog, &inc.x);
        let bound = bound.min(inc.objective);
        Solution {
            status,
            objective: inc.objective,
            values: inc.x.clone(),
            bound,
            gap: Solution::relative_gap(inc.objective, bound),
            cone_gaps: r.cone_gaps,
            nodes,
        }
    }

    /// Continuous relaxation of `prog`.
    pub fn relaxation(&self, prog: &ConicProgram) -> Solution {
        let res = self.solve_node(prog, &prog.bounds());
        match res.status {
            BackendStatus::Optimal => {
                let bound = res.objective.min(res.dual_objective);
                let inc = Incumbent {
                    objective: res.objective,
                    x: res.x,
                };
                let mut sol = self.finish(prog, SolveStatus::Optimal, &inc, bound, 1);
                sol.bound = bound;
                sol
            }
            other => Solution {
                nodes: 1,
                ..Solution::without_point(map_status(other))
            },
        }
    }

    /// Re-solves with every binary fixed to the given values.
    pub(crate) fn solve_fixed(
        &self,
        prog: &ConicProgram,
        fix: &[(VarId, f64)],
    ) -> Option<Incumbent> {
        let mut bounds = prog.bounds();
        for &(v, val) in fix {
            let (lb, ub) = bounds[v.0];
            if val < lb || val > ub {
                return None;
            }
            bounds[v.0] = (val, val);
        }
        let res = self.solve_node(prog, &bounds);
        (res.status == BackendStatus::Optimal).then(|| {
            let mut x = res.x;
            for &(v, val) in fix {
                x[v.0] = val;
            }
            Incumbent {
                objective: prog.objective_value(&x),
                x,
            }
        })
    }

    /// Branch-and-bound to the configured relative gap.
    pub fn mixed_integer(&self, prog: &ConicProgram) -> Solution {
        let start = Instant::now();
        let binaries = prog.binaries();
        let p = &self.params;
        let mut incumbent: Option<Incumbent> = None;
        let mut heap = BinaryHeap::new();
        let mut nodes: Vec<Option<Node>> = vec![Some(Node {
            bounds: prog.bounds(),
            bound: f64::NEG_INFINITY,
        })];
        heap.push(Key(f64::NEG_INFINITY, 0));
        // Lowest bound among nodes discarded without being fully explored.
        let mut lost_bound = f64::INFINITY;
        let mut processed = 0usize;
        let mut failures = 0usize;
        let mut stop = None;

        let cutoff = |inc: &Option<Incumbent>| match inc {
            Some(i) => i.objective - p.rel_gap_tol * i.objective.abs().max(1.0),
            None => f64::INFINITY,
        };

        while let Some(Key(_, id)) = heap.pop() {
            let node = nodes[id].take().expect("node queued once");
            if node.bound >= cutoff(&incumbent) {
                lost_bound = lost_bound.min(node.bound);
                continue;
            }
            if processed >= p.node_limit {
                stop = Some(SolveStatus::NodeLimit);
                lost_bound = lost_bound.min(node.bound);
                break;
            }
            if p.time_limit
                .is_some_and(|t| start.elapsed().as_secs_f64() > t)
            {
                stop = Some(SolveStatus::TimeLimit);
                lost_bound = lost_bound.min(node.bound);
                break;
            }
            processed += 1;
            let res = self.solve_node(prog, &node.bounds);
            match res.status {
                BackendStatus::Optimal => {}
                BackendStatus::Infeasible => continue,
                BackendStatus::Unbounded if id == 0 => {
                    return Solution {
                        nodes: processed,
                        ..Solution::without_point(SolveStatus::Unbounded)
                    }
                }
                _ => {
                    failures += 1;
                    lost_bound = lost_bound.min(node.bound);
                    continue;
                }
            }
            let obj = res.objective;
            if obj >= cutoff(&incumbent) {
                lost_bound = lost_bound.min(obj.max(node.bound));
                continue;
            }
            let frac = binaries
                .iter()
                .map(|&v| (v, (res.x[v.0] - res.x[v.0].round()).abs()))
                .filter(|&(_, f)| f > p.integrality_tol)
                .max_by(|a, b| a.1.total_cmp(&b.1).then(b.0 .0.cmp(&a.0 .0)));
            let Some((branch_var, _)) = frac else {
                let fix: Vec<(VarId, f64)> =
                    binaries.iter().map(|&v| (v, res.x[v.0].round())).collect();
                let cand = self.solve_fixed(prog, &fix).or_else(|| {
                    let mut x = res.x.clone();
                    for &(v, val) in &fix {
                        x[v.0] = val;
                    }
                    self.certified(prog, &x).then(|| Incumbent {
                        objective: prog.objective_value(&x),
                        x,
                    })
                });
                if let Some(c) = cand {
                    offer(&mut incumbent, c, "integral node");
                } else {
                    failures += 1;
                    lost_bound = lost_bound.min(obj);
                }
                continue;
            };
            if processed == 1 || processed % p.heuristic_period.max(1) == 0 {
                if let Some(fix) = self.heuristic.propose(prog, &res.x) {
                    if let Some(c) = self.solve_fixed(prog, &fix) {
                        offer(&mut incumbent, c, "heuristic");
                    }
                }
            }
            for val in [0.0, 1.0] {
                let mut bounds = node.bounds.clone();
                bounds[branch_var.0] = (val, val);
                nodes.push(Some(Node { bounds, bound: obj }));
                heap.push(Key(obj, nodes.len() - 1));
            }
        }

        let open_bound = heap
            .iter()
            .filter_map(|k| nodes[k.1].as_ref().map(|n| n.bound))
            .fold(f64::INFINITY, f64::min);
        let bound = lost_bound.min(open_bound);
        info!(
            "branch-and-bound: {processed} nodes, {failures} failed, {:.3}s",
            start.elapsed().as_secs_f64()
        );
        match incumbent {
            Some(inc) => {
                let gap = Solution::relative_gap(inc.objective, bound.min(inc.objective));
                let status = match stop {
                    Some(s) => s,
                    None if gap <= OPTIMAL_GAP => SolveStatus::Optimal,
                    None => SolveStatus::GapLimit,
                };
                self.finish(prog, status, &inc, bound, processed)
            }
            None => {
                let status = match stop {
                    Some(s) => s,
                    None if failures > 0 => SolveStatus::NumericalFailure,
                    None => SolveStatus::Infeasible,
                };
                Solution {
                    nodes: processed,
                    bound,
                    ..Solution::without_point(status)
                }
            }
        }
    }
}

fn offer(incumbent: &mut Option<Incumbent>, cand: Incumbent, source: &str) {
    if incumbent
        .as_ref()
        .map_or(true, |i| cand.objective < i.objective)
    {
        debug!("new incumbent {:.9e} from {source}", cand.objective);
        *incumbent = Some(cand);
    }
}

/// Residuals ignoring integrality and the original bounds of branched
/// binaries (node bounds are tighter, never looser).
fn evaluate_relaxed(prog: &ConicProgram, x: &[f64]) -> crate::conic::Residuals {
    let mut r = evaluate(prog, x);
    r.linear = r.linear.max(r.bounds);
    r
}

fn map_status(s: BackendStatus) -> SolveStatus {
    match s {
        BackendStatus::Optimal => SolveStatus::Optimal,
        BackendStatus::Infeasible => SolveStatus::Infeasible,
        BackendStatus::Unbounded => SolveStatus::Unbounded,
        BackendStatus::NumericalFailure => SolveStatus::NumericalFailure,
    }
}
