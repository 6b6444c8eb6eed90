use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolveParams {
    /// Primal/dual feasibility and duality-gap tolerance of node solves.
    pub feasibility_tol: f64,
    /// A binary within this distance of 0 or 1 counts as integral.
    pub integrality_tol: f64,
    /// Nodes whose bound is within this relative gap of the incumbent are pruned.
    pub rel_gap_tol: f64,
    pub node_limit: usize,
    /// Wall-clock limit in seconds.
    pub time_limit: Option<f64>,
    /// Run the incumbent heuristic every this many nodes (and at the root).
    pub heuristic_period: usize,
    /// Maximum linear / cone residual of a reported solution.
    pub certify_tol: f64,
    /// Keep every solve on one thread. The search itself is sequential and
    /// reproducible; `false` lets independent sweep points run in parallel.
    pub deterministic: bool,
}

impl Default for SolveParams {
    fn default() -> Self {
        Self {
            feasibility_tol: 1e-8,
            integrality_tol: 1e-6,
            rel_gap_tol: 1e-4,
            node_limit: 100_000,
            time_limit: None,
            heuristic_period: 10,
            certify_tol: 1e-6,
            deterministic: true,
        }
    }
}

impl SolveParams {
    /// Tight settings for cross-checks against exhaustive enumeration.
    pub fn exact() -> Self {
        Self {
            rel_gap_tol: 1e-9,
            ..Self::default()
        }
    }
}
