//! Dense convex solvers sized for the small programs the fitters produce.

mod linalg;
pub mod lp;
pub mod maxdet;
pub mod mvee;
pub mod sdp;

use serde::{Deserialize, Serialize};

pub use linalg::{min_eigenvalue, sym_sqrt};
pub use lp::{solve_lp, LinearProgram};
pub use maxdet::{solve_maxdet, MaxDetProblem, MaxDetSolution};
pub use mvee::{mvee, Mvee};
pub use sdp::{
    solve_sdp, solve_standard, Block, BlockKind, LmiBlock, SdpProblem, SdpSolution, StandardSdp, StandardSolution,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    Unbounded,
    MaxIterations,
    NumericalFailure,
}

/// Outcome of a solver run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub status: SolveStatus,
    pub objective: f64,
    pub solution: Vec<f64>,
    /// Scaled primal feasibility residual of `solution`.
    pub residual: f64,
    /// Relative duality gap (zero when not applicable).
    pub gap: f64,
    pub iterations: usize,
}

impl SolveReport {
    pub fn is_optimal(&self) -> bool {
        self.status == SolveStatus::Optimal
    }
}
