//! Linear algebra kernels shared by the pricers.

pub mod expm;
pub mod gmres;
pub mod lcp;
pub mod quad;
pub mod tridiag;

pub use expm::{default_substeps, expm_action, BackwardEuler, Operand};
pub use lcp::{
    complementarity_residual,
    active_set, howard_solve, lemke_solve, psor_solve, solve_lcp, LcpMatrix, LcpOperator, LcpProblem, LcpSolution, LcpStatus,
    SolverKind,
};
pub use tridiag::{solve_tridiag, TriDiag, TriFactor};
