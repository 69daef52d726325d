//! Dense primal-dual interior-point solver for small linear, second-order cone
//! and semidefinite programs.
//!
//! Problems are assembled with [`ProblemBuilder`] in maximisation form and
//! solved with [`solve`].

pub mod cones;
pub mod ipm;
pub mod problem;

pub use cones::{mat_to_svec, svec_index, svec_len, svec_to_mat, Cone};
pub use ipm::{solve, Settings, Solution, Status};
pub use problem::{ConicProblem, LinExpr, ProblemBuilder, Var};
