//! Derivative-free solver for equality-constrained nonlinear least squares
//!
//! ```text
//! min ½‖r(x)‖²   s.t.   c(x) = 0
//! ```
//!
//! where `r` and `c` are black boxes. Jacobians are estimated by forward
//! differences along random orthonormal bases (orthogonal spherical
//! smoothing). An outer regularized augmented-Lagrangian iteration takes
//! Newton-like saddle-point steps and falls back to a derivative-free
//! Levenberg–Marquardt inner loop when a step does not reduce the KKT merit
//! enough. The [`bench`] module runs problem sweeps and builds performance
//! profiles.

pub mod bench;
pub mod config;
pub mod error;
pub mod hessian;
pub mod linalg;
pub mod lm_inner;
pub mod par;
pub mod problems;
pub mod smoothing;
pub mod solver;
pub mod trace;

pub use config::SolverConfig;
pub use error::{Error, EvalError, Result};
pub use hessian::HessianMode;
pub use par::Execution;
pub use problems::{lookup, make_degenerate, EvalCounter, Problem};
pub use smoothing::DirectionMode;
pub use solver::{solve, SolveResult, Status};
