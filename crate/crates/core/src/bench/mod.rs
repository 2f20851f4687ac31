//! Benchmark sweeps and performance profiles.
//!
//! A run is summarized by its best-so-far merit `φ` as a function of
//! combined evaluations. `φ = f` at points with `‖c‖_∞ ≤ 1e-6` and
//! `f + 1e4‖c‖_∞` elsewhere. A solver solves problem `p` once
//! `(φ − φ*_p)/(φ₀ − φ*_p) ≤ τ`, and the profile counts problems solved
//! within a factor `α` of the fastest solver's evaluation count.

mod profile;
mod runner;
pub mod svg;

pub use profile::{build_profile, write_profile_csv, ProfilePoint, ProfileTable};
pub use runner::{
    read_records, run_suite, start_merit, write_records, BenchSpec, RunRecord, SolverTag,
};

use crate::trace::TraceRow;

/// Violation at or below which a point counts as feasible for [`merit_phi`].
pub const FEASIBLE_VIOLATION: f64 = 1e-6;
/// Weight on the violation for infeasible points.
pub const VIOLATION_WEIGHT: f64 = 1e4;

pub fn merit_phi(f: f64, cviol_inf: f64) -> f64 {
    if cviol_inf <= FEASIBLE_VIOLATION {
        f
    } else {
        f + VIOLATION_WEIGHT * cviol_inf
    }
}

/// Smallest evaluation count at which the trace passes the convergence
/// test, or `None` if it never does.
pub fn convergence_feval(trace: &[TraceRow], phi0: f64, phi_star: f64, tau: f64) -> Option<u64> {
    if phi0 <= phi_star {
        return Some(0);
    }
    let span = phi0 - phi_star;
    trace
        .iter()
        .find(|row| (row.merit_phi - phi_star) / span <= tau)
        .map(|row| row.fevals)
}
