//! Hand-coded desk-scale corpus.
//!
//! Constrained entries come from the Hock–Schittkowski collection, with the
//! objective written as `½‖r‖²`; the listed `f_opt` is therefore half of the
//! collection's tabulated value. Unconstrained entries are from the
//! Moré–Garbow–Hillstrom set.

use std::f64::consts::PI;

use nalgebra::DVector;

use super::{make_degenerate, Problem};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Family {
    Constrained,
    Unconstrained,
    Degenerate,
}

#[derive(Debug, Clone)]
pub struct CorpusEntry {
    pub problem: Problem,
    pub family: Family,
}

fn v(xs: &[f64]) -> DVector<f64> {
    DVector::from_column_slice(xs)
}

/// HS6: `(1−x₁)²` s.t. `10(x₂−x₁²) = 0`.
fn hs6() -> Problem {
    Problem::new(
        "hs6",
        vec![-1.2, 1.0],
        1,
        1,
        |x| v(&[1.0 - x[0]]),
        |x| v(&[10.0 * (x[1] - x[0] * x[0])]),
    )
    .with_optimum(0.0, Some(vec![1.0, 1.0]))
}

/// HS27: `0.01(x₁−1)² + (x₂−x₁²)²` s.t. `x₁ + x₃² + 1 = 0`.
fn hs27() -> Problem {
    Problem::new(
        "hs27",
        vec![2.0, 2.0, 2.0],
        2,
        1,
        |x| v(&[0.1 * (x[0] - 1.0), x[1] - x[0] * x[0]]),
        |x| v(&[x[0] + x[2] * x[2] + 1.0]),
    )
    .with_optimum(0.02, Some(vec![-1.0, 1.0, 0.0]))
}

/// HS28: `(x₁+x₂)² + (x₂+x₃)²` s.t. `x₁ + 2x₂ + 3x₃ = 1`.
fn hs28() -> Problem {
    Problem::new(
        "hs28",
        vec![-4.0, 1.0, 1.0],
        2,
        1,
        |x| v(&[x[0] + x[1], x[1] + x[2]]),
        |x| v(&[x[0] + 2.0 * x[1] + 3.0 * x[2] - 1.0]),
    )
    .with_optimum(0.0, Some(vec![0.5, -0.5, 0.5]))
}

/// HS42: `Σ(xᵢ−i)²` s.t. `x₁ = 2`, `x₃² + x₄² = 2`.
fn hs42() -> Problem {
    let s2 = 2f64.sqrt();
    Problem::new(
        "hs42",
        vec![1.0, 1.0, 1.0, 1.0],
        4,
        2,
        |x| v(&[x[0] - 1.0, x[1] - 2.0, x[2] - 3.0, x[3] - 4.0]),
        |x| v(&[x[0] - 2.0, x[2] * x[2] + x[3] * x[3] - 2.0]),
    )
    .with_optimum(
        0.5 * (28.0 - 10.0 * s2),
        Some(vec![2.0, 2.0, 0.6 * s2, 0.8 * s2]),
    )
}

/// HS48: `(x₁−1)² + (x₂−x₃)² + (x₄−x₅)²` with two linear constraints.
fn hs48() -> Problem {
    Problem::new(
        "hs48",
        vec![3.0, 5.0, -3.0, 2.0, -2.0],
        3,
        2,
        |x| v(&[x[0] - 1.0, x[1] - x[2], x[3] - x[4]]),
        |x| {
            v(&[
                x[0] + x[1] + x[2] + x[3] + x[4] - 5.0,
                x[2] - 2.0 * (x[3] + x[4]) + 3.0,
            ])
        },
    )
    .with_optimum(0.0, Some(vec![1.0; 5]))
}

/// HS51: `(x₁−x₂)² + (x₂+x₃−2)² + (x₄−1)² + (x₅−1)²` with three linear constraints.
fn hs51() -> Problem {
    Problem::new(
        "hs51",
        vec![2.5, 0.5, 2.0, -1.0, 0.5],
        4,
        3,
        |x| v(&[x[0] - x[1], x[1] + x[2] - 2.0, x[3] - 1.0, x[4] - 1.0]),
        |x| {
            v(&[
                x[0] + 3.0 * x[1] - 4.0,
                x[2] + x[3] - 2.0 * x[4],
                x[1] - x[4],
            ])
        },
    )
    .with_optimum(0.0, Some(vec![1.0; 5]))
}

/// HS52: `(4x₁−x₂)² + (x₂+x₃−2)² + (x₄−1)² + (x₅−1)²`, nonzero residual at
/// the solution `(−33, 11, 180, −158, 11)/349`.
fn hs52() -> Problem {
    let d = 349.0;
    Problem::new(
        "hs52",
        vec![2.0; 5],
        4,
        3,
        |x| v(&[4.0 * x[0] - x[1], x[1] + x[2] - 2.0, x[3] - 1.0, x[4] - 1.0]),
        |x| v(&[x[0] + 3.0 * x[1], x[2] + x[3] - 2.0 * x[4], x[1] - x[4]]),
    )
    .with_optimum(
        0.5 * 1859.0 / d,
        Some(vec![-33.0 / d, 11.0 / d, 180.0 / d, -158.0 / d, 11.0 / d]),
    )
}

fn rosenbrock() -> Problem {
    Problem::unconstrained("rosenbrock", vec![-1.2, 1.0], 2, |x| {
        v(&[10.0 * (x[1] - x[0] * x[0]), 1.0 - x[0]])
    })
    .with_optimum(0.0, Some(vec![1.0, 1.0]))
}

/// Extended Rosenbrock with `n = 4`.
fn rosenbrock4() -> Problem {
    Problem::unconstrained("rosenbrock4", vec![-1.2, 1.0, -1.2, 1.0], 4, |x| {
        v(&[
            10.0 * (x[1] - x[0] * x[0]),
            1.0 - x[0],
            10.0 * (x[3] - x[2] * x[2]),
            1.0 - x[2],
        ])
    })
    .with_optimum(0.0, Some(vec![1.0; 4]))
}

/// Powell singular function; the Jacobian is singular at the solution.
fn powell_singular() -> Problem {
    Problem::unconstrained("powell-singular", vec![3.0, -1.0, 0.0, 1.0], 4, |x| {
        let a = x[1] - 2.0 * x[2];
        let b = x[0] - x[3];
        v(&[
            x[0] + 10.0 * x[1],
            5f64.sqrt() * (x[2] - x[3]),
            a * a,
            10f64.sqrt() * b * b,
        ])
    })
    .with_optimum(0.0, Some(vec![0.0; 4]))
}

fn beale() -> Problem {
    Problem::unconstrained("beale", vec![1.0, 1.0], 3, |x| {
        v(&[
            1.5 - x[0] * (1.0 - x[1]),
            2.25 - x[0] * (1.0 - x[1] * x[1]),
            2.625 - x[0] * (1.0 - x[1] * x[1] * x[1]),
        ])
    })
    .with_optimum(0.0, Some(vec![3.0, 0.5]))
}

fn helical_valley() -> Problem {
    Problem::unconstrained("helical-valley", vec![-1.0, 0.0, 0.0], 3, |x| {
        // Branch cut on the negative x₂ axis, range [−¼, ¾).
        let mut theta = x[1].atan2(x[0]) / (2.0 * PI);
        if theta < -0.25 {
            theta += 1.0;
        }
        v(&[
            10.0 * (x[2] - 10.0 * theta),
            10.0 * ((x[0] * x[0] + x[1] * x[1]).sqrt() - 1.0),
            x[2],
        ])
    })
    .with_optimum(0.0, Some(vec![1.0, 0.0, 0.0]))
}

const CONSTRAINED: &[fn() -> Problem] = &[hs6, hs27, hs28, hs42, hs48, hs51, hs52];
const UNCONSTRAINED: &[fn() -> Problem] = &[
    rosenbrock,
    rosenbrock4,
    powell_singular,
    beale,
    helical_valley,
];

/// Every corpus entry: constrained problems, their degenerate variants and
/// the unconstrained set.
pub fn corpus() -> Vec<CorpusEntry> {
    let mut out = Vec::new();
    for make in CONSTRAINED {
        out.push(CorpusEntry {
            problem: make(),
            family: Family::Constrained,
        });
    }
    for make in CONSTRAINED {
        out.push(CorpusEntry {
            problem: make_degenerate(&make()).expect("constrained entries have m >= 1"),
            family: Family::Degenerate,
        });
    }
    for make in UNCONSTRAINED {
        out.push(CorpusEntry {
            problem: make(),
            family: Family::Unconstrained,
        });
    }
    out
}

pub fn problem_names() -> Vec<String> {
    corpus().into_iter().map(|e| e.problem.name).collect()
}

/// Resolves a registry name such as `hs6`, `hs6-degenerate` or `rosenbrock`.
pub fn lookup(name: &str) -> Result<Problem> {
    let (base, degenerate) = match name.strip_suffix("-degenerate") {
        Some(b) => (b, true),
        None => (name, false),
    };
    let found = CONSTRAINED
        .iter()
        .chain(UNCONSTRAINED)
        .map(|make| make())
        .find(|p| p.name == base)
        .ok_or_else(|| Error::UnknownProblem(name.to_string()))?;
    if degenerate {
        make_degenerate(&found).map_err(|_| Error::UnknownProblem(name.to_string()))
    } else {
        Ok(found)
    }
}
