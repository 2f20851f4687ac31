use std::collections::BTreeMap;
use std::io::Write;

use serde::Serialize;

use super::{convergence_feval, RunRecord};
use crate::error::{Error, Result};

/// `t_{p,s}` and performance ratios `r_{p,s}`; `None` stands for `∞`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProfileTable {
    pub problems: Vec<String>,
    pub solvers: Vec<String>,
    pub t: Vec<Vec<Option<f64>>>,
    pub ratios: Vec<Vec<Option<f64>>>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProfilePoint {
    pub alpha: f64,
    pub solver: String,
    pub pi: f64,
}

impl ProfileTable {
    /// Builds ratios from a problems × solvers table of evaluation counts.
    pub fn from_times(
        problems: Vec<String>,
        solvers: Vec<String>,
        t: Vec<Vec<Option<f64>>>,
    ) -> Self {
        let ratios = t
            .iter()
            .map(|row| {
                let best = row.iter().flatten().copied().fold(f64::INFINITY, f64::min);
                row.iter()
                    .map(|ts| {
                        ts.map(|v| {
                            if best == 0.0 {
                                if v == 0.0 {
                                    1.0
                                } else {
                                    f64::INFINITY
                                }
                            } else {
                                v / best
                            }
                        })
                        .filter(|r| r.is_finite())
                    })
                    .collect()
            })
            .collect();
        ProfileTable {
            problems,
            solvers,
            t,
            ratios,
        }
    }

    /// `π_s(α)`: fraction of problems with `r_{p,s} ≤ α`.
    pub fn pi(&self, solver: usize, alpha: f64) -> f64 {
        if self.problems.is_empty() {
            return 0.0;
        }
        let hits = self
            .ratios
            .iter()
            .filter(|row| matches!(row[solver], Some(r) if r <= alpha))
            .count();
        hits as f64 / self.problems.len() as f64
    }

    pub fn max_finite_ratio(&self) -> f64 {
        self.ratios
            .iter()
            .flatten()
            .flatten()
            .copied()
            .fold(1.0, f64::max)
    }

    /// `π_s` sampled at `α = 2^(i·h)`, `i = 0..=steps`, covering every
    /// finite ratio.
    pub fn curve(&self, steps: usize) -> Vec<ProfilePoint> {
        let top = self.max_finite_ratio().log2().max(1.0) * 1.05;
        let steps = steps.max(1);
        let mut out = Vec::with_capacity((steps + 1) * self.solvers.len());
        for i in 0..=steps {
            let alpha = 2f64.powf(top * i as f64 / steps as f64);
            for (s, name) in self.solvers.iter().enumerate() {
                out.push(ProfilePoint {
                    alpha,
                    solver: name.clone(),
                    pi: self.pi(s, alpha),
                });
            }
        }
        out
    }
}

fn final_merit(r: &RunRecord) -> f64 {
    r.trace.rows().last().map_or(r.phi0, |row| row.merit_phi)
}

/// Lower-median run by final merit (ties broken by seed).
fn representative<'a>(runs: &[&'a RunRecord]) -> &'a RunRecord {
    let mut sorted = runs.to_vec();
    sorted.sort_by(|a, b| {
        final_merit(a)
            .total_cmp(&final_merit(b))
            .then(a.seed.cmp(&b.seed))
    });
    sorted[(sorted.len() - 1) / 2]
}

/// Builds the profile table from multi-seed run records. Each
/// (problem, solver) pair is represented by its median run; `φ*_p` is the
/// smallest final merit among the representatives on problem `p`.
pub fn build_profile(
    records: &[RunRecord],
    tau: f64,
    steps: usize,
) -> Result<(ProfileTable, Vec<ProfilePoint>)> {
    if records.is_empty() {
        return Err(Error::EmptyRecords);
    }
    let mut groups: BTreeMap<(&str, String), Vec<&RunRecord>> = BTreeMap::new();
    let mut problems: Vec<String> = Vec::new();
    let mut solvers: Vec<String> = Vec::new();
    for r in records {
        let tag = r.solver.to_string();
        if !problems.contains(&r.problem) {
            problems.push(r.problem.clone());
        }
        if !solvers.contains(&tag) {
            solvers.push(tag.clone());
        }
        groups.entry((r.problem.as_str(), tag)).or_default().push(r);
    }

    let mut t = Vec::with_capacity(problems.len());
    for p in &problems {
        let reps: Vec<Option<&RunRecord>> = solvers
            .iter()
            .map(|s| {
                groups
                    .get(&(p.as_str(), s.clone()))
                    .map(|runs| representative(runs))
            })
            .collect();
        let phi_star = reps
            .iter()
            .flatten()
            .map(|r| final_merit(r))
            .fold(f64::INFINITY, f64::min);
        let row = reps
            .iter()
            .map(|rep| {
                rep.and_then(|r| convergence_feval(r.trace.rows(), r.phi0, phi_star, tau))
                    .map(|v| v as f64)
            })
            .collect();
        t.push(row);
    }
    let table = ProfileTable::from_times(problems, solvers, t);
    let curve = table.curve(steps);
    Ok((table, curve))
}

/// Writes `alpha,solver,pi` rows with a header and LF line endings.
pub fn write_profile_csv<W: Write>(w: W, points: &[ProfilePoint]) -> Result<()> {
    let mut wtr = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(w);
    for p in points {
        wtr.serialize(p)?;
    }
    wtr.flush()?;
    Ok(())
}
