use std::fmt;
use std::fs::{self, File};
use std::io::BufWriter;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::merit_phi;
use crate::config::SolverConfig;
use crate::error::{Error, Result};
use crate::hessian::HessianMode;
use crate::par::{self, Execution};
use crate::problems::{lookup, objective, Problem};
use crate::smoothing::DirectionMode;
use crate::solver::{solve, Status};
use crate::trace::Trace;

/// A solver variant: Jacobian mode plus Hessian mode, written `fd+sr1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SolverTag {
    pub jacobian: DirectionMode,
    pub hessian: HessianMode,
}

impl fmt::Display for SolverTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}+{}", self.jacobian, self.hessian)
    }
}

impl FromStr for SolverTag {
    type Err = Error;

    /// Accepts `jacobian+hessian`, or a bare Jacobian mode with SR1.
    fn from_str(s: &str) -> Result<Self> {
        let (j, h) = s.split_once('+').unwrap_or((s, "sr1"));
        Ok(SolverTag {
            jacobian: j.parse()?,
            hessian: h.parse()?,
        })
    }
}

#[derive(Debug, Clone)]
pub struct BenchSpec {
    pub problems: Vec<String>,
    pub solvers: Vec<SolverTag>,
    pub seeds: Vec<u64>,
    /// Template for every run; mode and seed fields are overwritten.
    pub base: SolverConfig,
}

#[derive(Debug, Clone)]
pub struct RunRecord {
    pub problem: String,
    pub solver: SolverTag,
    pub seed: u64,
    pub status: Status,
    pub trace: Trace,
    pub f: f64,
    pub cviol: f64,
    pub kkt: f64,
    pub fevals: u64,
    pub iters: usize,
    /// Merit at the start point.
    pub phi0: f64,
}

impl RunRecord {
    fn trace_file(&self) -> String {
        format!("{}__{}__{}.csv", self.problem, self.solver, self.seed)
    }
}

pub fn start_merit(prob: &Problem) -> f64 {
    let f = objective(&prob.residual_uncounted(&prob.x0));
    let c = prob.constraints_uncounted(&prob.x0);
    merit_phi(f, if c.is_empty() { 0.0 } else { c.amax() })
}

/// Runs every (problem, solver, seed) combination. Runs are independent and
/// own their counters and random streams; the output order is fixed.
pub fn run_suite(spec: &BenchSpec, exec: Execution) -> Result<Vec<RunRecord>> {
    let problems = spec
        .problems
        .iter()
        .map(|name| lookup(name))
        .collect::<Result<Vec<Problem>>>()?;
    let mut jobs = Vec::new();
    for prob in &problems {
        for &solver in &spec.solvers {
            for &seed in &spec.seeds {
                jobs.push((prob, solver, seed));
            }
        }
    }
    par::map_slice(exec, &jobs, |&(prob, solver, seed)| {
        let cfg = SolverConfig {
            jacobian: solver.jacobian,
            hessian: solver.hessian,
            seed,
            ..spec.base.clone()
        };
        let res = solve(prob, &cfg)?;
        Ok(RunRecord {
            problem: prob.name.clone(),
            solver,
            seed,
            status: res.status,
            trace: res.trace,
            f: res.f,
            cviol: res.cviol,
            kkt: res.kkt_res,
            fevals: res.fevals,
            iters: res.iters,
            phi0: start_merit(prob),
        })
    })
    .into_iter()
    .collect()
}

#[derive(Debug, Serialize, Deserialize)]
struct RunRow {
    problem: String,
    solver: String,
    seed: u64,
    status: String,
    f: f64,
    cviol: f64,
    kkt: f64,
    fevals: u64,
    iters: usize,
    phi0: f64,
    trace_file: String,
}

fn csv_writer(path: &Path) -> Result<csv::Writer<BufWriter<File>>> {
    Ok(csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(BufWriter::new(File::create(path)?)))
}

/// Writes `runs.csv` and one trace CSV per run under `dir/traces/`.
pub fn write_records(dir: &Path, records: &[RunRecord]) -> Result<()> {
    let traces = dir.join("traces");
    fs::create_dir_all(&traces)?;
    let mut wtr = csv_writer(&dir.join("runs.csv"))?;
    for r in records {
        let file = r.trace_file();
        r.trace
            .write_csv(BufWriter::new(File::create(traces.join(&file))?))?;
        wtr.serialize(RunRow {
            problem: r.problem.clone(),
            solver: r.solver.to_string(),
            seed: r.seed,
            status: r.status.to_string(),
            f: r.f,
            cviol: r.cviol,
            kkt: r.kkt,
            fevals: r.fevals,
            iters: r.iters,
            phi0: r.phi0,
            trace_file: file,
        })?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn read_records(dir: &Path) -> Result<Vec<RunRecord>> {
    let mut rdr = csv::Reader::from_path(dir.join("runs.csv"))?;
    let mut out = Vec::new();
    for row in rdr.deserialize() {
        let row: RunRow = row?;
        let trace = Trace::read_csv(File::open(dir.join("traces").join(&row.trace_file))?)?;
        out.push(RunRecord {
            status: Status::parse(&row.status)
                .ok_or_else(|| Error::Malformed(format!("status `{}`", row.status)))?,
            solver: row.solver.parse()?,
            problem: row.problem,
            seed: row.seed,
            trace,
            f: row.f,
            cviol: row.cviol,
            kkt: row.kkt,
            fevals: row.fevals,
            iters: row.iters,
            phi0: row.phi0,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tag_round_trip() {
        let t: SolverTag = "oss-v2+bfgs".parse().unwrap();
        assert_eq!(t.jacobian, DirectionMode::OssPool);
        assert_eq!(t.hessian, HessianMode::Bfgs);
        assert_eq!(t.to_string(), "oss-v2+bfgs");
        assert_eq!("fd".parse::<SolverTag>().unwrap().hessian, HessianMode::Sr1);
        assert!("xx+sr1".parse::<SolverTag>().is_err());
    }

    #[test]
    fn start_merit_of_hs6() {
        let p = lookup("hs6").unwrap();
        // f = ½·2.2², violation 4.4.
        assert!((start_merit(&p) - (0.5 * 2.2 * 2.2 + 1e4 * 4.4)).abs() < 1e-9);
    }
}
