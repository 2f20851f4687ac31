use std::fs::{self, File};
use std::io::BufWriter;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use dfcnls::bench::{
    build_profile, read_records, run_suite, svg, write_profile_csv, write_records, BenchSpec,
    SolverTag,
};
use dfcnls::problems::{corpus, problem_names, Family};
use dfcnls::{lookup, solve, DirectionMode, Execution, HessianMode, SolverConfig};

/// Grid points per solver in emitted profiles.
const PROFILE_STEPS: usize = 64;

#[derive(Parser)]
#[command(
    name = "dfcnls",
    version,
    about = "Derivative-free constrained nonlinear least squares"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one corpus problem; the exit status encodes the outcome.
    Solve {
        #[arg(long)]
        problem: String,
        #[arg(long, default_value = "fd")]
        jacobian: DirectionMode,
        #[arg(long, default_value = "sr1")]
        hessian: HessianMode,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1e-5)]
        tol: f64,
        #[arg(long, default_value_t = 150)]
        max_iters: usize,
        #[arg(long, default_value_t = 50)]
        inner_max_iters: usize,
        /// Defaults to 500·(n+1).
        #[arg(long)]
        max_fevals: Option<u64>,
        /// Trace CSV destination.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run problems × solvers × seeds and store the records.
    Bench {
        /// Comma-separated names, or `all`, `constrained`, `degenerate`, `unconstrained`.
        #[arg(long, default_value = "constrained")]
        problems: String,
        /// Comma-separated `jacobian+hessian` tags.
        #[arg(long, default_value = "oss-v1+sr1,oss-v2+sr1,fd+sr1")]
        solvers: String,
        #[arg(long, default_value_t = 20)]
        seeds: u64,
        /// Convergence tolerance for the profile written next to the records.
        #[arg(long, default_value_t = 1e-5)]
        tau: f64,
        #[arg(long)]
        out_dir: PathBuf,
        /// Run on one thread.
        #[arg(long)]
        sequential: bool,
    },
    /// Build a performance profile from stored records.
    Profile {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, default_value_t = 1e-5)]
        tau: f64,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        svg: Option<PathBuf>,
    },
    /// List the problem corpus.
    List,
}

fn expand_problems(spec: &str) -> Result<Vec<String>> {
    let family = match spec {
        "all" => return Ok(problem_names()),
        "constrained" => Family::Constrained,
        "degenerate" => Family::Degenerate,
        "unconstrained" => Family::Unconstrained,
        _ => {
            let names: Vec<String> = spec.split(',').map(|s| s.trim().to_string()).collect();
            for n in &names {
                lookup(n)?;
            }
            return Ok(names);
        }
    };
    Ok(corpus()
        .into_iter()
        .filter(|e| e.family == family)
        .map(|e| e.problem.name)
        .collect())
}

fn write_profile(
    records: &[dfcnls::bench::RunRecord],
    tau: f64,
    out: &PathBuf,
    svg_out: Option<&PathBuf>,
) -> Result<()> {
    if !(tau > 0.0 && tau < 1.0) {
        bail!("tau must lie in (0, 1), got {tau}");
    }
    let (_, curve) = build_profile(records, tau, PROFILE_STEPS)?;
    let file = File::create(out).with_context(|| format!("creating {}", out.display()))?;
    write_profile_csv(BufWriter::new(file), &curve)?;
    if let Some(path) = svg_out {
        fs::write(path, svg::render(&curve))
            .with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(())
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Solve {
            problem,
            jacobian,
            hessian,
            seed,
            tol,
            max_iters,
            inner_max_iters,
            max_fevals,
            out,
        } => {
            let prob = lookup(&problem)?;
            let cfg = SolverConfig {
                jacobian,
                hessian,
                seed,
                kkt_tol: tol,
                max_iters,
                inner_max_iters,
                max_fevals,
                ..Default::default()
            };
            cfg.validate()?;
            let res = solve(&prob, &cfg)?;
            if let Some(path) = out {
                let file =
                    File::create(&path).with_context(|| format!("creating {}", path.display()))?;
                res.trace.write_csv(BufWriter::new(file))?;
            }
            println!(
                "{} status={} f={:.10e} cviol={:.3e} kkt={:.3e} iters={} inner={} fevals={}",
                prob.name,
                res.status,
                res.f,
                res.cviol,
                res.kkt_res,
                res.iters,
                res.inner_iters,
                res.fevals
            );
            let x: Vec<String> = res.x.iter().map(|v| format!("{v:.10}")).collect();
            println!("x = [{}]", x.join(", "));
            Ok(ExitCode::from(res.status.exit_code() as u8))
        }
        Command::Bench {
            problems,
            solvers,
            seeds,
            tau,
            out_dir,
            sequential,
        } => {
            if seeds == 0 {
                bail!("need at least one seed");
            }
            let spec = BenchSpec {
                problems: expand_problems(&problems)?,
                solvers: solvers
                    .split(',')
                    .map(|s| s.trim().parse::<SolverTag>())
                    .collect::<dfcnls::Result<_>>()?,
                seeds: (0..seeds).collect(),
                base: SolverConfig::default(),
            };
            let exec = if sequential {
                Execution::Sequential
            } else {
                Execution::Parallel
            };
            let records = run_suite(&spec, exec)?;
            write_records(&out_dir, &records)?;
            write_profile(&records, tau, &out_dir.join("profile.csv"), None)?;
            for tag in &spec.solvers {
                let mine: Vec<_> = records.iter().filter(|r| r.solver == *tag).collect();
                let converged = mine
                    .iter()
                    .filter(|r| r.status == dfcnls::Status::Converged)
                    .count();
                println!("{tag:<14} converged {converged}/{}", mine.len());
            }
            println!("wrote {} runs to {}", records.len(), out_dir.display());
            Ok(ExitCode::SUCCESS)
        }
        Command::Profile {
            input,
            tau,
            out,
            svg,
        } => {
            let records = read_records(&input)
                .with_context(|| format!("reading records from {}", input.display()))?;
            write_profile(&records, tau, &out, svg.as_ref())?;
            Ok(ExitCode::SUCCESS)
        }
        Command::List => {
            println!("{:<24} {:>3} {:>3} {:>3}  f_opt", "name", "n", "p", "m");
            for e in corpus() {
                let p = &e.problem;
                let f = p.f_opt.map_or("-".to_string(), |v| format!("{v:.10}"));
                println!("{:<24} {:>3} {:>3} {:>3}  {f}", p.name, p.n, p.p, p.m);
            }
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
