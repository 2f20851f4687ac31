//! Regularized augmented-Lagrangian outer iteration.
//!
//! Each outer step solves a regularized saddle-point system built from
//! smoothed Jacobians. The trial point is accepted when the approximate KKT
//! merit `‖F‖_*` decreases sufficiently; otherwise the derivative-free LM
//! inner loop takes over until it does.

use std::fmt;

use nalgebra::{DMatrix, DVector};

use crate::config::SolverConfig;
use crate::error::{EvalError, Result};
use crate::hessian::HessianModel;
use crate::linalg::{solve_least_squares, solve_saddle, SaddleOutcome, SaddleSystem};
use crate::lm_inner::{self, gamma_floor, InnerStatus, InnerStepLog, OuterContext};
use crate::problems::{evaluate_pair, objective, EvalCounter, Problem};
use crate::smoothing::{estimate_jacobians, DirectionSource, JacobianPair};
use crate::trace::Trace;

/// Lower bound of the penalty schedule.
pub const DELTA_MIN: f64 = 1e-6;
/// Smallest nonzero regularization used when a saddle system is singular.
pub const RHO_START: f64 = 1e-8;
/// Regularization beyond which the Newton step gives up.
pub const RHO_MAX: f64 = 1e12;

/// Primal point, residual copy and multiplier `w = (x, z, y)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Iterate {
    pub x: DVector<f64>,
    pub z: DVector<f64>,
    pub y: DVector<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Status {
    Converged,
    MaxIters,
    Budget,
    FeasibilityStall,
    Failed,
    FailedSingular,
}

impl Status {
    pub fn as_str(self) -> &'static str {
        match self {
            Status::Converged => "converged",
            Status::MaxIters => "max_iters",
            Status::Budget => "budget",
            Status::FeasibilityStall => "feasibility_stall",
            Status::Failed => "failed",
            Status::FailedSingular => "failed_singular",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        [
            Status::Converged,
            Status::MaxIters,
            Status::Budget,
            Status::FeasibilityStall,
            Status::Failed,
            Status::FailedSingular,
        ]
        .into_iter()
        .find(|st| st.as_str() == s)
    }

    /// Process exit code used by the command-line front end. Codes 1 and 2
    /// are left for usage and I/O errors.
    pub fn exit_code(self) -> i32 {
        match self {
            Status::Converged => 0,
            Status::MaxIters => 3,
            Status::Budget => 4,
            Status::FeasibilityStall => 5,
            Status::Failed => 6,
            Status::FailedSingular => 7,
        }
    }
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TransitionKind {
    NewtonAccepted,
    InnerSuccess,
    /// Inner loop hit its iteration limit; the sufficient-decrease test
    /// does not apply to this transition.
    InnerExhausted,
}

/// One outer step `k → k+1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transition {
    pub k: usize,
    pub kind: TransitionKind,
    pub merit_before: f64,
    pub merit_after: f64,
    pub theta: f64,
    pub eps: f64,
    pub gamma_before: f64,
    pub gamma_after: f64,
    pub step_norm: f64,
    pub delta: f64,
    pub rho: f64,
}

impl Transition {
    /// `merit_{k+1} ≤ θ·merit_k + ε_k`.
    pub fn satisfies_decrease(&self) -> bool {
        self.merit_after <= self.theta * self.merit_before + self.eps
    }
}

#[derive(Debug, Clone)]
pub struct SolveResult {
    pub status: Status,
    pub x: DVector<f64>,
    pub y: DVector<f64>,
    /// `½‖r(x)‖²`.
    pub f: f64,
    pub cviol: f64,
    /// Scaled KKT measure of the stopping test.
    pub kkt_res: f64,
    pub iters: usize,
    pub inner_iters: usize,
    pub fevals: u64,
    pub trace: Trace,
    pub transitions: Vec<Transition>,
    pub inner_log: Vec<InnerStepLog>,
    /// Every saddle matrix handed to the linear solver had this asymmetry or less.
    pub max_saddle_asymmetry: f64,
}

/// Mutable per-run state shared by the outer and inner loops.
pub(crate) struct Run<'a> {
    pub prob: &'a Problem,
    pub cfg: &'a SolverConfig,
    pub ctr: EvalCounter,
    pub dirs: DirectionSource,
    pub trace: Trace,
    pub inner_log: Vec<InnerStepLog>,
}

impl<'a> Run<'a> {
    pub(crate) fn new(prob: &'a Problem, cfg: &'a SolverConfig) -> Self {
        Run {
            prob,
            cfg,
            ctr: EvalCounter::with_limit(cfg.budget_for(prob.n)),
            dirs: DirectionSource::new(cfg.jacobian, cfg.seed),
            trace: Trace::new(),
            inner_log: Vec::new(),
        }
    }

    pub fn eval(
        &mut self,
        x: &DVector<f64>,
    ) -> std::result::Result<(DVector<f64>, DVector<f64>), EvalError> {
        evaluate_pair(self.prob, x, &mut self.ctr)
    }

    pub fn jacobians(
        &mut self,
        x: &DVector<f64>,
        gamma: f64,
        r: &DVector<f64>,
        c: &DVector<f64>,
    ) -> std::result::Result<JacobianPair, EvalError> {
        estimate_jacobians(
            self.prob,
            x,
            gamma,
            &mut self.dirs,
            Some((r, c)),
            &mut self.ctr,
        )
    }

    pub fn record(
        &mut self,
        jac: &JacobianPair,
        y: &DVector<f64>,
        r: &DVector<f64>,
        c: &DVector<f64>,
    ) {
        let kkt = scaled_kkt(jac, r, c, y);
        let cviol = if c.is_empty() { 0.0 } else { c.amax() };
        self.trace
            .record(self.ctr.total(), objective(r), cviol, kkt);
    }
}

/// The three blocks of the approximate KKT residual at `w` and their norm sum
/// `‖F‖_* = ‖J^rᵀz − J^cᵀy‖ + ‖z − r‖ + ‖c‖`.
pub fn kkt_residual(
    jac: &JacobianPair,
    w: &Iterate,
    r: &DVector<f64>,
    c: &DVector<f64>,
) -> ([DVector<f64>; 3], f64) {
    let g = jac.jr.transpose() * &w.z - jac.jc.transpose() * &w.y;
    let zr = &w.z - r;
    let merit = g.norm() + zr.norm() + c.norm();
    ([g, zr, c.clone()], merit)
}

/// Least-squares multiplier estimate `argmin ½‖J^cᵀy − J^rᵀr‖²`.
pub fn init_multiplier(jac: &JacobianPair, r: &DVector<f64>) -> DVector<f64> {
    if jac.jc.nrows() == 0 {
        return DVector::zeros(0);
    }
    solve_least_squares(&jac.jc.transpose(), &(jac.jr.transpose() * r))
}

/// `max{‖J^rᵀr − J^cᵀy‖_∞ / (max{100, ‖y‖₁/m}/100), ‖c‖_∞}`; the
/// constraint branch and scaling vanish when `m = 0`.
pub fn scaled_kkt(jac: &JacobianPair, r: &DVector<f64>, c: &DVector<f64>, y: &DVector<f64>) -> f64 {
    let g = jac.jr.transpose() * r - jac.jc.transpose() * y;
    let g_inf = if g.is_empty() { 0.0 } else { g.amax() };
    let m = c.len();
    if m == 0 {
        return g_inf;
    }
    let scale = (y.lp_norm(1) / m as f64).max(100.0) / 100.0;
    (g_inf / scale).max(c.amax())
}

pub fn stopping_test(
    jac: &JacobianPair,
    r: &DVector<f64>,
    c: &DVector<f64>,
    y: &DVector<f64>,
    tol: f64,
) -> bool {
    scaled_kkt(jac, r, c, y) <= tol
}

/// Penalty and tolerance schedules after an outer step:
/// `δ' = max{1e-6, min{0.1δ, ‖F‖_*}}` and
/// `ε' = max{min{1e3 δ', 0.99ε}, 0.9ε}`.
pub fn update_schedules(delta_prev: f64, eps: f64, merit_new: f64) -> (f64, f64) {
    let delta = DELTA_MIN.max((0.1 * delta_prev).min(merit_new));
    (delta, update_eps(eps, delta))
}

pub fn update_eps(eps: f64, delta: f64) -> f64 {
    (1e3 * delta).min(0.99 * eps).max(0.9 * eps)
}

/// Result of one Newton-like step.
#[derive(Debug, Clone)]
pub struct NewtonStep {
    pub w_hat: Iterate,
    pub dx_norm: f64,
    /// Regularization that made the system nonsingular.
    pub rho: f64,
    pub asymmetry: f64,
}

/// Assembles and solves the regularized saddle system at `w`, inflating
/// `ρ` on singular factorizations. `None` when `ρ` would exceed
/// [`RHO_MAX`].
pub fn newton_direction(
    hess: &HessianModel,
    jac: &JacobianPair,
    w: &Iterate,
    r: &DVector<f64>,
    c: &DVector<f64>,
    delta: f64,
    rho: f64,
) -> Result<Option<NewtonStep>> {
    let n = w.x.len();
    let h = hess.assemble(&w.z, &w.y);
    let mut rhs = DVector::zeros(n + w.z.len() + w.y.len());
    rhs.rows_mut(0, n)
        .copy_from(&(-(jac.jr.transpose() * &w.z) + jac.jc.transpose() * &w.y));
    rhs.rows_mut(n, w.z.len()).copy_from(&(&w.z - r));
    rhs.rows_mut(n + w.z.len(), w.y.len()).copy_from(&(-c));

    let mut rho = rho;
    loop {
        let sys = SaddleSystem {
            h_rho: &h + DMatrix::identity(n, n) * rho,
            jr: jac.jr.clone(),
            jc: jac.jc.clone(),
            delta,
            rhs: rhs.clone(),
        };
        let k = sys.assemble();
        let asymmetry = (&k - k.transpose()).amax();
        match solve_saddle(&sys)? {
            SaddleOutcome::Solved(step) => {
                let w_hat = Iterate {
                    x: &w.x + &step.dx,
                    z: &w.z + &step.dz,
                    y: &w.y + &step.dy,
                };
                return Ok(Some(NewtonStep {
                    w_hat,
                    dx_norm: step.dx.norm(),
                    rho,
                    asymmetry,
                }));
            }
            SaddleOutcome::Singular => {
                rho = RHO_START.max(10.0 * rho);
                if rho > RHO_MAX {
                    return Ok(None);
                }
            }
        }
    }
}

struct State {
    w: Iterate,
    r: DVector<f64>,
    c: DVector<f64>,
    jac: JacobianPair,
    delta: f64,
    rho: f64,
    eps: f64,
    gamma: f64,
    merit: f64,
}

fn finish(
    run: Run<'_>,
    status: Status,
    st: &State,
    iters: usize,
    inner_iters: usize,
    transitions: Vec<Transition>,
    asym: f64,
) -> SolveResult {
    SolveResult {
        status,
        x: st.w.x.clone(),
        y: st.w.y.clone(),
        f: objective(&st.r),
        cviol: if st.c.is_empty() { 0.0 } else { st.c.amax() },
        kkt_res: scaled_kkt(&st.jac, &st.r, &st.c, &st.w.y),
        iters,
        inner_iters,
        fevals: run.ctr.total(),
        trace: run.trace,
        transitions,
        inner_log: run.inner_log,
        max_saddle_asymmetry: asym,
    }
}

fn eval_status(e: EvalError) -> Status {
    match e {
        EvalError::BudgetExhausted => Status::Budget,
        EvalError::NonFinite => Status::Failed,
    }
}

/// Result for a run that never produced a first Jacobian.
fn early_exit(prob: &Problem, run: Run<'_>, status: Status) -> SolveResult {
    let x = prob.x0.clone();
    let r = prob.residual_uncounted(&x);
    let c = prob.constraints_uncounted(&x);
    let f = objective(&r);
    SolveResult {
        status,
        y: DVector::zeros(prob.m),
        f,
        cviol: if c.is_empty() { 0.0 } else { c.amax() },
        kkt_res: f64::INFINITY,
        x,
        iters: 0,
        inner_iters: 0,
        fevals: run.ctr.total(),
        trace: run.trace,
        transitions: Vec::new(),
        inner_log: run.inner_log,
        max_saddle_asymmetry: 0.0,
    }
}

/// Solves `min ½‖r(x)‖²  s.t.  c(x) = 0` from `prob.x0`.
pub fn solve(prob: &Problem, cfg: &SolverConfig) -> Result<SolveResult> {
    cfg.validate()?;
    let mut run = Run::new(prob, cfg);

    let (r0, c0) = match run.eval(&prob.x0) {
        Ok(v) => v,
        Err(e) => return Ok(early_exit(prob, run, eval_status(e))),
    };
    let jac0 = match run.jacobians(&prob.x0, cfg.gamma0, &r0, &c0) {
        Ok(j) => j,
        Err(e) => return Ok(early_exit(prob, run, eval_status(e))),
    };
    let y0 = init_multiplier(&jac0, &r0);
    let w0 = Iterate {
        x: prob.x0.clone(),
        z: r0.clone(),
        y: y0,
    };
    let (_, merit0) = kkt_residual(&jac0, &w0, &r0, &c0);
    let mut hess = HessianModel::new(cfg.hessian, prob.n, prob.m);
    hess.update(&w0.x, &jac0.jc)?;
    run.record(&jac0, &w0.y, &r0, &c0);

    let mut st = State {
        w: w0,
        r: r0,
        c: c0,
        jac: jac0,
        delta: cfg.delta0,
        rho: cfg.rho0,
        eps: cfg.eps0,
        gamma: cfg.gamma0,
        merit: merit0,
    };
    let mut transitions = Vec::new();
    let mut inner_iters = 0;
    let mut asym: f64 = 0.0;

    for k in 0..cfg.max_iters {
        if stopping_test(&st.jac, &st.r, &st.c, &st.w.y, cfg.kkt_tol) {
            return Ok(finish(
                run,
                Status::Converged,
                &st,
                k,
                inner_iters,
                transitions,
                asym,
            ));
        }

        let Some(step) = newton_direction(&hess, &st.jac, &st.w, &st.r, &st.c, st.delta, st.rho)?
        else {
            return Ok(finish(
                run,
                Status::FailedSingular,
                &st,
                k,
                inner_iters,
                transitions,
                asym,
            ));
        };
        asym = asym.max(step.asymmetry);
        st.rho = step.rho;

        let x_hat = &step.w_hat.x;
        let gamma_hat = step.dx_norm.max(gamma_floor(&st.w.x));
        let hat = run.eval(x_hat).and_then(|(r, c)| {
            let jac = run.jacobians(x_hat, gamma_hat, &r, &c)?;
            Ok((r, c, jac))
        });
        let (r_hat, c_hat, jac_hat) = match hat {
            Ok(v) => v,
            Err(e) => {
                return Ok(finish(
                    run,
                    eval_status(e),
                    &st,
                    k,
                    inner_iters,
                    transitions,
                    asym,
                ))
            }
        };
        let (_, merit_hat) = kkt_residual(&jac_hat, &step.w_hat, &r_hat, &c_hat);

        let merit_before = st.merit;
        let gamma_before = st.gamma;
        let eps_k = st.eps;
        let kind;
        if merit_hat <= cfg.theta * st.merit + st.eps {
            let (delta, eps) = update_schedules(st.delta, st.eps, merit_hat);
            let rho = if st.rho / 10.0 < RHO_START {
                0.0
            } else {
                st.rho / 10.0
            };
            st = State {
                w: step.w_hat,
                r: r_hat,
                c: c_hat,
                jac: jac_hat,
                delta,
                rho,
                eps,
                gamma: gamma_hat,
                merit: merit_hat,
            };
            run.record(&st.jac, &st.w.y, &st.r, &st.c);
            kind = TransitionKind::NewtonAccepted;
        } else {
            let outer = OuterContext {
                w: &st.w,
                r: &st.r,
                c: &st.c,
                jac: &st.jac,
                gamma: st.gamma,
                delta: st.delta,
                eps: st.eps,
                merit: st.merit,
            };
            let out = lm_inner::run_inner(&mut run, &outer);
            inner_iters += out.iterations;
            let eps = update_eps(st.eps, out.delta);
            st = State {
                w: out.w,
                r: out.r,
                c: out.c,
                jac: out.jac,
                delta: out.delta,
                rho: out.rho,
                eps,
                gamma: out.gamma,
                merit: out.merit,
            };
            match out.status {
                InnerStatus::Success => kind = TransitionKind::InnerSuccess,
                InnerStatus::IterationLimit => kind = TransitionKind::InnerExhausted,
                InnerStatus::FeasibilityStall => {
                    return Ok(finish(
                        run,
                        Status::FeasibilityStall,
                        &st,
                        k + 1,
                        inner_iters,
                        transitions,
                        asym,
                    ));
                }
                InnerStatus::EvalBudget => {
                    return Ok(finish(
                        run,
                        Status::Budget,
                        &st,
                        k + 1,
                        inner_iters,
                        transitions,
                        asym,
                    ));
                }
                InnerStatus::Failed => {
                    return Ok(finish(
                        run,
                        Status::Failed,
                        &st,
                        k + 1,
                        inner_iters,
                        transitions,
                        asym,
                    ));
                }
            }
        }
        hess.update(&st.w.x, &st.jac.jc)?;
        transitions.push(Transition {
            k,
            kind,
            merit_before,
            merit_after: st.merit,
            theta: cfg.theta,
            eps: eps_k,
            gamma_before,
            gamma_after: st.gamma,
            step_norm: step.dx_norm,
            delta: st.delta,
            rho: st.rho,
        });
    }

    let status = if stopping_test(&st.jac, &st.r, &st.c, &st.w.y, cfg.kkt_tol) {
        Status::Converged
    } else {
        Status::MaxIters
    };
    Ok(finish(
        run,
        status,
        &st,
        cfg.max_iters,
        inner_iters,
        transitions,
        asym,
    ))
}
