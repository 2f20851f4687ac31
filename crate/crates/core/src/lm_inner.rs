//! Derivative-free Levenberg–Marquardt iteration on the augmented
//! Lagrangian, used when the outer Newton-like step fails the
//! sufficient-decrease test.
//!
//! For fixed multiplier `y_k` and penalty `δ` the subproblem
//! `min ½‖r‖² − y_kᵀc + ½δ⁻¹‖c‖²` is the least-squares problem
//! `min ½‖Φ(x; δ)‖²` with `Φ = (r, δ^{-1/2}(c − δ y_k))`.

use nalgebra::{DMatrix, DVector};

use crate::error::EvalError;
use crate::linalg::solve_lm_step;
use crate::smoothing::JacobianPair;
use crate::solver::{kkt_residual, Iterate, Run};

/// Initial LM parameter on every inner call.
pub const LAMBDA_INIT: f64 = 1.0;
/// Stall test: `‖Jcᵀc‖` at or below this while infeasible.
pub const STALL_GRADIENT_TOL: f64 = 1e-6;
/// The stall test only applies when `‖c‖_∞` exceeds this.
pub const STALL_INFEASIBILITY: f64 = 1e-5;
/// Floor on the smoothing parameter relative to `1 + ‖x‖`.
pub const GAMMA_FLOOR: f64 = 1e-12;

/// Least-squares model of the augmented Lagrangian at one point.
#[derive(Debug, Clone)]
pub struct AugLsModel {
    pub phi: DVector<f64>,
    pub jac: DMatrix<f64>,
    pub grad_phi: DVector<f64>,
}

impl AugLsModel {
    pub fn new(
        r: &DVector<f64>,
        c: &DVector<f64>,
        jac: &JacobianPair,
        delta: f64,
        y_k: &DVector<f64>,
    ) -> Self {
        let (p, m, n) = (r.len(), c.len(), jac.jr.ncols());
        let phi = stacked_residual(r, c, delta, y_k);
        let s = delta.sqrt().recip();
        let mut j = DMatrix::zeros(p + m, n);
        j.rows_mut(0, p).copy_from(&jac.jr);
        j.rows_mut(p, m).copy_from(&(&jac.jc * s));
        let grad_phi =
            jac.jr.transpose() * r - jac.jc.transpose() * y_k + jac.jc.transpose() * c / delta;
        AugLsModel {
            phi,
            jac: j,
            grad_phi,
        }
    }

    /// `‖Φ‖² − ‖Φ + Jd‖²`.
    pub fn predicted_reduction(&self, d: &DVector<f64>) -> f64 {
        self.phi.norm_squared() - (&self.phi + &self.jac * d).norm_squared()
    }
}

/// `Φ(x; δ) = (r, δ^{-1/2}(c − δ y_k))`.
pub fn stacked_residual(
    r: &DVector<f64>,
    c: &DVector<f64>,
    delta: f64,
    y_k: &DVector<f64>,
) -> DVector<f64> {
    let s = delta.sqrt().recip();
    DVector::from_iterator(
        r.len() + c.len(),
        r.iter().copied().chain(
            c.iter()
                .zip(y_k.iter())
                .map(|(ci, yi)| s * (ci - delta * yi)),
        ),
    )
}

/// Actual over predicted reduction. `None` flags a null step (nonpositive
/// predicted reduction), which the caller treats as `ζ = −∞`.
pub fn reduction_ratio(
    model: &AugLsModel,
    phi_trial: &DVector<f64>,
    d: &DVector<f64>,
) -> Option<f64> {
    let pred = model.predicted_reduction(d);
    if pred.is_nan() || pred <= 0.0 {
        return None;
    }
    Some((model.phi.norm_squared() - phi_trial.norm_squared()) / pred)
}

/// Outcome of trying the step `d` from `x`.
#[derive(Debug, Clone)]
pub struct Trial {
    pub zeta: f64,
    /// `(r, c)` at `x + d`, absent for null steps.
    pub values: Option<(DVector<f64>, DVector<f64>)>,
}

/// Evaluates `r` and `c` once at `x + d` and returns the reduction ratio.
/// Null steps are detected before any evaluation.
pub(crate) fn lm_ratio(
    run: &mut Run<'_>,
    x: &DVector<f64>,
    d: &DVector<f64>,
    model: &AugLsModel,
    delta: f64,
    y_k: &DVector<f64>,
) -> Result<Trial, EvalError> {
    let pred = model.predicted_reduction(d);
    if pred.is_nan() || pred <= 0.0 {
        return Ok(Trial {
            zeta: f64::NEG_INFINITY,
            values: None,
        });
    }
    let (r, c) = run.eval(&(x + d))?;
    let phi_trial = stacked_residual(&r, &c, delta, y_k);
    let zeta = reduction_ratio(model, &phi_trial, d).unwrap_or(f64::NEG_INFINITY);
    Ok(Trial {
        zeta,
        values: Some((r, c)),
    })
}

pub fn update_lambda(
    lambda: f64,
    zeta: f64,
    g_norm: f64,
    p0: f64,
    p1: f64,
    p2: f64,
    lambda_min: f64,
) -> f64 {
    if zeta < p0 || g_norm < p1 / lambda {
        4.0 * lambda
    } else if g_norm < p2 / lambda {
        lambda
    } else {
        (0.25 * lambda).max(lambda_min)
    }
}

/// Smoothing-parameter update. `jc_c_norm` is `‖(J^c)ᵀc‖` at the current
/// inner point and only matters when the penalty changed on the previous
/// iteration.
pub fn update_gamma(
    gamma: f64,
    d_norm: f64,
    delta_changed: bool,
    jc_c_norm: f64,
    p3: f64,
    p4: f64,
    gamma_outer: f64,
) -> f64 {
    if !delta_changed {
        (0.5 * gamma).min(d_norm)
    } else if jc_c_norm < p3 * gamma {
        0.5 * gamma
    } else if jc_c_norm < p4 * gamma {
        gamma
    } else {
        (2.0 * gamma).min(gamma_outer)
    }
}

/// Penalty decrease test: the Lagrangian gradient has dropped enough but
/// the violation has not.
pub fn should_decrease_delta(
    grad_next_norm: f64,
    c_next_norm: f64,
    grad_outer_norm: f64,
    c_outer_norm: f64,
    theta: f64,
    eps: f64,
) -> bool {
    grad_next_norm <= theta * grad_outer_norm + 0.5 * eps
        && c_next_norm > theta * c_outer_norm + 0.5 * eps
}

/// `‖J^rᵀ r − J^cᵀ y‖`.
pub fn lagrangian_gradient_norm(jac: &JacobianPair, r: &DVector<f64>, y: &DVector<f64>) -> f64 {
    (jac.jr.transpose() * r - jac.jc.transpose() * y).norm()
}

/// `δ_{k,j+1}`: a tenth of `δ` when [`should_decrease_delta`] holds at the
/// new point, else `δ` unchanged. The multiplier estimate uses the
/// pre-update `δ`.
#[allow(clippy::too_many_arguments)]
pub fn maybe_decrease_delta(
    delta: f64,
    y_k: &DVector<f64>,
    r_next: &DVector<f64>,
    c_next: &DVector<f64>,
    jac_next: &JacobianPair,
    grad_outer_norm: f64,
    c_outer_norm: f64,
    theta: f64,
    eps: f64,
) -> f64 {
    let y_test = y_k - c_next / delta;
    let g = lagrangian_gradient_norm(jac_next, r_next, &y_test);
    if should_decrease_delta(g, c_next.norm(), grad_outer_norm, c_outer_norm, theta, eps) {
        0.1 * delta
    } else {
        delta
    }
}

/// Quantities frozen at the outer iterate that calls the inner loop.
#[derive(Debug, Clone)]
pub struct OuterContext<'a> {
    pub w: &'a Iterate,
    pub r: &'a DVector<f64>,
    pub c: &'a DVector<f64>,
    pub jac: &'a JacobianPair,
    pub gamma: f64,
    pub delta: f64,
    pub eps: f64,
    /// `‖F_{s_k}‖_*`.
    pub merit: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InnerStatus {
    /// Sufficient decrease of `‖F‖_*` reached.
    Success,
    /// Stationary for the violation while infeasible.
    FeasibilityStall,
    /// Inner iteration limit reached.
    IterationLimit,
    /// Evaluation budget exhausted.
    EvalBudget,
    /// Non-finite evaluation or linear-algebra failure.
    Failed,
}

#[derive(Debug, Clone)]
pub struct InnerOutcome {
    pub status: InnerStatus,
    pub w: Iterate,
    pub r: DVector<f64>,
    pub c: DVector<f64>,
    pub jac: JacobianPair,
    pub gamma: f64,
    pub delta: f64,
    pub rho: f64,
    pub merit: f64,
    pub iterations: usize,
}

/// Per-iteration log, kept for invariant checks.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InnerStepLog {
    pub lambda: f64,
    pub lambda_next: f64,
    pub d_norm: f64,
    pub gamma: f64,
    pub delta: f64,
    pub accepted: bool,
    pub predicted: f64,
    pub phi_sq: f64,
    pub phi_sq_trial: f64,
}

pub(crate) fn gamma_floor(x: &DVector<f64>) -> f64 {
    GAMMA_FLOOR * (1.0 + x.norm())
}

/// Runs the inner loop from the outer iterate until the merit decrease
/// target `θ‖F_{s_k}‖_* + ε_k` is met or a limit is hit.
pub(crate) fn run_inner(run: &mut Run<'_>, outer: &OuterContext<'_>) -> InnerOutcome {
    let cfg = run.cfg;
    let y_k = &outer.w.y;
    let target = cfg.theta * outer.merit + outer.eps;
    let grad_outer = lagrangian_gradient_norm(outer.jac, outer.r, y_k);
    let c_outer = outer.c.norm();

    let mut x = outer.w.x.clone();
    let mut r = outer.r.clone();
    let mut c = outer.c.clone();
    let mut jac = outer.jac.clone();
    let mut w = outer.w.clone();
    let mut lambda = LAMBDA_INIT.max(cfg.lambda_min);
    let mut gamma = outer.gamma;
    let mut delta = outer.delta;
    let mut delta_prev = outer.delta;
    let mut merit = outer.merit;

    let finish = |status, w: Iterate, r, c, jac, gamma, delta, lambda: f64, merit, iterations| {
        let rho = lambda * AugLsModel::new(&r, &c, &jac, delta, y_k).grad_phi.norm();
        InnerOutcome {
            status,
            w,
            r,
            c,
            jac,
            gamma,
            delta,
            rho,
            merit,
            iterations,
        }
    };

    for j in 0..cfg.inner_max_iters {
        let model = AugLsModel::new(&r, &c, &jac, delta, y_k);
        let g_norm = model.grad_phi.norm();
        let d = if g_norm > 0.0 {
            match solve_lm_step(&model.jac, &model.phi, lambda * g_norm) {
                Ok(d) => d,
                Err(_) => {
                    return finish(
                        InnerStatus::Failed,
                        w,
                        r,
                        c,
                        jac,
                        gamma,
                        delta,
                        lambda,
                        merit,
                        j,
                    )
                }
            }
        } else {
            DVector::zeros(x.len())
        };
        let d_norm = d.norm();

        let trial = match lm_ratio(run, &x, &d, &model, delta, y_k) {
            Ok(t) => t,
            Err(e) => {
                let status = match e {
                    EvalError::BudgetExhausted => InnerStatus::EvalBudget,
                    EvalError::NonFinite => InnerStatus::Failed,
                };
                return finish(status, w, r, c, jac, gamma, delta, lambda, merit, j);
            }
        };
        let accepted = trial.zeta >= cfg.p0;
        let lambda_next = update_lambda(
            lambda,
            trial.zeta,
            g_norm,
            cfg.p0,
            cfg.p1,
            cfg.p2,
            cfg.lambda_min,
        );

        let jc_c_norm = (jac.jc.transpose() * &c).norm();
        let gamma_next = update_gamma(
            gamma,
            d_norm,
            delta != delta_prev,
            jc_c_norm,
            cfg.p3,
            cfg.p4,
            outer.gamma,
        );

        let phi_sq = model.phi.norm_squared();
        let mut phi_sq_trial = phi_sq;
        if accepted {
            let (rt, ct) = trial.values.expect("accepted steps were evaluated");
            phi_sq_trial = stacked_residual(&rt, &ct, delta, y_k).norm_squared();
            x += &d;
            r = rt;
            c = ct;
        }
        let gamma_next = gamma_next.max(gamma_floor(&x)).min(outer.gamma);

        jac = match run.jacobians(&x, gamma_next, &r, &c) {
            Ok(jn) => jn,
            Err(e) => {
                let status = match e {
                    EvalError::BudgetExhausted => InnerStatus::EvalBudget,
                    EvalError::NonFinite => InnerStatus::Failed,
                };
                // The Jacobian at the new point is unavailable; report the
                // last consistent state.
                w.x = x.clone();
                w.z = r.clone();
                w.y = y_k - &c / delta;
                return finish(status, w, r, c, jac, gamma, delta, lambda, merit, j + 1);
            }
        };

        let delta_next = maybe_decrease_delta(
            delta, y_k, &r, &c, &jac, grad_outer, c_outer, cfg.theta, outer.eps,
        );

        run.inner_log.push(InnerStepLog {
            lambda,
            lambda_next,
            d_norm,
            gamma,
            delta,
            accepted,
            predicted: model.predicted_reduction(&d),
            phi_sq,
            phi_sq_trial,
        });

        delta_prev = delta;
        delta = delta_next;
        lambda = lambda_next;
        gamma = gamma_next;

        w = Iterate {
            x: x.clone(),
            z: r.clone(),
            y: y_k - &c / delta,
        };
        let (_, merit_now) = kkt_residual(&jac, &w, &r, &c);
        merit = merit_now;
        run.record(&jac, &w.y, &r, &c);

        if merit <= target {
            return finish(
                InnerStatus::Success,
                w,
                r,
                c,
                jac,
                gamma,
                delta,
                lambda,
                merit,
                j + 1,
            );
        }
        if !c.is_empty()
            && c.amax() > STALL_INFEASIBILITY
            && (jac.jc.transpose() * &c).norm() <= STALL_GRADIENT_TOL
        {
            return finish(
                InnerStatus::FeasibilityStall,
                w,
                r,
                c,
                jac,
                gamma,
                delta,
                lambda,
                merit,
                j + 1,
            );
        }
    }
    let iters = cfg.inner_max_iters;
    finish(
        InnerStatus::IterationLimit,
        w,
        r,
        c,
        jac,
        gamma,
        delta,
        lambda,
        merit,
        iters,
    )
}
