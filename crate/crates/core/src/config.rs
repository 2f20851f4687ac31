use crate::error::{Error, Result};
use crate::hessian::HessianMode;
use crate::smoothing::DirectionMode;

/// Parameters of the outer and inner iterations. Defaults follow the
/// published experimental setup.
#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub delta0: f64,
    pub rho0: f64,
    pub eps0: f64,
    pub gamma0: f64,
    pub theta: f64,
    pub p0: f64,
    pub p1: f64,
    pub p2: f64,
    pub p3: f64,
    pub p4: f64,
    pub lambda_min: f64,
    /// Outer iteration limit.
    pub max_iters: usize,
    /// Inner iteration limit per call.
    pub inner_max_iters: usize,
    /// Tolerance of the scaled KKT stopping test.
    pub kkt_tol: f64,
    /// Combined `r`/`c` evaluation budget; `None` means `500·(n+1)`.
    pub max_fevals: Option<u64>,
    pub jacobian: DirectionMode,
    pub hessian: HessianMode,
    pub seed: u64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            delta0: 1.0,
            rho0: 0.0,
            eps0: 1e3,
            gamma0: 1.0,
            theta: 0.99,
            p0: 0.001,
            p1: 0.25,
            p2: 0.75,
            p3: 1e-10,
            p4: 1e12,
            lambda_min: 1e-8,
            max_iters: 150,
            inner_max_iters: 50,
            kkt_tol: 1e-5,
            max_fevals: None,
            jacobian: DirectionMode::Coordinate,
            hessian: HessianMode::Sr1,
            seed: 0,
        }
    }
}

impl SolverConfig {
    pub fn budget_for(&self, n: usize) -> u64 {
        self.max_fevals.unwrap_or(500 * (n as u64 + 1))
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidConfig(msg.to_string()));
        // The published default p2 = 0.75 is below 1, so only the ordering
        // the LM update actually relies on is enforced.
        if !(0.0 < self.p0 && self.p0 < self.p1 && self.p1 < 1.0 && self.p1 < self.p2) {
            return bad("require 0 < p0 < p1 < 1 and p1 < p2");
        }
        if !(0.0 < self.p3 && self.p3 < 1.0 && 1.0 < self.p4) {
            return bad("require 0 < p3 < 1 < p4");
        }
        if !(0.0 < self.theta && self.theta < 1.0) {
            return bad("require 0 < theta < 1");
        }
        if !(self.delta0 > 0.0 && self.rho0 >= 0.0 && self.eps0 > 0.0 && self.gamma0 > 0.0) {
            return bad("require delta0 > 0, rho0 >= 0, eps0 > 0, gamma0 > 0");
        }
        if !(self.lambda_min > 0.0 && self.lambda_min < 1.0) {
            return bad("require 0 < lambda_min < 1");
        }
        if self.kkt_tol.is_nan() || self.kkt_tol <= 0.0 {
            return bad("require kkt_tol > 0");
        }
        Ok(())
    }
}
