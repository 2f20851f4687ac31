//! Black-box problem definitions, evaluation accounting and the test corpus.

mod corpus;

use std::fmt;
use std::sync::Arc;

use nalgebra::DVector;

use crate::error::{Error, EvalError, Result};

pub use corpus::{corpus, lookup, problem_names, CorpusEntry, Family};

/// Vector-valued black-box map `R^n -> R^k`.
pub type VectorFn = Arc<dyn Fn(&DVector<f64>) -> DVector<f64> + Send + Sync>;

/// An equality-constrained nonlinear least-squares problem
/// `min ½‖r(x)‖²  s.t.  c(x) = 0`.
#[derive(Clone)]
pub struct Problem {
    pub name: String,
    pub n: usize,
    pub p: usize,
    pub m: usize,
    pub x0: DVector<f64>,
    pub f_opt: Option<f64>,
    pub x_opt: Option<DVector<f64>>,
    r_eval: VectorFn,
    c_eval: VectorFn,
}

impl fmt::Debug for Problem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Problem")
            .field("name", &self.name)
            .field("n", &self.n)
            .field("p", &self.p)
            .field("m", &self.m)
            .field("x0", &self.x0.as_slice())
            .field("f_opt", &self.f_opt)
            .finish_non_exhaustive()
    }
}

impl Problem {
    pub fn new(
        name: impl Into<String>,
        x0: Vec<f64>,
        p: usize,
        m: usize,
        r_eval: impl Fn(&DVector<f64>) -> DVector<f64> + Send + Sync + 'static,
        c_eval: impl Fn(&DVector<f64>) -> DVector<f64> + Send + Sync + 'static,
    ) -> Self {
        let x0 = DVector::from_vec(x0);
        Problem {
            name: name.into(),
            n: x0.len(),
            p,
            m,
            x0,
            f_opt: None,
            x_opt: None,
            r_eval: Arc::new(r_eval),
            c_eval: Arc::new(c_eval),
        }
    }

    /// Unconstrained problem (`m = 0`).
    pub fn unconstrained(
        name: impl Into<String>,
        x0: Vec<f64>,
        p: usize,
        r_eval: impl Fn(&DVector<f64>) -> DVector<f64> + Send + Sync + 'static,
    ) -> Self {
        Self::new(name, x0, p, 0, r_eval, |_| DVector::zeros(0))
    }

    pub fn with_optimum(mut self, f_opt: f64, x_opt: Option<Vec<f64>>) -> Self {
        self.f_opt = Some(f_opt);
        self.x_opt = x_opt.map(DVector::from_vec);
        self
    }

    /// Evaluates `r` without touching any counter. Intended for reporting
    /// and self-checks, never for solver iterations.
    pub fn residual_uncounted(&self, x: &DVector<f64>) -> DVector<f64> {
        (self.r_eval)(x)
    }

    /// Evaluates `c` without touching any counter.
    pub fn constraints_uncounted(&self, x: &DVector<f64>) -> DVector<f64> {
        (self.c_eval)(x)
    }

    /// `½‖r(x)‖²` without counting.
    pub fn objective_uncounted(&self, x: &DVector<f64>) -> f64 {
        objective(&(self.r_eval)(x))
    }
}

/// `½‖r‖²`.
pub fn objective(r: &DVector<f64>) -> f64 {
    0.5 * r.norm_squared()
}

/// Counts vector evaluations of `r` and `c`, optionally enforcing a
/// combined budget. A call that would push the total past the limit is
/// refused before the black box is touched.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct EvalCounter {
    pub r_calls: u64,
    pub c_calls: u64,
    limit: Option<u64>,
}

impl EvalCounter {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_limit(limit: u64) -> Self {
        EvalCounter {
            limit: Some(limit),
            ..Self::default()
        }
    }

    pub fn total(&self) -> u64 {
        self.r_calls + self.c_calls
    }

    pub fn limit(&self) -> Option<u64> {
        self.limit
    }

    pub fn remaining(&self) -> Option<u64> {
        self.limit.map(|l| l.saturating_sub(self.total()))
    }

    fn admit(&self) -> std::result::Result<(), EvalError> {
        match self.limit {
            Some(l) if self.total() >= l => Err(EvalError::BudgetExhausted),
            _ => Ok(()),
        }
    }
}

fn check_finite(v: DVector<f64>) -> std::result::Result<DVector<f64>, EvalError> {
    if v.iter().all(|x| x.is_finite()) {
        Ok(v)
    } else {
        Err(EvalError::NonFinite)
    }
}

/// Evaluates `r(x)` and charges one call to `ctr`.
pub fn evaluate_r(
    prob: &Problem,
    x: &DVector<f64>,
    ctr: &mut EvalCounter,
) -> std::result::Result<DVector<f64>, EvalError> {
    debug_assert_eq!(x.len(), prob.n);
    ctr.admit()?;
    ctr.r_calls += 1;
    check_finite((prob.r_eval)(x))
}

/// Evaluates `c(x)` and charges one call to `ctr`.
pub fn evaluate_c(
    prob: &Problem,
    x: &DVector<f64>,
    ctr: &mut EvalCounter,
) -> std::result::Result<DVector<f64>, EvalError> {
    debug_assert_eq!(x.len(), prob.n);
    ctr.admit()?;
    ctr.c_calls += 1;
    if prob.m == 0 {
        return Ok(DVector::zeros(0));
    }
    check_finite((prob.c_eval)(x))
}

/// Evaluates the pair `(r(x), c(x))`. For `m = 0` the constraint map is not
/// called and nothing is charged for it.
pub(crate) fn evaluate_pair(
    prob: &Problem,
    x: &DVector<f64>,
    ctr: &mut EvalCounter,
) -> std::result::Result<(DVector<f64>, DVector<f64>), EvalError> {
    let r = evaluate_r(prob, x, ctr)?;
    let c = if prob.m == 0 {
        DVector::zeros(0)
    } else {
        evaluate_c(prob, x, ctr)?
    };
    Ok((r, c))
}

/// Appends the componentwise squares of the constraints:
/// `ĉ(x) = (c(x), c(x)²)`. Destroys full rank of the constraint Jacobian at
/// feasible points while leaving the feasible set unchanged.
pub fn make_degenerate(prob: &Problem) -> Result<Problem> {
    if prob.m == 0 {
        return Err(Error::NothingToDegenerate);
    }
    let inner = prob.c_eval.clone();
    let m = prob.m;
    let c_hat = move |x: &DVector<f64>| {
        let c = inner(x);
        DVector::from_iterator(2 * m, c.iter().copied().chain(c.iter().map(|v| v * v)))
    };
    Ok(Problem {
        name: format!("{}-degenerate", prob.name),
        n: prob.n,
        p: prob.p,
        m: 2 * m,
        x0: prob.x0.clone(),
        f_opt: prob.f_opt,
        x_opt: prob.x_opt.clone(),
        r_eval: prob.r_eval.clone(),
        c_eval: Arc::new(c_hat),
    })
}
