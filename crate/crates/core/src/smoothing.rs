//! Jacobian estimates by orthogonal spherical smoothing.
//!
//! For an orthonormal basis `u₁…uₙ` and smoothing parameter `γ` the
//! gradient of a scalar component `rᵢ` is approximated by
//!
//! ```text
//! ∇r_{s,i}(x) = Σⱼ (rᵢ(x + γuⱼ) − rᵢ(x)) / γ · uⱼ
//! ```
//!
//! which is exact for affine maps and reduces to forward differences when
//! the basis is the identity.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, EvalError};
use crate::par::{self, Execution};
use crate::problems::{evaluate_c, evaluate_r, EvalCounter, Problem};

/// Number of bases kept by [`DirectionMode::OssPool`].
pub const POOL_SIZE: usize = 10;

/// An `n×n` orthonormal matrix whose columns are the sampling directions.
#[derive(Debug, Clone, PartialEq)]
pub struct DirectionSet(DMatrix<f64>);

impl DirectionSet {
    pub fn identity(n: usize) -> Self {
        DirectionSet(DMatrix::identity(n, n))
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.ncols()
    }

    /// `‖UᵀU − I‖_max`.
    pub fn orthonormality_defect(&self) -> f64 {
        let n = self.dim();
        (self.0.transpose() * &self.0 - DMatrix::<f64>::identity(n, n)).amax()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DirectionMode {
    /// Fresh random basis for every estimate.
    OssFresh,
    /// Uniform pick from a per-run pool of [`POOL_SIZE`] bases.
    OssPool,
    /// Identity basis: forward differences.
    Coordinate,
}

impl DirectionMode {
    pub const ALL: [DirectionMode; 3] = [
        DirectionMode::OssFresh,
        DirectionMode::OssPool,
        DirectionMode::Coordinate,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            DirectionMode::OssFresh => "oss-v1",
            DirectionMode::OssPool => "oss-v2",
            DirectionMode::Coordinate => "fd",
        }
    }
}

impl fmt::Display for DirectionMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for DirectionMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "oss-v1" => Ok(DirectionMode::OssFresh),
            "oss-v2" => Ok(DirectionMode::OssPool),
            "fd" => Ok(DirectionMode::Coordinate),
            _ => Err(Error::UnknownMode {
                kind: "jacobian mode",
                value: s.to_string(),
            }),
        }
    }
}

/// Draws a Haar-distributed orthonormal basis of `R^n`.
///
/// Orthogonalizes `n` independent standard-normal vectors with a QR
/// factorization and flips column signs so that `diag(R) ≥ 0`; without the
/// sign fix the Householder QR output is not uniform on the orthogonal group.
pub fn sample_orthonormal<R: Rng + ?Sized>(n: usize, rng: &mut R) -> DirectionSet {
    assert!(n >= 1, "dimension must be positive");
    loop {
        let g = DMatrix::<f64>::from_fn(n, n, |_, _| rng.sample(StandardNormal));
        let scale = g.amax().max(f64::MIN_POSITIVE);
        let qr = g.qr();
        let r = qr.r();
        if (0..n).any(|i| r[(i, i)].abs() <= 1e-10 * scale) {
            continue;
        }
        let mut q = qr.q();
        for j in 0..n {
            if r[(j, j)] < 0.0 {
                q.column_mut(j).neg_mut();
            }
        }
        return DirectionSet(q);
    }
}

/// Supplies direction sets according to a [`DirectionMode`], owning the
/// run's random stream.
#[derive(Debug, Clone)]
pub struct DirectionSource {
    mode: DirectionMode,
    rng: ChaCha8Rng,
    pool: Vec<DirectionSet>,
}

impl DirectionSource {
    pub fn new(mode: DirectionMode, seed: u64) -> Self {
        DirectionSource {
            mode,
            rng: ChaCha8Rng::seed_from_u64(seed),
            pool: Vec::new(),
        }
    }

    pub fn mode(&self) -> DirectionMode {
        self.mode
    }

    /// Bases in the pool (empty until the first pooled draw).
    pub fn pool(&self) -> &[DirectionSet] {
        &self.pool
    }

    pub fn next(&mut self, n: usize) -> DirectionSet {
        match self.mode {
            DirectionMode::Coordinate => DirectionSet::identity(n),
            DirectionMode::OssFresh => sample_orthonormal(n, &mut self.rng),
            DirectionMode::OssPool => {
                if self.pool.first().map(|d| d.dim()) != Some(n) {
                    self.pool = (0..POOL_SIZE)
                        .map(|_| sample_orthonormal(n, &mut self.rng))
                        .collect();
                }
                let k = self.rng.random_range(0..POOL_SIZE);
                self.pool[k].clone()
            }
        }
    }
}

/// Approximate Jacobians of `r` and `c` at a common point.
#[derive(Debug, Clone, PartialEq)]
pub struct JacobianPair {
    pub jr: DMatrix<f64>,
    pub jc: DMatrix<f64>,
    pub gamma: f64,
    pub x_at: DVector<f64>,
}

/// Differences along the columns of `dirs`, folded back into a Jacobian.
fn assemble(diffs: DMatrix<f64>, dirs: &DirectionSet, coordinate: bool) -> DMatrix<f64> {
    if coordinate {
        diffs
    } else {
        diffs * dirs.matrix().transpose()
    }
}

/// Estimates `J^r` and `J^c` at `x` from one direction set.
///
/// `base` carries `(r(x), c(x))` when the caller already has them; the
/// estimate then costs `n` evaluations of each map instead of `n + 1`. For
/// problems without constraints `c` is never evaluated.
pub fn estimate_jacobians(
    prob: &Problem,
    x: &DVector<f64>,
    gamma: f64,
    source: &mut DirectionSource,
    base: Option<(&DVector<f64>, &DVector<f64>)>,
    ctr: &mut EvalCounter,
) -> Result<JacobianPair, EvalError> {
    assert!(gamma > 0.0, "smoothing parameter must be positive");
    let dirs = source.next(prob.n);
    let coordinate = source.mode() == DirectionMode::Coordinate;
    estimate_with_directions(prob, x, gamma, &dirs, coordinate, base, ctr)
}

pub(crate) fn estimate_with_directions(
    prob: &Problem,
    x: &DVector<f64>,
    gamma: f64,
    dirs: &DirectionSet,
    coordinate: bool,
    base: Option<(&DVector<f64>, &DVector<f64>)>,
    ctr: &mut EvalCounter,
) -> Result<JacobianPair, EvalError> {
    let n = prob.n;
    let constrained = prob.m > 0;
    let (r0, c0) = match base {
        Some((r, c)) => (r.clone(), c.clone()),
        None => {
            let r = evaluate_r(prob, x, ctr)?;
            let c = if constrained {
                evaluate_c(prob, x, ctr)?
            } else {
                DVector::zeros(0)
            };
            (r, c)
        }
    };

    let mut dr = DMatrix::zeros(prob.p, n);
    let mut dc = DMatrix::zeros(prob.m, n);
    for j in 0..n {
        let probe = if coordinate {
            let mut p = x.clone();
            p[j] += gamma;
            p
        } else {
            x + dirs.matrix().column(j) * gamma
        };
        let rp = evaluate_r(prob, &probe, ctr)?;
        dr.set_column(j, &((rp - &r0) / gamma));
        if constrained {
            let cp = evaluate_c(prob, &probe, ctr)?;
            dc.set_column(j, &((cp - &c0) / gamma));
        }
    }

    Ok(JacobianPair {
        jr: assemble(dr, dirs, coordinate),
        jc: assemble(dc, dirs, coordinate),
        gamma,
        x_at: x.clone(),
    })
}

/// Draws `count` independent smoothed-gradient estimates of a scalar map at
/// `x`, each from a fresh Haar basis.
///
/// Sample `i` uses ChaCha stream `i` under `seed`, so the output does not
/// depend on the execution policy.
pub fn sample_gradient_estimates<F>(
    f: F,
    x: &DVector<f64>,
    gamma: f64,
    count: usize,
    seed: u64,
    exec: Execution,
) -> Vec<DVector<f64>>
where
    F: Fn(&DVector<f64>) -> f64 + Sync + Send,
{
    let n = x.len();
    let fx = f(x);
    par::map_range(exec, count, |i| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(i as u64);
        let dirs = sample_orthonormal(n, &mut rng);
        let u = dirs.matrix();
        let mut g = DVector::zeros(n);
        for j in 0..n {
            let col = u.column(j);
            let fj = f(&(x + col * gamma));
            g += col * ((fj - fx) / gamma);
        }
        g
    })
}
