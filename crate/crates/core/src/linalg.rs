//! Small dense kernels: minimum-norm least squares, the damped LM solve and
//! the symmetric saddle-point solve.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Pivots of the equilibrated saddle matrix below this mark it as
/// numerically singular.
pub const SINGULAR_PIVOT_TOL: f64 = 1e-12;

/// Minimizer of `‖Ay − b‖`; the minimum-norm one when `A` is rank deficient.
pub fn solve_least_squares(a: &DMatrix<f64>, b: &DVector<f64>) -> DVector<f64> {
    let (k, l) = a.shape();
    if l == 0 {
        return DVector::zeros(0);
    }
    if k == 0 {
        return DVector::zeros(l);
    }
    let svd = a.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let eps = f64::EPSILON * k.max(l) as f64 * smax;
    svd.solve(b, eps)
        .expect("both factors were requested from the decomposition")
}

/// Solves `(JᵀJ + μI) d = −JᵀΦ` through a QR factorization of the stacked
/// matrix `[J; √μ I]`, never forming `JᵀJ`.
pub fn solve_lm_step(j: &DMatrix<f64>, phi: &DVector<f64>, mu: f64) -> Result<DVector<f64>> {
    assert!(mu >= 0.0, "damping must be nonnegative");
    let (q, n) = j.shape();
    assert_eq!(phi.len(), q);
    if n == 0 {
        return Ok(DVector::zeros(0));
    }
    if j.iter().chain(phi.iter()).any(|v| !v.is_finite()) || !mu.is_finite() {
        return Err(Error::NonFiniteInput);
    }

    let sq = mu.sqrt();
    let mut stacked = DMatrix::zeros(q + n, n);
    stacked.rows_mut(0, q).copy_from(j);
    for i in 0..n {
        stacked[(q + i, i)] = sq;
    }
    let mut rhs = DVector::zeros(q + n);
    rhs.rows_mut(0, q).copy_from(&(-phi));

    // Rows ≥ columns always holds for the stacked system.
    let qr = stacked.qr();
    let r = qr.r();
    let scale = r.amax();
    if scale == 0.0 {
        return if phi.iter().all(|&v| v == 0.0) || q == 0 {
            Ok(DVector::zeros(n))
        } else {
            Err(Error::SingularLmSystem)
        };
    }
    if (0..n).any(|i| r[(i, i)].abs() <= f64::EPSILON * scale * (q + n) as f64) {
        return Err(Error::SingularLmSystem);
    }
    let qtb = qr.q().transpose() * rhs;
    r.solve_upper_triangular(&qtb)
        .ok_or(Error::SingularLmSystem)
}

/// The symmetric system
///
/// ```text
/// [ H+ρI  Jrᵀ   Jcᵀ ] [ dx ]
/// [ Jr    −I    0   ] [ dz ] = rhs
/// [ Jc    0    −δI  ] [−dy ]
/// ```
#[derive(Debug, Clone)]
pub struct SaddleSystem {
    pub h_rho: DMatrix<f64>,
    pub jr: DMatrix<f64>,
    pub jc: DMatrix<f64>,
    pub delta: f64,
    pub rhs: DVector<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SaddleStep {
    pub dx: DVector<f64>,
    pub dz: DVector<f64>,
    pub dy: DVector<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum SaddleOutcome {
    Solved(SaddleStep),
    Singular,
}

impl SaddleSystem {
    pub fn dims(&self) -> (usize, usize, usize) {
        (self.h_rho.nrows(), self.jr.nrows(), self.jc.nrows())
    }

    /// The full `(n+p+m)²` coefficient matrix.
    pub fn assemble(&self) -> DMatrix<f64> {
        let (n, p, m) = self.dims();
        let mut k = DMatrix::zeros(n + p + m, n + p + m);
        k.view_mut((0, 0), (n, n)).copy_from(&self.h_rho);
        k.view_mut((0, n), (n, p)).copy_from(&self.jr.transpose());
        k.view_mut((0, n + p), (n, m))
            .copy_from(&self.jc.transpose());
        k.view_mut((n, 0), (p, n)).copy_from(&self.jr);
        k.view_mut((n + p, 0), (m, n)).copy_from(&self.jc);
        for i in 0..p {
            k[(n + i, n + i)] = -1.0;
        }
        for i in 0..m {
            k[(n + p + i, n + p + i)] = -self.delta;
        }
        k
    }
}

/// Solves a [`SaddleSystem`] by fully pivoted LU on the symmetrically
/// equilibrated matrix `DKD`, `Dᵢ = 1/√maxⱼ|Kᵢⱼ|`. Returns `dy` with the
/// sign restored, or [`SaddleOutcome::Singular`] when a scaled pivot falls
/// below [`SINGULAR_PIVOT_TOL`].
pub fn solve_saddle(sys: &SaddleSystem) -> Result<SaddleOutcome> {
    assert!(
        sys.delta > 0.0 || sys.jc.nrows() == 0,
        "delta must be positive"
    );
    let (n, p, m) = sys.dims();
    let finite = sys
        .h_rho
        .iter()
        .chain(sys.jr.iter())
        .chain(sys.jc.iter())
        .chain(sys.rhs.iter())
        .all(|v| v.is_finite())
        && sys.delta.is_finite();
    if !finite {
        return Err(Error::NonFiniteInput);
    }
    let dim = n + p + m;
    if sys.rhs.len() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            got: sys.rhs.len(),
        });
    }

    let mut k = sys.assemble();
    let mut scale = DVector::zeros(dim);
    for i in 0..dim {
        let row_max = k.row(i).amax();
        if row_max == 0.0 {
            return Ok(SaddleOutcome::Singular);
        }
        scale[i] = row_max.sqrt().recip();
    }
    for i in 0..dim {
        for j in 0..dim {
            k[(i, j)] *= scale[i] * scale[j];
        }
    }
    let lu = k.full_piv_lu();
    let u = lu.u();
    if (0..dim).any(|i| u[(i, i)].abs() < SINGULAR_PIVOT_TOL) {
        return Ok(SaddleOutcome::Singular);
    }
    let Some(scaled) = lu.solve(&sys.rhs.component_mul(&scale)) else {
        return Ok(SaddleOutcome::Singular);
    };
    let sol = scaled.component_mul(&scale);
    Ok(SaddleOutcome::Solved(SaddleStep {
        dx: sol.rows(0, n).into_owned(),
        dz: sol.rows(n, p).into_owned(),
        dy: -sol.rows(n + p, m).into_owned(),
    }))
}
