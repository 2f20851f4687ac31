//! Quasi-Newton models of the constraint Hessians `∇²cᵢ`.
//!
//! Residual Hessians are approximated by zero, so the curvature block of
//! the saddle system is `−Σ yᵢ Hᶜⁱ`.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// SR1 skips when `|(y − Ht)ᵀt|` falls below this.
pub const SR1_SKIP_TOL: f64 = 1e-7;
/// BFGS skips when `|tᵀy|` falls below this.
pub const BFGS_CURVATURE_TOL: f64 = 1e-7;
/// BFGS also skips when `|tᵀHt|` falls below this (avoids 0/0 from `H = 0`).
pub const BFGS_MODEL_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum HessianMode {
    Sr1,
    Bfgs,
    Zero,
}

impl HessianMode {
    pub fn as_str(self) -> &'static str {
        match self {
            HessianMode::Sr1 => "sr1",
            HessianMode::Bfgs => "bfgs",
            HessianMode::Zero => "zero",
        }
    }
}

impl fmt::Display for HessianMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for HessianMode {
    type Err = Error;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "sr1" => Ok(HessianMode::Sr1),
            "bfgs" => Ok(HessianMode::Bfgs),
            "zero" => Ok(HessianMode::Zero),
            _ => Err(Error::UnknownMode {
                kind: "hessian mode",
                value: s.to_string(),
            }),
        }
    }
}

#[derive(Debug, Clone)]
pub struct HessianModel {
    mode: HessianMode,
    n: usize,
    hc: Vec<DMatrix<f64>>,
    last: Option<(DVector<f64>, DMatrix<f64>)>,
}

impl HessianModel {
    /// All `m` models start at zero.
    pub fn new(mode: HessianMode, n: usize, m: usize) -> Self {
        HessianModel {
            mode,
            n,
            hc: vec![DMatrix::zeros(n, n); m],
            last: None,
        }
    }

    pub fn mode(&self) -> HessianMode {
        self.mode
    }

    pub fn matrices(&self) -> &[DMatrix<f64>] {
        &self.hc
    }

    /// Feeds the secant pair `(x_new − last_x, rows of Jc_new − last_Jc)`.
    /// The first call only records the point.
    pub fn update(&mut self, x_new: &DVector<f64>, jc_new: &DMatrix<f64>) -> Result<()> {
        if x_new.len() != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                got: x_new.len(),
            });
        }
        if jc_new.shape() != (self.hc.len(), self.n) {
            return Err(Error::DimensionMismatch {
                expected: self.hc.len() * self.n,
                got: jc_new.nrows() * jc_new.ncols(),
            });
        }
        if let Some((last_x, last_jc)) = &self.last {
            let t = x_new - last_x;
            for (i, h) in self.hc.iter_mut().enumerate() {
                let y = (jc_new.row(i) - last_jc.row(i)).transpose();
                match self.mode {
                    HessianMode::Sr1 => sr1(h, &t, &y),
                    HessianMode::Bfgs => bfgs(h, &t, &y),
                    HessianMode::Zero => {}
                }
            }
        }
        self.last = Some((x_new.clone(), jc_new.clone()));
        Ok(())
    }

    /// `−Σ yᵢ Hᶜⁱ`. The `z` argument is accepted for symmetry with the
    /// Lagrangian Hessian; residual curvature is modelled as zero.
    pub fn assemble(&self, _z: &DVector<f64>, y: &DVector<f64>) -> DMatrix<f64> {
        assert_eq!(y.len(), self.hc.len());
        let mut out = DMatrix::zeros(self.n, self.n);
        for (h, &yi) in self.hc.iter().zip(y.iter()) {
            out -= h * yi;
        }
        out
    }
}

fn sr1(h: &mut DMatrix<f64>, t: &DVector<f64>, y: &DVector<f64>) {
    let v = y - &*h * t;
    let denom = v.dot(t);
    if denom.abs() >= SR1_SKIP_TOL {
        *h += &v * v.transpose() / denom;
        symmetrize(h);
    }
}

fn bfgs(h: &mut DMatrix<f64>, t: &DVector<f64>, y: &DVector<f64>) {
    let ty = t.dot(y);
    let ht = &*h * t;
    let tht = t.dot(&ht);
    if ty.abs() >= BFGS_CURVATURE_TOL && tht.abs() >= BFGS_MODEL_TOL {
        *h += y * y.transpose() / ty - &ht * ht.transpose() / tht;
        symmetrize(h);
    }
}

fn symmetrize(h: &mut DMatrix<f64>) {
    let s = (&*h + h.transpose()) * 0.5;
    *h = s;
}
