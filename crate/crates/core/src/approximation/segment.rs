//! 1D nodal (Lagrange) bases on the unit segment, used for face traces and
//! for edge restrictions of element geometry maps.

use nalgebra::DMatrix;

use super::modal::legendre01_eval;
use super::nodes::{equispaced01, gauss_lobatto01};
use crate::error::{Error, Result};

/// Lagrange basis of degree k at a given node set on [0, 1].
#[derive(Debug, Clone)]
pub struct SegmentBasis {
    pub degree: usize,
    pub nodes: Vec<f64>,
    /// modal-to-nodal coefficients, column i holds the modal expansion of N_i
    coeff: DMatrix<f64>,
}

impl SegmentBasis {
    pub fn new(nodes: Vec<f64>) -> Result<Self> {
        let np = nodes.len();
        if np < 2 {
            return Err(Error::Basis("segment basis needs at least 2 nodes".into()));
        }
        let degree = np - 1;
        let mut v = DMatrix::<f64>::zeros(np, np);
        for (row, &s) in nodes.iter().enumerate() {
            let (vals, _) = legendre01_eval(degree, s);
            for (col, value) in vals.iter().enumerate() {
                v[(row, col)] = *value;
            }
        }
        let coeff = v.try_inverse().ok_or_else(|| {
            Error::Basis("segment Vandermonde singular (clustered nodes?)".into())
        })?;
        Ok(Self {
            degree,
            nodes,
            coeff,
        })
    }

    /// Basis at Gauss-Lobatto nodes.
    pub fn lobatto(degree: usize) -> Result<Self> {
        Self::new(gauss_lobatto01(degree + 1))
    }

    /// Basis at equispaced nodes.
    pub fn equispaced(degree: usize) -> Result<Self> {
        Self::new(equispaced01(degree + 1))
    }

    pub fn len(&self) -> usize {
        self.degree + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Values at points of [0, 1]; rows = points, columns = basis functions.
    pub fn eval(&self, pts: &[f64]) -> DMatrix<f64> {
        let np = self.len();
        let mut out = DMatrix::<f64>::zeros(pts.len(), np);
        for (row, &s) in pts.iter().enumerate() {
            let (vals, _) = legendre01_eval(self.degree, s);
            for i in 0..np {
                let mut acc = 0.0;
                for m in 0..np {
                    acc += self.coeff[(m, i)] * vals[m];
                }
                out[(row, i)] = acc;
            }
        }
        out
    }

    /// Values and first derivatives (d/ds) at points of [0, 1].
    pub fn eval_with_deriv(&self, pts: &[f64]) -> (DMatrix<f64>, DMatrix<f64>) {
        let np = self.len();
        let mut val = DMatrix::<f64>::zeros(pts.len(), np);
        let mut der = DMatrix::<f64>::zeros(pts.len(), np);
        for (row, &s) in pts.iter().enumerate() {
            let (vals, ders) = legendre01_eval(self.degree, s);
            for i in 0..np {
                let mut a = 0.0;
                let mut d = 0.0;
                for m in 0..np {
                    a += self.coeff[(m, i)] * vals[m];
                    d += self.coeff[(m, i)] * ders[m];
                }
                val[(row, i)] = a;
                der[(row, i)] = d;
            }
        }
        (val, der)
    }
}
