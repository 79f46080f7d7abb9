//! Nodal basis on the reference triangle: orthonormal modal family times the
//! inverted generalized Vandermonde at a warp&blend node set.

use nalgebra::{DMatrix, Point2};

use super::modal::{koornwinder_eval, mode_count};
use super::nodes::TriangleNodes;
use crate::error::{Error, Result};

/// Tabulated basis evaluation; rows = evaluation points, cols = functions.
#[derive(Debug, Clone)]
pub struct BasisEval {
    pub val: DMatrix<f64>,
    pub gx: DMatrix<f64>,
    pub gy: DMatrix<f64>,
}

/// Lagrange basis of total degree k on the reference triangle.
#[derive(Debug, Clone)]
pub struct TriangleBasis {
    pub degree: usize,
    pub nodes: TriangleNodes,
    coeff: DMatrix<f64>,
    pub cond_estimate: f64,
}

pub const COND_LIMIT: f64 = 1e12;

impl TriangleBasis {
    pub fn new(nodes: TriangleNodes) -> Result<Self> {
        let k = nodes.degree;
        let n = mode_count(k);
        if nodes.len() != n {
            return Err(Error::Basis(format!(
                "node count {} does not match degree {k}",
                nodes.len()
            )));
        }
        let mut v = DMatrix::<f64>::zeros(n, n);
        for (row, p) in nodes.points.iter().enumerate() {
            let (vals, _, _) = koornwinder_eval(k, *p);
            for (col, value) in vals.iter().enumerate() {
                v[(row, col)] = *value;
            }
        }
        let svd = v.clone().svd(false, false);
        let smax = svd.singular_values.max();
        let smin = svd.singular_values.min();
        let cond = if smin > 0.0 { smax / smin } else { f64::INFINITY };
        if !cond.is_finite() || cond > COND_LIMIT {
            return Err(Error::Basis(format!(
                "triangle Vandermonde condition {cond:.3e} exceeds limit"
            )));
        }
        let coeff = v
            .try_inverse()
            .ok_or_else(|| Error::Basis("triangle Vandermonde singular".into()))?;
        Ok(Self {
            degree: k,
            nodes,
            coeff,
            cond_estimate: cond,
        })
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Values and reference-coordinate gradients at arbitrary points.
    pub fn eval(&self, pts: &[Point2<f64>]) -> BasisEval {
        let n = self.len();
        let nm = mode_count(self.degree);
        let npts = pts.len();
        let mut val = DMatrix::<f64>::zeros(npts, n);
        let mut gx = DMatrix::<f64>::zeros(npts, n);
        let mut gy = DMatrix::<f64>::zeros(npts, n);
        for (row, p) in pts.iter().enumerate() {
            let (mv, mx, my) = koornwinder_eval(self.degree, *p);
            for i in 0..n {
                let (mut a, mut b, mut c) = (0.0, 0.0, 0.0);
                for m in 0..nm {
                    let cmi = self.coeff[(m, i)];
                    a += cmi * mv[m];
                    b += cmi * mx[m];
                    c += cmi * my[m];
                }
                val[(row, i)] = a;
                gx[(row, i)] = b;
                gy[(row, i)] = c;
            }
        }
        BasisEval { val, gx, gy }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::approximation::nodes::warp_blend_nodes;

    #[test]
    fn kronecker_delta_at_own_nodes() {
        for k in [1usize, 3, 5] {
            let basis = TriangleBasis::new(warp_blend_nodes(k)).unwrap();
            let ev = basis.eval(&basis.nodes.points.clone());
            for i in 0..basis.len() {
                for j in 0..basis.len() {
                    let expect = if i == j { 1.0 } else { 0.0 };
                    assert!(
                        (ev.val[(i, j)] - expect).abs() < 1e-10,
                        "k={k} N_{j}(x_{i}) = {}",
                        ev.val[(i, j)]
                    );
                }
            }
        }
    }

    #[test]
    fn linear_basis_at_vertex_is_indicator() {
        let basis = TriangleBasis::new(warp_blend_nodes(1)).unwrap();
        let ev = basis.eval(&[Point2::new(0.0, 0.0)]);
        let vals: Vec<f64> = (0..3).map(|j| ev.val[(0, j)]).collect();
        // node 0 of the lattice is the vertex (0,0)
        assert!((vals[0] - 1.0).abs() < 1e-13);
        assert!(vals[1].abs() < 1e-13 && vals[2].abs() < 1e-13);
    }

    #[test]
    fn partition_of_unity_at_centroid() {
        for k in 1..=8 {
            let basis = TriangleBasis::new(warp_blend_nodes(k)).unwrap();
            let ev = basis.eval(&[Point2::new(1.0 / 3.0, 1.0 / 3.0)]);
            let s: f64 = (0..basis.len()).map(|j| ev.val[(0, j)]).sum();
            assert!((s - 1.0).abs() < 1e-10, "k={k}: sum {s}");
            let sx: f64 = (0..basis.len()).map(|j| ev.gx[(0, j)]).sum();
            assert!(sx.abs() < 1e-9);
        }
    }

    #[test]
    fn gradients_match_finite_differences() {
        let basis = TriangleBasis::new(warp_blend_nodes(4)).unwrap();
        let h = 1e-6;
        let p = Point2::new(0.31, 0.24);
        let ev = basis.eval(&[p]);
        let xp = basis.eval(&[Point2::new(p.x + h, p.y)]);
        let xm = basis.eval(&[Point2::new(p.x - h, p.y)]);
        let yp = basis.eval(&[Point2::new(p.x, p.y + h)]);
        let ym = basis.eval(&[Point2::new(p.x, p.y - h)]);
        for j in 0..basis.len() {
            let fdx = (xp.val[(0, j)] - xm.val[(0, j)]) / (2.0 * h);
            let fdy = (yp.val[(0, j)] - ym.val[(0, j)]) / (2.0 * h);
            assert!((ev.gx[(0, j)] - fdx).abs() < 1e-5 * (1.0 + fdx.abs()));
            assert!((ev.gy[(0, j)] - fdy).abs() < 1e-5 * (1.0 + fdy.abs()));
        }
    }
}
