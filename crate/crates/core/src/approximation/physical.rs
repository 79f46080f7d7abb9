//! Cartesian polynomial bases attached directly to a physical element, the
//! functional side of NEFEM: geometry and approximation stay decoupled.

use nalgebra::{DMatrix, Point2};

use super::modal::{legendre01_eval, mode_count};
use super::triangle::{BasisEval, COND_LIMIT};
use crate::error::{Error, Result};

/// Lagrange basis of total degree k in physical coordinates, built from
/// orthonormal Legendre products scaled to the nodal bounding box so the
/// Vandermonde conditioning does not degrade with element size.
#[derive(Debug, Clone)]
pub struct PhysicalBasis {
    pub degree: usize,
    pub nodes: Vec<Point2<f64>>,
    center: Point2<f64>,
    half: (f64, f64),
    coeff: DMatrix<f64>,
    pub cond_estimate: f64,
}

impl PhysicalBasis {
    pub fn new(degree: usize, nodes: Vec<Point2<f64>>) -> Result<Self> {
        let n = mode_count(degree);
        if nodes.len() != n {
            return Err(Error::Basis(format!(
                "physical basis: {} nodes for degree {degree}, expected {n}",
                nodes.len()
            )));
        }
        let (mut xmin, mut xmax) = (f64::INFINITY, f64::NEG_INFINITY);
        let (mut ymin, mut ymax) = (f64::INFINITY, f64::NEG_INFINITY);
        for p in &nodes {
            xmin = xmin.min(p.x);
            xmax = xmax.max(p.x);
            ymin = ymin.min(p.y);
            ymax = ymax.max(p.y);
        }
        let center = Point2::new(0.5 * (xmin + xmax), 0.5 * (ymin + ymax));
        let half = (
            (0.5 * (xmax - xmin)).max(1e-300),
            (0.5 * (ymax - ymin)).max(1e-300),
        );
        if half.0 < 1e-14 || half.1 < 1e-14 {
            return Err(Error::Basis("degenerate nodal set (zero extent)".into()));
        }
        let mut this = Self {
            degree,
            nodes,
            center,
            half,
            coeff: DMatrix::zeros(0, 0),
            cond_estimate: 0.0,
        };
        let mut v = DMatrix::<f64>::zeros(n, n);
        for (row, p) in this.nodes.iter().enumerate() {
            let (mv, _, _) = this.modal(*p);
            for (col, value) in mv.iter().enumerate() {
                v[(row, col)] = *value;
            }
        }
        let svd = v.clone().svd(false, false);
        let smax = svd.singular_values.max();
        let smin = svd.singular_values.min();
        let cond = if smin > 0.0 { smax / smin } else { f64::INFINITY };
        if !cond.is_finite() || cond > COND_LIMIT {
            return Err(Error::Basis(format!(
                "physical Vandermonde condition {cond:.3e} signals a clustered nodal set"
            )));
        }
        this.coeff = v
            .try_inverse()
            .ok_or_else(|| Error::Basis("physical Vandermonde singular".into()))?;
        this.cond_estimate = cond;
        Ok(this)
    }

    fn modal(&self, p: Point2<f64>) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let k = self.degree;
        // scaled coordinates in [0,1] over the bounding box
        let sx = 0.5 + 0.5 * (p.x - self.center.x) / self.half.0;
        let sy = 0.5 + 0.5 * (p.y - self.center.y) / self.half.1;
        let (px, dpx) = legendre01_eval(k, sx);
        let (py, dpy) = legendre01_eval(k, sy);
        let cx = 0.5 / self.half.0;
        let cy = 0.5 / self.half.1;
        let nm = mode_count(k);
        let mut val = Vec::with_capacity(nm);
        let mut gx = Vec::with_capacity(nm);
        let mut gy = Vec::with_capacity(nm);
        for i in 0..=k {
            for j in 0..=(k - i) {
                val.push(px[i] * py[j]);
                gx.push(dpx[i] * cx * py[j]);
                gy.push(px[i] * dpy[j] * cy);
            }
        }
        (val, gx, gy)
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Values and Cartesian gradients at physical points, no chain rule.
    pub fn eval(&self, pts: &[Point2<f64>]) -> BasisEval {
        let n = self.len();
        let nm = mode_count(self.degree);
        let mut val = DMatrix::<f64>::zeros(pts.len(), n);
        let mut gx = DMatrix::<f64>::zeros(pts.len(), n);
        let mut gy = DMatrix::<f64>::zeros(pts.len(), n);
        for (row, p) in pts.iter().enumerate() {
            let (mv, mx, my) = self.modal(*p);
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

    fn affine_nodes(k: usize, verts: [Point2<f64>; 3]) -> Vec<Point2<f64>> {
        crate::approximation::nodes::warp_blend_nodes(k)
            .points
            .iter()
            .map(|p| {
                Point2::new(
                    verts[0].x + (verts[1].x - verts[0].x) * p.x + (verts[2].x - verts[0].x) * p.y,
                    verts[0].y + (verts[1].y - verts[0].y) * p.x + (verts[2].y - verts[0].y) * p.y,
                )
            })
            .collect()
    }

    #[test]
    fn linear_basis_is_barycentric() {
        let verts = [
            Point2::new(0.2, 0.1),
            Point2::new(1.3, 0.4),
            Point2::new(0.5, 1.1),
        ];
        let basis = PhysicalBasis::new(1, verts.to_vec()).unwrap();
        // barycentric coordinate of vertex 1 at the centroid is 1/3
        let centroid = Point2::new(
            (verts[0].x + verts[1].x + verts[2].x) / 3.0,
            (verts[0].y + verts[1].y + verts[2].y) / 3.0,
        );
        let ev = basis.eval(&[centroid]);
        for j in 0..3 {
            assert!((ev.val[(0, j)] - 1.0 / 3.0).abs() < 1e-12);
        }
        let at_vertex = basis.eval(&[verts[1]]);
        assert!((at_vertex.val[(0, 1)] - 1.0).abs() < 1e-12);
        assert!(at_vertex.val[(0, 0)].abs() < 1e-12);
    }

    #[test]
    fn reproduces_quadratic_polynomial() {
        let verts = [
            Point2::new(0.0, 0.0),
            Point2::new(2.0, 0.3),
            Point2::new(0.4, 1.7),
        ];
        let p = |x: f64, y: f64| x * x - 3.0 * y;
        for k in [2usize, 3, 5] {
            let basis = PhysicalBasis::new(k, affine_nodes(k, verts)).unwrap();
            let nodal: Vec<f64> = basis.nodes.iter().map(|q| p(q.x, q.y)).collect();
            let probe = [
                Point2::new(0.7, 0.5),
                Point2::new(1.1, 0.2),
                Point2::new(0.3, 0.9),
            ];
            let ev = basis.eval(&probe);
            for (row, q) in probe.iter().enumerate() {
                let interp: f64 = (0..basis.len()).map(|i| ev.val[(row, i)] * nodal[i]).sum();
                assert!(
                    (interp - p(q.x, q.y)).abs() < 1e-11,
                    "k={k}: {} vs {}",
                    interp,
                    p(q.x, q.y)
                );
                // gradient check: d/dx = 2x, d/dy = -3
                let gx: f64 = (0..basis.len()).map(|i| ev.gx[(row, i)] * nodal[i]).sum();
                let gy: f64 = (0..basis.len()).map(|i| ev.gy[(row, i)] * nodal[i]).sum();
                assert!((gx - 2.0 * q.x).abs() < 1e-10);
                assert!((gy + 3.0).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn partition_of_unity_at_interior_points() {
        let verts = [
            Point2::new(0.0, 0.0),
            Point2::new(1.0, 0.0),
            Point2::new(0.0, 1.0),
        ];
        let basis = PhysicalBasis::new(4, affine_nodes(4, verts)).unwrap();
        // deterministic low-discrepancy interior points
        let mut pts = Vec::new();
        for i in 1..21 {
            let a = (i as f64 * 0.618033988749895).fract();
            let b = (i as f64 * 0.3247179572447458).fract();
            let (a, b) = if a + b > 1.0 { (1.0 - a, 1.0 - b) } else { (a, b) };
            pts.push(Point2::new(a, b));
        }
        let ev = basis.eval(&pts);
        for row in 0..pts.len() {
            let s: f64 = (0..basis.len()).map(|i| ev.val[(row, i)]).sum();
            assert!((s - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn clustered_nodes_rejected() {
        let mut nodes = affine_nodes(2, [
            Point2::new(0.0, 0.0),
            Point2::new(1.0, 0.0),
            Point2::new(0.0, 1.0),
        ]);
        nodes[4] = nodes[5]; // duplicate a node
        assert!(PhysicalBasis::new(2, nodes).is_err());
    }
}
