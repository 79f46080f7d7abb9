//! Nodal distributions: Gauss-Lobatto points on the segment and warp&blend
//! points on the reference triangle, with the lattice bookkeeping needed to
//! identify vertex and edge nodes.

use nalgebra::{DMatrix, Point2};

use super::modal::legendre01_eval;
use crate::quadrature::gauss_jacobi;

/// Gauss-Lobatto nodes on [0, 1], endpoints included, ascending.
pub fn gauss_lobatto01(np: usize) -> Vec<f64> {
    assert!(np >= 2);
    let mut pts = Vec::with_capacity(np);
    pts.push(0.0);
    if np > 2 {
        let (interior, _) = gauss_jacobi(np - 2, 1, 1);
        pts.extend(interior.iter().map(|x| 0.5 * (x + 1.0)));
    }
    pts.push(1.0);
    pts
}

/// Equispaced nodes on [0, 1].
pub fn equispaced01(np: usize) -> Vec<f64> {
    assert!(np >= 2);
    (0..np).map(|i| i as f64 / (np - 1) as f64).collect()
}

/// Nodal set on the reference triangle with its (i, j) lattice indices;
/// node (i, j) sits near (i/k, j/k) and i + j <= k.
#[derive(Debug, Clone)]
pub struct TriangleNodes {
    pub degree: usize,
    pub points: Vec<Point2<f64>>,
    pub lattice: Vec<(usize, usize)>,
}

impl TriangleNodes {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Indices of the nodes on local edge `e` (0: j=0, 1: hypotenuse, 2: i=0),
    /// ordered along the edge in the CCW traversal direction.
    pub fn edge_nodes(&self, e: usize) -> Vec<usize> {
        let k = self.degree;
        let mut on_edge: Vec<(usize, usize)> = self
            .lattice
            .iter()
            .enumerate()
            .filter(|(_, &(i, j))| match e {
                0 => j == 0,
                1 => i + j == k,
                2 => i == 0,
                _ => unreachable!(),
            })
            .map(|(idx, &(i, j))| {
                // position along the traversal
                let t = match e {
                    0 => i,
                    1 => j,
                    2 => k - j,
                    _ => unreachable!(),
                };
                (t, idx)
            })
            .collect();
        on_edge.sort();
        on_edge.into_iter().map(|(_, idx)| idx).collect()
    }
}

fn lattice(k: usize) -> Vec<(usize, usize)> {
    let mut v = Vec::with_capacity((k + 1) * (k + 2) / 2);
    for i in 0..=k {
        for j in 0..=(k - i) {
            v.push((i, j));
        }
    }
    v
}

/// Equispaced lattice on the reference triangle.
pub fn equispaced_nodes(k: usize) -> TriangleNodes {
    let lat = lattice(k);
    let points = lat
        .iter()
        .map(|&(i, j)| {
            if k == 0 {
                Point2::new(1.0 / 3.0, 1.0 / 3.0)
            } else {
                Point2::new(i as f64 / k as f64, j as f64 / k as f64)
            }
        })
        .collect();
    TriangleNodes {
        degree: k,
        points,
        lattice: lat,
    }
}

// Blend exponents tuned per degree (Warburton's alpha-optimal table).
const ALPHA_OPT: [f64; 15] = [
    0.0, 0.0, 1.4152, 0.1001, 0.2751, 0.9800, 1.0999, 1.2832, 1.3648, 1.4773, 1.4959, 1.5743,
    1.5770, 1.6223, 1.6258,
];

/// 1D warp displacement from equispaced towards Gauss-Lobatto, evaluated at
/// coordinates `r` in [-1, 1].
fn warp_factor(k: usize, r: &[f64]) -> Vec<f64> {
    let np = k + 1;
    let gll: Vec<f64> = gauss_lobatto01(np).iter().map(|s| 2.0 * s - 1.0).collect();
    let req: Vec<f64> = equispaced01(np).iter().map(|s| 2.0 * s - 1.0).collect();
    // Vandermonde of orthonormal 1D modes at the equispaced nodes
    let mut veq = DMatrix::<f64>::zeros(np, np);
    for (row, &x) in req.iter().enumerate() {
        let (vals, _) = legendre01_eval(k, 0.5 * (x + 1.0));
        for (col, v) in vals.iter().enumerate() {
            veq[(row, col)] = *v;
        }
    }
    let veq_t_inv = veq
        .transpose()
        .try_inverse()
        .expect("equispaced 1D Vandermonde invertible");
    let mut warp = Vec::with_capacity(r.len());
    for &x in r {
        let (pvals, _) = legendre01_eval(k, 0.5 * (x + 1.0));
        let p = DMatrix::from_column_slice(np, 1, &pvals);
        let lag = &veq_t_inv * p; // Lagrange (equispaced) values at x
        let mut w = 0.0;
        for m in 0..np {
            w += lag[(m, 0)] * (gll[m] - req[m]);
        }
        let zerof = x.abs() < 1.0 - 1e-10;
        let sf = if zerof { 1.0 - x * x } else { 1.0 };
        w = w / sf + if zerof { 0.0 } else { -w };
        warp.push(w);
    }
    warp
}

/// Warp&blend nodes on the reference triangle (good Lebesgue constants).
pub fn warp_blend_nodes(k: usize) -> TriangleNodes {
    let lat = lattice(k);
    if k == 0 {
        return TriangleNodes {
            degree: 0,
            points: vec![Point2::new(1.0 / 3.0, 1.0 / 3.0)],
            lattice: lat,
        };
    }
    let alpha = if k < 16 { ALPHA_OPT[k - 1] } else { 5.0 / 3.0 };
    let n = lat.len();

    // barycentric coordinates of the equispaced lattice; the reference
    // vertices (0,0), (1,0), (0,1) map to the equilateral triangle corners
    // associated with (l2, l3, l1) respectively.
    let mut l1 = Vec::with_capacity(n);
    let mut l2 = Vec::with_capacity(n);
    let mut l3 = Vec::with_capacity(n);
    for &(i, j) in &lat {
        let bi = i as f64 / k as f64;
        let bj = j as f64 / k as f64;
        l2.push(1.0 - bi - bj);
        l3.push(bi);
        l1.push(bj);
    }
    let sqrt3 = 3f64.sqrt();
    let mut x: Vec<f64> = (0..n).map(|m| -l2[m] + l3[m]).collect();
    let mut y: Vec<f64> = (0..n)
        .map(|m| (-l2[m] - l3[m] + 2.0 * l1[m]) / sqrt3)
        .collect();

    let edges = [(&l3, &l2, &l1), (&l1, &l3, &l2), (&l2, &l1, &l3)];
    let angles = [0.0, 2.0 * std::f64::consts::PI / 3.0, 4.0 * std::f64::consts::PI / 3.0];
    for ((la, lb, lc), angle) in edges.iter().zip(angles) {
        let r: Vec<f64> = (0..n).map(|m| la[m] - lb[m]).collect();
        let wf = warp_factor(k, &r);
        for m in 0..n {
            let blend = 4.0 * la[m] * lb[m];
            let w = blend * wf[m] * (1.0 + (alpha * lc[m]).powi(2));
            x[m] += angle.cos() * w;
            y[m] += angle.sin() * w;
        }
    }

    // back to barycentric, then to the reference triangle
    let mut points = Vec::with_capacity(n);
    for m in 0..n {
        let b1 = (sqrt3 * y[m] + 1.0) / 3.0;
        let b2 = (-3.0 * x[m] - sqrt3 * y[m] + 2.0) / 6.0;
        let b3 = (3.0 * x[m] - sqrt3 * y[m] + 2.0) / 6.0;
        let _ = b2;
        points.push(Point2::new(b3, b1));
    }
    TriangleNodes {
        degree: k,
        points,
        lattice: lat,
    }
}
