//! Isoparametric element geometry: high-order nodal coordinates of degree q
//! and the reference-to-physical mapping built on them.

use nalgebra::{Matrix2, Point2, Vector2};
use std::sync::Arc;

use super::nodes::equispaced_nodes;
use super::segment::SegmentBasis;
use super::triangle::TriangleBasis;
use super::{geometry_basis, TriangleNodes};
use crate::error::{Error, Result};
use crate::nurbs::{NurbsCurve, ParamInterval};

/// Geometry of one (possibly curved) isoparametric element.
#[derive(Debug, Clone)]
pub struct IsoGeometry {
    pub q: usize,
    /// physical coordinates of the equispaced geometry lattice
    pub nodes: Vec<Point2<f64>>,
    basis: Arc<TriangleBasis>,
}

fn affine(verts: &[Point2<f64>; 3], p: Point2<f64>) -> Point2<f64> {
    Point2::new(
        verts[0].x + (verts[1].x - verts[0].x) * p.x + (verts[2].x - verts[0].x) * p.y,
        verts[0].y + (verts[1].y - verts[0].y) * p.x + (verts[2].y - verts[0].y) * p.y,
    )
}

/// Parameter of the point on C within [a, b] nearest to `x`: coarse scan
/// followed by safeguarded Newton on (C - x) . C'.
pub fn nearest_parameter(
    curve: &NurbsCurve,
    interval: &ParamInterval,
    x: Point2<f64>,
) -> Result<f64> {
    let (a, b) = (interval.a, interval.b);
    let nscan = 64;
    let mut best = a;
    let mut best_d = f64::INFINITY;
    for i in 0..=nscan {
        let l = a + (b - a) * i as f64 / nscan as f64;
        let d = (curve.evaluate(l)? - x).norm_squared();
        if d < best_d {
            best_d = d;
            best = l;
        }
    }
    let mut l = best;
    for _ in 0..40 {
        let (c, d1, d2) = curve.eval_with_ders2(l)?;
        let g = (c - x).dot(&d1);
        let gp = d1.norm_squared() + (c - x).dot(&d2);
        if gp.abs() < 1e-300 {
            break;
        }
        let step = g / gp;
        let l_new = (l - step).clamp(a, b);
        if (l_new - l).abs() < 1e-15 * (b - a) {
            l = l_new;
            break;
        }
        l = l_new;
    }
    Ok(l)
}

impl IsoGeometry {
    /// Straight element of geometric degree q (affine lattice), used when the
    /// fixed-q strategy applies to uncurved elements too.
    pub fn straight(q: usize, verts: [Point2<f64>; 3]) -> Result<Self> {
        let lat = equispaced_nodes(q);
        let nodes = lat.points.iter().map(|p| affine(&verts, *p)).collect();
        Ok(Self {
            q,
            nodes,
            basis: geometry_basis(q)?,
        })
    }

    /// Curved element: edge nodes projected onto the NURBS boundary at their
    /// nearest parameter, interior nodes blended so the two straight edges
    /// stay straight and the map remains invertible.
    pub fn curved(
        q: usize,
        verts: [Point2<f64>; 3],
        curved_edge: usize,
        curve: &NurbsCurve,
        interval: &ParamInterval,
    ) -> Result<Self> {
        let lat = equispaced_nodes(q);
        let straight: Vec<Point2<f64>> = lat.points.iter().map(|p| affine(&verts, *p)).collect();
        let edge_ids = lat.edge_nodes(curved_edge);

        // displacement of each geometry node on the curved edge
        let mut edge_disp: Vec<Vector2<f64>> = Vec::with_capacity(edge_ids.len());
        for (slot, idx) in edge_ids.iter().enumerate() {
            let d = if slot == 0 || slot == q {
                Vector2::zeros() // vertices already on the curve
            } else {
                let l = nearest_parameter(curve, interval, straight[*idx])?;
                curve.evaluate(l)? - straight[*idx]
            };
            edge_disp.push(d);
        }

        // 1D interpolation of the edge displacement at equispaced parameters
        let edge_basis = SegmentBasis::equispaced(q)?;

        let mut nodes = straight.clone();
        for (m, &(i, j)) in lat.lattice.iter().enumerate() {
            // barycentric coordinates on the lattice
            let bary = [
                1.0 - (i + j) as f64 / q as f64,
                i as f64 / q as f64,
                j as f64 / q as f64,
            ];
            // local edge e runs from vertex e to vertex e+1
            let (ba, bb, bopp) = match curved_edge {
                0 => (bary[0], bary[1], bary[2]),
                1 => (bary[1], bary[2], bary[0]),
                2 => (bary[2], bary[0], bary[1]),
                _ => return Err(Error::Argument("local edge index out of range".into())),
            };
            if ba + bb < 1e-14 {
                continue; // opposite vertex
            }
            let t = bb / (ba + bb);
            let vals = edge_basis.eval(&[t]);
            let mut d = Vector2::zeros();
            for (slot, disp) in edge_disp.iter().enumerate() {
                d += vals[(0, slot)] * disp;
            }
            nodes[m] += (1.0 - bopp) * d;
        }
        let geom = Self {
            q,
            nodes,
            basis: geometry_basis(q)?,
        };
        geom.check_invertible()?;
        Ok(geom)
    }

    pub fn lattice(&self) -> &TriangleNodes {
        &self.basis.nodes
    }

    /// Map reference points through the geometry; returns physical points and
    /// 2x2 Jacobians.
    pub fn map(&self, ref_pts: &[Point2<f64>]) -> (Vec<Point2<f64>>, Vec<Matrix2<f64>>) {
        let ev = self.basis.eval(ref_pts);
        let n = self.nodes.len();
        let mut xs = Vec::with_capacity(ref_pts.len());
        let mut js = Vec::with_capacity(ref_pts.len());
        for row in 0..ref_pts.len() {
            let mut x = Vector2::zeros();
            let mut j = Matrix2::zeros();
            for m in 0..n {
                let node = self.nodes[m].coords;
                x += ev.val[(row, m)] * node;
                j[(0, 0)] += node.x * ev.gx[(row, m)];
                j[(0, 1)] += node.x * ev.gy[(row, m)];
                j[(1, 0)] += node.y * ev.gx[(row, m)];
                j[(1, 1)] += node.y * ev.gy[(row, m)];
            }
            xs.push(Point2::from(x));
            js.push(j);
        }
        (xs, js)
    }

    /// Map with inverted-element detection.
    pub fn map_checked(&self, ref_pts: &[Point2<f64>]) -> Result<(Vec<Point2<f64>>, Vec<Matrix2<f64>>)> {
        let (xs, js) = self.map(ref_pts);
        for j in &js {
            if j.determinant() <= 0.0 {
                return Err(Error::Geometry(format!(
                    "non-positive Jacobian determinant {:.3e} in isoparametric map",
                    j.determinant()
                )));
            }
        }
        Ok((xs, js))
    }

    fn check_invertible(&self) -> Result<()> {
        let probe = equispaced_nodes(8);
        // pull probe slightly inside so vertex-degenerate corners don't trip
        let pts: Vec<Point2<f64>> = probe
            .points
            .iter()
            .map(|p| {
                let c = Point2::new(1.0 / 3.0, 1.0 / 3.0);
                Point2::from(c + 0.999 * (p - c))
            })
            .collect();
        self.map_checked(&pts).map(|_| ())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn affine_map_has_constant_jacobian() {
        let verts = [
            Point2::new(0.0, 0.0),
            Point2::new(2.0, 0.0),
            Point2::new(0.0, 1.0),
        ];
        let g = IsoGeometry::straight(1, verts).unwrap();
        let (xs, js) = g.map(&[Point2::new(0.25, 0.25), Point2::new(0.6, 0.2)]);
        assert!((xs[0] - Point2::new(0.5, 0.25)).norm() < 1e-14);
        for j in &js {
            // det J = 2 * area = 2 * 1 = 2
            assert!((j.determinant() - 2.0).abs() < 1e-13);
        }
    }

    #[test]
    fn quadratic_nodes_at_straight_midpoints_reduce_to_affine() {
        let verts = [
            Point2::new(0.1, 0.2),
            Point2::new(1.1, 0.3),
            Point2::new(0.4, 1.4),
        ];
        let g1 = IsoGeometry::straight(1, verts).unwrap();
        let g2 = IsoGeometry::straight(2, verts).unwrap();
        let pts = [Point2::new(0.3, 0.3), Point2::new(0.1, 0.75)];
        let (x1, j1) = g1.map(&pts);
        let (x2, j2) = g2.map(&pts);
        for i in 0..pts.len() {
            assert!((x1[i] - x2[i]).norm() < 1e-12);
            assert!((j1[i] - j2[i]).norm() < 1e-11);
        }
    }

    #[test]
    fn curved_jacobian_matches_finite_differences() {
        let curve = NurbsCurve::circle(Point2::new(0.5, 0.5), 0.5);
        let iv = ParamInterval::new(0, 0.0, 0.125).unwrap();
        let a = curve.evaluate(iv.a).unwrap();
        let b = curve.evaluate(iv.b).unwrap();
        let verts = [a, b, Point2::new(0.5, 0.5)];
        let g = IsoGeometry::curved(3, verts, 0, &curve, &iv).unwrap();
        let h = 1e-6;
        let p = Point2::new(0.3, 0.25);
        let (_, js) = g.map(&[p]);
        let (xp, _) = g.map(&[Point2::new(p.x + h, p.y)]);
        let (xm, _) = g.map(&[Point2::new(p.x - h, p.y)]);
        let (yp, _) = g.map(&[Point2::new(p.x, p.y + h)]);
        let (ym, _) = g.map(&[Point2::new(p.x, p.y - h)]);
        let fd00 = (xp[0].x - xm[0].x) / (2.0 * h);
        let fd10 = (xp[0].y - xm[0].y) / (2.0 * h);
        let fd01 = (yp[0].x - ym[0].x) / (2.0 * h);
        let fd11 = (yp[0].y - ym[0].y) / (2.0 * h);
        assert!((js[0][(0, 0)] - fd00).abs() < 1e-6);
        assert!((js[0][(1, 0)] - fd10).abs() < 1e-6);
        assert!((js[0][(0, 1)] - fd01).abs() < 1e-6);
        assert!((js[0][(1, 1)] - fd11).abs() < 1e-6);
    }

    #[test]
    fn curved_edge_nodes_land_on_curve() {
        let curve = NurbsCurve::circle(Point2::new(0.5, 0.5), 0.5);
        let iv = ParamInterval::new(0, 0.25, 0.375).unwrap();
        let a = curve.evaluate(iv.a).unwrap();
        let b = curve.evaluate(iv.b).unwrap();
        let verts = [a, b, Point2::new(0.5, 0.5)];
        let g = IsoGeometry::curved(4, verts, 0, &curve, &iv).unwrap();
        for idx in g.lattice().edge_nodes(0) {
            let p = g.nodes[idx];
            let r = (p - Point2::new(0.5, 0.5)).norm();
            assert!((r - 0.5).abs() < 1e-12, "edge node off circle: {r}");
        }
    }

    #[test]
    fn projection_on_straight_boundary_gives_equispaced_chord_points() {
        let a = Point2::new(0.0, 0.0);
        let b = Point2::new(1.0, 0.5);
        let line = NurbsCurve::new(
            1,
            vec![0.0, 0.0, 1.0, 1.0],
            vec![a, b],
            vec![1.0, 1.0],
        )
        .unwrap();
        let iv = ParamInterval::new(0, 0.0, 1.0).unwrap();
        let verts = [a, b, Point2::new(0.0, 1.0)];
        let g = IsoGeometry::curved(3, verts, 0, &line, &iv).unwrap();
        let edge = g.lattice().edge_nodes(0);
        for (slot, idx) in edge.iter().enumerate() {
            let t = slot as f64 / 3.0;
            let expect = Point2::from(a.coords * (1.0 - t) + b.coords * t);
            assert!((g.nodes[*idx] - expect).norm() < 1e-12);
        }
    }
}
