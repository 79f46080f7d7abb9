//! NEFEM element charts: the exact NURBS edge, the interior vertex, and the
//! rectangle-to-element mapping used for approximation and integration.

use nalgebra::{Matrix2, Point2, Vector2};
use std::sync::Arc;

use super::nodes::warp_blend_nodes;
use crate::error::{Error, Result};
use crate::nurbs::{NurbsCurve, ParamInterval};

/// Chart of an element with one edge on the exact boundary. The rectangle
/// R = [lambda_a, lambda_b] x [0, 1] maps onto the element by blending the
/// curve towards the internal vertex.
#[derive(Debug, Clone)]
pub struct NefemChart {
    pub curve: Arc<NurbsCurve>,
    pub interval: ParamInterval,
    /// internal vertex opposite the curved edge
    pub x_interior: Point2<f64>,
    /// local edge index of the curved edge in the owning element
    pub curved_edge: usize,
}

impl NefemChart {
    pub fn new(
        curve: Arc<NurbsCurve>,
        interval: ParamInterval,
        x_interior: Point2<f64>,
        curved_edge: usize,
    ) -> Result<Self> {
        let chart = Self {
            curve,
            interval,
            x_interior,
            curved_edge,
        };
        chart.validate()?;
        Ok(chart)
    }

    /// x = (1 - l2) C(l1) + l2 x_I together with the Jacobian
    /// d x / d(l1, l2).
    pub fn map(&self, l1: f64, l2: f64) -> Result<(Point2<f64>, Matrix2<f64>)> {
        let (c, d1, _) = self.curve.eval_with_ders2(l1)?;
        let x = Point2::from((1.0 - l2) * c.coords + l2 * self.x_interior.coords);
        let col1 = (1.0 - l2) * d1;
        let col2 = self.x_interior - c;
        let j = Matrix2::from_columns(&[col1, col2]);
        Ok((x, j))
    }

    /// Orientation factor of the map: positive iff the interior vertex lies
    /// left of the curve tangent, which a counter-clockwise boundary yields.
    pub fn det_j(&self, l1: f64, l2: f64) -> Result<f64> {
        let (_, j) = self.map(l1, l2)?;
        Ok(j.determinant())
    }

    /// Check det J > 0 on a probe grid over R (away from the collapsed top
    /// edge where det J tends to zero linearly).
    pub fn validate(&self) -> Result<()> {
        let n = 24;
        for i in 0..=n {
            let l1 = self.interval.a + (self.interval.b - self.interval.a) * i as f64 / n as f64;
            for j in 0..n {
                let l2 = j as f64 / n as f64 * 0.96;
                let det = self.det_j(l1, l2)?;
                if det <= 0.0 {
                    return Err(Error::InvalidChart(format!(
                        "det J = {det:.3e} at (l1, l2) = ({l1}, {l2}); check boundary orientation"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Element vertices in local order: curve start, curve end, interior.
    pub fn vertices(&self) -> Result<[Point2<f64>; 3]> {
        Ok([
            self.curve.evaluate(self.interval.a)?,
            self.curve.evaluate(self.interval.b)?,
            self.x_interior,
        ])
    }

    /// Physical nodal set of degree k: a warp&blend reference distribution
    /// transplanted to R, so vertices and curved-edge nodes sit exactly on C.
    pub fn nodal_set(&self, k: usize) -> Result<Vec<Point2<f64>>> {
        let reference = warp_blend_nodes(k);
        let mut out = Vec::with_capacity(reference.len());
        for p in &reference.points {
            // barycentric w.r.t. (curve start, curve end, interior vertex)
            let b0 = 1.0 - p.x - p.y;
            let b1 = p.x;
            let b2 = p.y;
            if b0 + b1 < 1e-14 {
                out.push(self.x_interior);
                continue;
            }
            let l1 = self.interval.a + (self.interval.b - self.interval.a) * b1 / (b0 + b1);
            let (x, _) = self.map(l1, b2)?;
            out.push(x);
        }
        Ok(out)
    }

    /// Rectangle coordinates of the same transplanted distribution (the apex
    /// maps to l2 = 1 where l1 is immaterial; the interval midpoint is used).
    pub fn nodal_rect_coords(&self, k: usize) -> Vec<Point2<f64>> {
        let reference = warp_blend_nodes(k);
        reference
            .points
            .iter()
            .map(|p| {
                let b0 = 1.0 - p.x - p.y;
                let b1 = p.x;
                let b2 = p.y;
                if b0 + b1 < 1e-14 {
                    Point2::new(self.interval.midpoint(), 1.0)
                } else {
                    Point2::new(
                        self.interval.a + (self.interval.b - self.interval.a) * b1 / (b0 + b1),
                        b2,
                    )
                }
            })
            .collect()
    }

    /// Outward unit normal on the curved edge at parameter lambda; the domain
    /// lies left of the tangent for a counter-clockwise boundary.
    pub fn boundary_normal(&self, lambda: f64) -> Result<Vector2<f64>> {
        let d = self.curve.derivative(lambda, 1)?;
        let n = Vector2::new(d.y, -d.x);
        Ok(n / n.norm())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn circle_chart() -> NefemChart {
        let curve = Arc::new(NurbsCurve::circle(Point2::new(0.5, 0.5), 0.5));
        let iv = ParamInterval::new(0, 0.0, 0.125).unwrap();
        NefemChart::new(curve, iv, Point2::new(0.5, 0.5), 0).unwrap()
    }

    #[test]
    fn collapse_identities() {
        let chart = circle_chart();
        for l1 in [0.0, 0.05, 0.125] {
            let (x, _) = chart.map(l1, 1.0).unwrap();
            assert!((x - chart.x_interior).norm() < 1e-15);
            let (b, _) = chart.map(l1, 0.0).unwrap();
            let on_curve = chart.curve.evaluate(l1).unwrap();
            assert!((b - on_curve).norm() < 1e-15);
        }
    }

    #[test]
    fn straight_chart_area_matches_shoelace() {
        // straight edge as a degree-1 curve; mapped area must equal the
        // triangle area from the shoelace formula
        let a = Point2::new(0.0, 0.0);
        let b = Point2::new(1.0, 0.0);
        let xi = Point2::new(0.3, 0.8);
        let line = Arc::new(
            NurbsCurve::new(1, vec![0.0, 0.0, 1.0, 1.0], vec![a, b], vec![1.0, 1.0]).unwrap(),
        );
        let chart = NefemChart::new(
            line,
            ParamInterval::new(0, 0.0, 1.0).unwrap(),
            xi,
            0,
        )
        .unwrap();
        // tensor Gauss integration of det J over R
        let gl = crate::quadrature::gauss_segment(6).unwrap();
        let mut area = 0.0;
        for (l1, w1) in gl.points.iter().zip(&gl.weights) {
            for (l2, w2) in gl.points.iter().zip(&gl.weights) {
                area += w1 * w2 * chart.det_j(*l1, *l2).unwrap();
            }
        }
        let shoelace = 0.5
            * ((b.x - a.x) * (xi.y - a.y) - (xi.x - a.x) * (b.y - a.y)).abs();
        assert!((area - shoelace).abs() < 1e-14);
    }

    #[test]
    fn nodal_set_k1_is_vertices() {
        let chart = circle_chart();
        let nodes = chart.nodal_set(1).unwrap();
        assert_eq!(nodes.len(), 3);
        let verts = chart.vertices().unwrap();
        for v in &verts {
            assert!(nodes.iter().any(|n| (n - v).norm() < 1e-13));
        }
    }

    #[test]
    fn nodal_set_edge_nodes_on_curve() {
        let chart = circle_chart();
        let nodes = chart.nodal_set(4).unwrap();
        let lat = warp_blend_nodes(4);
        for idx in lat.edge_nodes(0) {
            let r = (nodes[idx] - Point2::new(0.5, 0.5)).norm();
            assert!((r - 0.5).abs() < 1e-13);
        }
    }

    #[test]
    fn nodal_set_inside_element_by_winding_number() {
        // winding-number oracle against a fine boundary polyline
        let chart = circle_chart();
        let nodes = chart.nodal_set(5).unwrap();
        let mut poly: Vec<Point2<f64>> = Vec::new();
        let n = 400;
        for i in 0..=n {
            let l = chart.interval.a
                + (chart.interval.b - chart.interval.a) * i as f64 / n as f64;
            poly.push(chart.curve.evaluate(l).unwrap());
        }
        poly.push(chart.x_interior);
        let winding = |p: Point2<f64>| -> f64 {
            let mut angle = 0.0;
            for w in 0..poly.len() {
                let a = poly[w] - p;
                let b = poly[(w + 1) % poly.len()] - p;
                let cross = a.x * b.y - a.y * b.x;
                let dot = a.dot(&b);
                angle += cross.atan2(dot);
            }
            angle
        };
        for nd in &nodes {
            // pull slightly towards the centroid so boundary nodes test cleanly
            let centroid = Point2::new(
                (poly[0].x + poly[poly.len() - 2].x + chart.x_interior.x) / 3.0,
                (poly[0].y + poly[poly.len() - 2].y + chart.x_interior.y) / 3.0,
            );
            // the chord polyline undercuts the arc by its sagitta (~2.5e-7
            // for 400 segments), so probe clearly inside of that
            let probe = Point2::from(nd.coords + 1e-4 * (centroid - nd));
            let w = winding(probe).abs();
            assert!(
                (w - 2.0 * std::f64::consts::PI).abs() < 1e-3,
                "node {nd:?} outside the element (winding {w})"
            );
        }
    }

    #[test]
    fn reversed_orientation_rejected() {
        // interior vertex on the wrong side of the curve
        let curve = Arc::new(NurbsCurve::circle(Point2::new(0.5, 0.5), 0.5));
        let iv = ParamInterval::new(0, 0.0, 0.125).unwrap();
        let outside = Point2::new(1.5, 0.5);
        assert!(NefemChart::new(curve, iv, outside, 0).is_err());
    }
}
