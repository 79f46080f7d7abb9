//! Rational B-spline boundary curves: storage, evaluation, derivatives and
//! knot-span queries, plus the plain-text geometry file format.

use nalgebra::{Point2, Vector2};

use crate::error::{Error, Result};

/// Tolerance for clamping parameters that sit on the knot-range ends.
const PARAM_CLAMP: f64 = 1e-12;

/// A rational B-spline curve in the plane with an open knot vector.
#[derive(Debug, Clone, PartialEq)]
pub struct NurbsCurve {
    degree: usize,
    knots: Vec<f64>,
    control_points: Vec<Point2<f64>>,
    weights: Vec<f64>,
}

/// Parametric extent of one boundary edge on a curve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParamInterval {
    pub curve: usize,
    pub a: f64,
    pub b: f64,
}

impl ParamInterval {
    pub fn new(curve: usize, a: f64, b: f64) -> Result<Self> {
        if !(a < b) {
            return Err(Error::Argument(format!(
                "parametric interval needs a < b, got [{a}, {b}]"
            )));
        }
        Ok(Self { curve, a, b })
    }

    pub fn midpoint(&self) -> f64 {
        0.5 * (self.a + self.b)
    }

    pub fn split(&self) -> (ParamInterval, ParamInterval) {
        let m = self.midpoint();
        (
            ParamInterval { curve: self.curve, a: self.a, b: m },
            ParamInterval { curve: self.curve, a: m, b: self.b },
        )
    }
}

impl NurbsCurve {
    pub fn new(
        degree: usize,
        knots: Vec<f64>,
        control_points: Vec<Point2<f64>>,
        weights: Vec<f64>,
    ) -> Result<Self> {
        if degree < 1 {
            return Err(Error::Argument("curve degree must be >= 1".into()));
        }
        let n = control_points.len();
        if weights.len() != n {
            return Err(Error::Argument(format!(
                "{} weights for {} control points",
                weights.len(),
                n
            )));
        }
        if knots.len() != n + degree + 1 {
            return Err(Error::Argument(format!(
                "knot count {} != control points {} + degree {} + 1",
                knots.len(),
                n,
                degree
            )));
        }
        if knots.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::Argument("knots must be non-decreasing".into()));
        }
        for i in 0..=degree {
            if knots[i] != knots[0] || knots[knots.len() - 1 - i] != knots[knots.len() - 1] {
                return Err(Error::Argument(
                    "open knot vector required (end knots repeated degree+1 times)".into(),
                ));
            }
        }
        if knots[0] >= knots[knots.len() - 1] {
            return Err(Error::Argument("empty knot range".into()));
        }
        if weights.iter().any(|w| !(*w > 0.0)) {
            return Err(Error::Argument("weights must be strictly positive".into()));
        }
        Ok(Self {
            degree,
            knots,
            control_points,
            weights,
        })
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    pub fn control_points(&self) -> &[Point2<f64>] {
        &self.control_points
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn knot_range(&self) -> (f64, f64) {
        (self.knots[0], self.knots[self.knots.len() - 1])
    }

    fn clamp_param(&self, lambda: f64) -> Result<f64> {
        let (lo, hi) = self.knot_range();
        if lambda < lo - PARAM_CLAMP || lambda > hi + PARAM_CLAMP {
            return Err(Error::ParamDomain(format!(
                "parameter {lambda} outside knot range [{lo}, {hi}]"
            )));
        }
        Ok(lambda.clamp(lo, hi))
    }

    /// Index s with knots[s] <= lambda < knots[s+1] (last span at the end).
    fn find_span(&self, lambda: f64) -> usize {
        let n = self.control_points.len();
        let p = self.degree;
        if lambda >= self.knots[n] {
            return n - 1;
        }
        let mut lo = p;
        let mut hi = n;
        while lo < hi {
            let mid = (lo + hi) / 2;
            if lambda < self.knots[mid] {
                hi = mid;
            } else {
                lo = mid + 1;
            }
        }
        lo - 1
    }

    /// C(lambda) by the rational de Boor recursion in homogeneous coordinates.
    pub fn evaluate(&self, lambda: f64) -> Result<Point2<f64>> {
        let lambda = self.clamp_param(lambda)?;
        let p = self.degree;
        let span = self.find_span(lambda);
        let mut h: Vec<[f64; 3]> = (0..=p)
            .map(|j| {
                let idx = span - p + j;
                let w = self.weights[idx];
                let c = self.control_points[idx];
                [w * c.x, w * c.y, w]
            })
            .collect();
        for r in 1..=p {
            for j in (r..=p).rev() {
                let i = span - p + j;
                let den = self.knots[i + p - r + 1] - self.knots[i];
                let alpha = if den.abs() < f64::EPSILON {
                    0.0
                } else {
                    (lambda - self.knots[i]) / den
                };
                for c in 0..3 {
                    h[j][c] = (1.0 - alpha) * h[j - 1][c] + alpha * h[j][c];
                }
            }
        }
        let [wx, wy, w] = h[p];
        Ok(Point2::new(wx / w, wy / w))
    }

    /// Non-vanishing B-spline basis values and derivatives up to `n_der`
    /// at `lambda`; returns (first control index, ders[r][j]).
    fn basis_ders(&self, lambda: f64, n_der: usize) -> (usize, Vec<Vec<f64>>) {
        let p = self.degree;
        let span = self.find_span(lambda);
        let u = &self.knots;
        let mut ndu = vec![vec![0.0; p + 1]; p + 1];
        let mut left = vec![0.0; p + 1];
        let mut right = vec![0.0; p + 1];
        ndu[0][0] = 1.0;
        for j in 1..=p {
            left[j] = lambda - u[span + 1 - j];
            right[j] = u[span + j] - lambda;
            let mut saved = 0.0;
            for r in 0..j {
                ndu[j][r] = right[r + 1] + left[j - r];
                let temp = ndu[r][j - 1] / ndu[j][r];
                ndu[r][j] = saved + right[r + 1] * temp;
                saved = left[j - r] * temp;
            }
            ndu[j][j] = saved;
        }
        let nd = n_der.min(p);
        let mut ders = vec![vec![0.0; p + 1]; n_der + 1];
        for j in 0..=p {
            ders[0][j] = ndu[j][p];
        }
        let mut a = vec![vec![0.0; p + 1]; 2];
        for r in 0..=p {
            let mut s1 = 0usize;
            let mut s2 = 1usize;
            a[0][0] = 1.0;
            for k in 1..=nd {
                let mut d = 0.0;
                let rk = r as isize - k as isize;
                let pk = p - k;
                if r >= k {
                    a[s2][0] = a[s1][0] / ndu[pk + 1][rk as usize];
                    d = a[s2][0] * ndu[rk as usize][pk];
                }
                let j1 = if rk >= -1 { 1 } else { (-rk) as usize };
                let j2 = if r as isize - 1 <= pk as isize { k - 1 } else { p - r };
                for j in j1..=j2 {
                    a[s2][j] = (a[s1][j] - a[s1][j - 1]) / ndu[pk + 1][(rk + j as isize) as usize];
                    d += a[s2][j] * ndu[(rk + j as isize) as usize][pk];
                }
                if r <= pk {
                    a[s2][k] = -a[s1][k - 1] / ndu[pk + 1][r];
                    d += a[s2][k] * ndu[r][pk];
                }
                ders[k][r] = d;
                std::mem::swap(&mut s1, &mut s2);
            }
        }
        let mut factor = p as f64;
        for k in 1..=nd {
            for j in 0..=p {
                ders[k][j] *= factor;
            }
            factor *= (p - k) as f64;
        }
        (span - p, ders)
    }

    /// Point together with the first two parametric derivatives.
    pub fn eval_with_ders2(&self, lambda: f64) -> Result<(Point2<f64>, Vector2<f64>, Vector2<f64>)> {
        let lambda = self.clamp_param(lambda)?;
        let (first, ders) = self.basis_ders(lambda, 2);
        let p = self.degree;
        // homogeneous curve A = sum N_i w_i P_i and weight function w
        let mut a = [[0.0f64; 3]; 3];
        for j in 0..=p {
            let idx = first + j;
            let w = self.weights[idx];
            let c = self.control_points[idx];
            for r in 0..3.min(ders.len()) {
                a[r][0] += ders[r][j] * w * c.x;
                a[r][1] += ders[r][j] * w * c.y;
                a[r][2] += ders[r][j] * w;
            }
        }
        let w0 = a[0][2];
        let c0 = Vector2::new(a[0][0] / w0, a[0][1] / w0);
        // quotient rule: C' = (A' - w' C)/w, C'' = (A'' - 2 w' C' - w'' C)/w
        let d1 = (Vector2::new(a[1][0], a[1][1]) - a[1][2] * c0) / w0;
        let d2 = (Vector2::new(a[2][0], a[2][1]) - 2.0 * a[1][2] * d1 - a[2][2] * c0) / w0;
        Ok((Point2::from(c0), d1, d2))
    }

    /// d^order C / d lambda^order for order 1 or 2.
    pub fn derivative(&self, lambda: f64, order: usize) -> Result<Vector2<f64>> {
        if order == 0 || order > 2 {
            return Err(Error::Argument(format!(
                "derivative order {order} unsupported (1 or 2)"
            )));
        }
        let (_, d1, d2) = self.eval_with_ders2(lambda)?;
        Ok(if order == 1 { d1 } else { d2 })
    }

    /// Distinct knot values strictly inside (a, b); composite quadrature must
    /// split there because the curve is only piecewise smooth across knots.
    pub fn interior_breakpoints(&self, interval: &ParamInterval) -> Vec<f64> {
        let mut out: Vec<f64> = Vec::new();
        let tol = 1e-13 * (self.knot_range().1 - self.knot_range().0).abs();
        for &u in &self.knots {
            if u > interval.a + tol && u < interval.b - tol {
                if out.last().map_or(true, |last| (u - last).abs() > tol) {
                    out.push(u);
                }
            }
        }
        out
    }

    /// Non-vanishing basis values at lambda, for least-squares fitting.
    pub fn basis_span_values(&self, lambda: f64) -> Result<(usize, Vec<f64>)> {
        let lambda = self.clamp_param(lambda)?;
        let (first, ders) = self.basis_ders(lambda, 0);
        Ok((first, ders[0].clone()))
    }

    /// Full circle of given radius, counter-clockwise, parameter in [0, 1];
    /// exact rational quadratic with four 90-degree arcs.
    pub fn circle(center: Point2<f64>, radius: f64) -> Self {
        let w = 0.5f64.sqrt();
        let c = center;
        let r = radius;
        let pts = vec![
            Point2::new(c.x + r, c.y),
            Point2::new(c.x + r, c.y + r),
            Point2::new(c.x, c.y + r),
            Point2::new(c.x - r, c.y + r),
            Point2::new(c.x - r, c.y),
            Point2::new(c.x - r, c.y - r),
            Point2::new(c.x, c.y - r),
            Point2::new(c.x + r, c.y - r),
            Point2::new(c.x + r, c.y),
        ];
        let weights = vec![1.0, w, 1.0, w, 1.0, w, 1.0, w, 1.0];
        let knots = vec![0.0, 0.0, 0.0, 0.25, 0.25, 0.5, 0.5, 0.75, 0.75, 1.0, 1.0, 1.0];
        Self::new(2, knots, pts, weights).expect("circle construction is valid")
    }
}

/// Parse the plain-text geometry format: per curve `degree`, knot count and
/// knots, control-point count and (x, y, w) triples.
pub fn read_curves(text: &str) -> Result<Vec<NurbsCurve>> {
    let mut tokens = text
        .lines()
        .map(|l| l.split('#').next().unwrap_or(""))
        .flat_map(|l| l.split_whitespace())
        .map(|s| s.to_string())
        .collect::<Vec<_>>()
        .into_iter();
    let next_usize = |what: &str, tokens: &mut dyn Iterator<Item = String>| -> Result<usize> {
        tokens
            .next()
            .ok_or_else(|| Error::Parse(format!("geometry file ended before {what}")))?
            .parse()
            .map_err(|_| Error::Parse(format!("bad integer for {what}")))
    };
    fn next_f64(what: &str, tokens: &mut dyn Iterator<Item = String>) -> Result<f64> {
        tokens
            .next()
            .ok_or_else(|| Error::Parse(format!("geometry file ended before {what}")))?
            .parse()
            .map_err(|_| Error::Parse(format!("bad real for {what}")))
    }
    let mut curves = Vec::new();
    loop {
        let degree = match tokens.next() {
            None => break,
            Some(t) => t
                .parse::<usize>()
                .map_err(|_| Error::Parse("bad curve degree".into()))?,
        };
        let n_knots = next_usize("knot count", &mut tokens)?;
        let mut knots = Vec::with_capacity(n_knots);
        for _ in 0..n_knots {
            knots.push(next_f64("knot", &mut tokens)?);
        }
        let n_pts = next_usize("control point count", &mut tokens)?;
        let mut pts = Vec::with_capacity(n_pts);
        let mut weights = Vec::with_capacity(n_pts);
        for _ in 0..n_pts {
            let x = next_f64("control x", &mut tokens)?;
            let y = next_f64("control y", &mut tokens)?;
            let w = next_f64("control weight", &mut tokens)?;
            pts.push(Point2::new(x, y));
            weights.push(w);
        }
        curves.push(NurbsCurve::new(degree, knots, pts, weights)?);
    }
    Ok(curves)
}

/// Write curves in the geometry format; floats use the shortest decimal form
/// that parses back to the identical binary value.
pub fn write_curves(curves: &[NurbsCurve]) -> String {
    let mut out = String::new();
    for c in curves {
        out.push_str(&format!("{}\n", c.degree));
        out.push_str(&format!("{}\n", c.knots.len()));
        let knots: Vec<String> = c.knots.iter().map(|k| format!("{k}")).collect();
        out.push_str(&knots.join(" "));
        out.push('\n');
        out.push_str(&format!("{}\n", c.control_points.len()));
        for (p, w) in c.control_points.iter().zip(&c.weights) {
            out.push_str(&format!("{} {} {}\n", p.x, p.y, w));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quarter_circle() -> NurbsCurve {
        // radius 0.5 centred at (0.5, 0.5), first quadrant
        let w = 0.5f64.sqrt();
        NurbsCurve::new(
            2,
            vec![0.0, 0.0, 0.0, 1.0, 1.0, 1.0],
            vec![
                Point2::new(1.0, 0.5),
                Point2::new(1.0, 1.0),
                Point2::new(0.5, 1.0),
            ],
            vec![1.0, w, 1.0],
        )
        .unwrap()
    }

    fn segment(a: Point2<f64>, b: Point2<f64>) -> NurbsCurve {
        NurbsCurve::new(
            1,
            vec![0.0, 0.0, 1.0, 1.0],
            vec![a, b],
            vec![1.0, 1.0],
        )
        .unwrap()
    }

    #[test]
    fn endpoint_interpolation() {
        let c = quarter_circle();
        let p = c.evaluate(0.0).unwrap();
        assert!((p - Point2::new(1.0, 0.5)).norm() < 1e-15);
        let q = c.evaluate(1.0).unwrap();
        assert!((q - Point2::new(0.5, 1.0)).norm() < 1e-15);
    }

    #[test]
    fn linear_segment_midpoint() {
        let c = segment(Point2::new(0.0, 0.0), Point2::new(1.0, 0.0));
        let p = c.evaluate(0.5).unwrap();
        assert!((p - Point2::new(0.5, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn quarter_circle_on_circle() {
        // independent oracle: closed-form rational Bezier evaluation
        let c = quarter_circle();
        let w = 0.5f64.sqrt();
        let bez = |t: f64| {
            let b = [(1.0 - t) * (1.0 - t), 2.0 * t * (1.0 - t), t * t];
            let ws = [1.0, w, 1.0];
            let px = [1.0, 1.0, 0.5];
            let py = [0.5, 1.0, 1.0];
            let denom: f64 = (0..3).map(|i| b[i] * ws[i]).sum();
            Point2::new(
                (0..3).map(|i| b[i] * ws[i] * px[i]).sum::<f64>() / denom,
                (0..3).map(|i| b[i] * ws[i] * py[i]).sum::<f64>() / denom,
            )
        };
        for t in [0.1, 0.25, 0.5, 0.8] {
            let p = c.evaluate(t).unwrap();
            assert!((p - bez(t)).norm() < 1e-14);
            let r = (p - Point2::new(0.5, 0.5)).norm();
            assert!((r - 0.5).abs() < 1e-14);
        }
    }

    #[test]
    fn derivative_of_line_is_constant() {
        let c = segment(Point2::new(0.0, 0.0), Point2::new(2.0, 0.0));
        for t in [0.0, 0.3, 1.0] {
            let d = c.derivative(t, 1).unwrap();
            assert!((d - Vector2::new(2.0, 0.0)).norm() < 1e-13);
        }
        assert!(c.derivative(0.5, 3).is_err());
    }

    #[test]
    fn circle_tangent_orthogonal_to_radius() {
        let c = NurbsCurve::circle(Point2::new(0.5, 0.5), 0.5);
        for t in [0.05, 0.2, 0.4, 0.63, 0.9] {
            let p = c.evaluate(t).unwrap();
            let d = c.derivative(t, 1).unwrap();
            let radial = p - Point2::new(0.5, 0.5);
            assert!(
                (radial.dot(&d)).abs() < 1e-12,
                "tangent not orthogonal at {t}"
            );
        }
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let c = NurbsCurve::circle(Point2::new(0.0, 0.0), 1.0);
        let h = 1e-6;
        // span midpoints only: the curve is merely C^0 at the repeated knots
        for t in [0.125, 0.375, 0.625, 0.875] {
            let d1 = c.derivative(t, 1).unwrap();
            let fd = (c.evaluate(t + h).unwrap() - c.evaluate(t - h).unwrap()) / (2.0 * h);
            assert!((d1 - fd).norm() < 1e-6 * d1.norm().max(1.0));
            let d2 = c.derivative(t, 2).unwrap();
            let fd2 = (c.derivative(t + h, 1).unwrap() - c.derivative(t - h, 1).unwrap())
                / (2.0 * h);
            assert!((d2 - fd2).norm() < 1e-5 * d2.norm().max(1.0));
        }
    }

    #[test]
    fn partition_of_unity_collapses_to_point() {
        let p = Point2::new(0.7, -0.2);
        let c = NurbsCurve::new(
            2,
            vec![0.0, 0.0, 0.0, 0.4, 1.0, 1.0, 1.0],
            vec![p, p, p, p],
            vec![1.0, 2.0, 0.5, 1.0],
        )
        .unwrap();
        for t in [0.0, 0.1, 0.4, 0.77, 1.0] {
            assert!((c.evaluate(t).unwrap() - p).norm() < 1e-14);
        }
    }

    #[test]
    fn domain_errors_and_clamping() {
        let c = quarter_circle();
        assert!(c.evaluate(-1e-3).is_err());
        assert!(c.evaluate(1.0 + 1e-3).is_err());
        // inside the clamp tolerance: accepted
        assert!(c.evaluate(-0.5e-12).is_ok());
        assert!(c.evaluate(1.0 + 0.5e-12).is_ok());
    }

    #[test]
    fn interior_breakpoints_cases() {
        let c = NurbsCurve::new(
            2,
            vec![0.0, 0.0, 0.0, 0.5, 1.0, 1.0, 1.0],
            vec![
                Point2::new(0.0, 0.0),
                Point2::new(0.5, 0.5),
                Point2::new(1.0, 0.0),
                Point2::new(1.5, 0.0),
            ],
            vec![1.0; 4],
        )
        .unwrap();
        let iv = ParamInterval::new(0, 0.2, 0.9).unwrap();
        assert_eq!(c.interior_breakpoints(&iv), vec![0.5]);
        let iv2 = ParamInterval::new(0, 0.6, 0.9).unwrap();
        assert!(c.interior_breakpoints(&iv2).is_empty());
        // repeated interior knot reported once
        let c2 = NurbsCurve::new(
            2,
            vec![0.0, 0.0, 0.0, 0.5, 0.5, 1.0, 1.0, 1.0],
            vec![
                Point2::new(0.0, 0.0),
                Point2::new(0.3, 0.4),
                Point2::new(0.7, 0.4),
                Point2::new(1.0, 0.0),
                Point2::new(1.5, 0.0),
            ],
            vec![1.0; 5],
        )
        .unwrap();
        let iv3 = ParamInterval::new(0, 0.0, 1.0).unwrap();
        assert_eq!(c2.interior_breakpoints(&iv3), vec![0.5]);
    }

    #[test]
    fn geometry_file_roundtrip_is_exact() {
        let curves = vec![
            NurbsCurve::circle(Point2::new(0.5, 0.5), 0.5),
            quarter_circle(),
        ];
        let text = write_curves(&curves);
        let back = read_curves(&text).unwrap();
        assert_eq!(curves.len(), back.len());
        for (a, b) in curves.iter().zip(&back) {
            assert_eq!(a.degree(), b.degree());
            assert_eq!(a.knots(), b.knots());
            assert_eq!(a.weights(), b.weights());
            assert_eq!(a.control_points(), b.control_points());
        }
    }

    #[test]
    fn invariant_violations_rejected() {
        // bad knot count
        assert!(NurbsCurve::new(
            1,
            vec![0.0, 0.0, 1.0],
            vec![Point2::new(0.0, 0.0), Point2::new(1.0, 0.0)],
            vec![1.0, 1.0]
        )
        .is_err());
        // non-positive weight
        assert!(NurbsCurve::new(
            1,
            vec![0.0, 0.0, 1.0, 1.0],
            vec![Point2::new(0.0, 0.0), Point2::new(1.0, 0.0)],
            vec![1.0, 0.0]
        )
        .is_err());
        // not open
        assert!(NurbsCurve::new(
            2,
            vec![0.0, 0.0, 0.3, 0.5, 1.0, 1.0],
            vec![
                Point2::new(0.0, 0.0),
                Point2::new(1.0, 0.0),
                Point2::new(2.0, 0.0)
            ],
            vec![1.0, 1.0, 1.0]
        )
        .is_err());
    }
}
