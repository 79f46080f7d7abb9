//! Numerical integration rules.
//!
//! Gauss-Legendre rules on the unit segment, Duffy-collapsed tensor rules on
//! the reference triangle, and composite rules on NEFEM rectangles split at
//! interior knots of the boundary curve.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use nalgebra::{DMatrix, Point2};

use crate::error::{Error, Result};

/// 1D rule on the unit segment [0, 1].
#[derive(Debug, Clone)]
pub struct SegmentRule {
    pub points: Vec<f64>,
    pub weights: Vec<f64>,
    /// Exact for polynomials up to this total degree.
    pub exactness: usize,
}

/// 2D rule on the reference triangle {x, y >= 0, x + y <= 1}.
#[derive(Debug, Clone)]
pub struct TriangleRule {
    pub points: Vec<Point2<f64>>,
    pub weights: Vec<f64>,
    pub exactness: usize,
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|i| i as f64).product()
}

/// Nodes and weights of a Gauss-Jacobi rule for the weight
/// (1-x)^alpha (1+x)^beta on [-1, 1], via the Golub-Welsch eigenproblem.
pub fn gauss_jacobi(n: usize, alpha: u32, beta: u32) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let a = alpha as f64;
    let b = beta as f64;
    let mu0 = 2f64.powf(a + b + 1.0) * factorial(alpha as usize) * factorial(beta as usize)
        / factorial(alpha as usize + beta as usize + 1);
    if n == 1 {
        return (vec![(b - a) / (a + b + 2.0)], vec![mu0]);
    }
    let mut jac = DMatrix::<f64>::zeros(n, n);
    for k in 0..n {
        let kf = k as f64;
        let diag = if k == 0 {
            (b - a) / (a + b + 2.0)
        } else {
            (b * b - a * a) / ((2.0 * kf + a + b) * (2.0 * kf + a + b + 2.0))
        };
        jac[(k, k)] = diag;
        if k >= 1 {
            let num = 4.0 * kf * (kf + a) * (kf + b) * (kf + a + b);
            let den = (2.0 * kf + a + b).powi(2)
                * (2.0 * kf + a + b + 1.0)
                * (2.0 * kf + a + b - 1.0);
            let off = (num / den).sqrt();
            jac[(k, k - 1)] = off;
            jac[(k - 1, k)] = off;
        }
    }
    let eig = jac.symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].partial_cmp(&eig.eigenvalues[j]).unwrap());
    let mut pts = Vec::with_capacity(n);
    let mut wts = Vec::with_capacity(n);
    for &i in &order {
        pts.push(eig.eigenvalues[i]);
        let v0 = eig.eigenvectors[(0, i)];
        wts.push(mu0 * v0 * v0);
    }
    (pts, wts)
}

/// Gauss-Legendre rule with `n` points on [0, 1], exact up to degree 2n-1.
pub fn gauss_segment(n: usize) -> Result<Arc<SegmentRule>> {
    if n < 1 || n > 64 {
        return Err(Error::Argument(format!(
            "gauss_segment: point count {n} outside 1..=64"
        )));
    }
    static CACHE: OnceLock<Mutex<HashMap<usize, Arc<SegmentRule>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let mut guard = cache.lock().unwrap();
    if let Some(rule) = guard.get(&n) {
        return Ok(rule.clone());
    }
    let (p, w) = gauss_jacobi(n, 0, 0);
    let rule = Arc::new(SegmentRule {
        points: p.iter().map(|x| 0.5 * (x + 1.0)).collect(),
        weights: w.iter().map(|w| 0.5 * w).collect(),
        exactness: 2 * n - 1,
    });
    guard.insert(n, rule.clone());
    Ok(rule)
}

/// Symmetric-free tensor rule on the reference triangle, exact for all
/// monomials of total degree <= `degree`.
///
/// Built by collapsing a Gauss-Legendre x Gauss-Jacobi(1,0) product through
/// the Duffy map (u, v) -> (u(1-v), v), so the (1-v) Jacobian is absorbed by
/// the Jacobi weight and arbitrary exactness is available without rule tables.
pub fn triangle_rule(degree: usize) -> Result<Arc<TriangleRule>> {
    if degree > 200 {
        return Err(Error::Argument(format!(
            "triangle_rule: requested exactness {degree} too large"
        )));
    }
    static CACHE: OnceLock<Mutex<HashMap<usize, Arc<TriangleRule>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let mut guard = cache.lock().unwrap();
    if let Some(rule) = guard.get(&degree) {
        return Ok(rule.clone());
    }
    let n = degree / 2 + 1;
    let gl = gauss_segment(n)?;
    let (gj_pts, gj_wts) = gauss_jacobi(n, 1, 0);
    let mut points = Vec::with_capacity(n * n);
    let mut weights = Vec::with_capacity(n * n);
    for (v_raw, wv) in gj_pts.iter().zip(&gj_wts) {
        let v = 0.5 * (v_raw + 1.0);
        for (u, wu) in gl.points.iter().zip(&gl.weights) {
            points.push(Point2::new(u * (1.0 - v), v));
            weights.push(wu * wv / 4.0);
        }
    }
    for w in &weights {
        if *w <= 0.0 {
            return Err(Error::Argument("triangle_rule produced non-positive weight".into()));
        }
    }
    let rule = Arc::new(TriangleRule {
        points,
        weights,
        exactness: degree,
    });
    guard.insert(degree, rule.clone());
    Ok(rule)
}

/// Closed-form integral of x^a y^b over the reference triangle.
pub fn triangle_monomial_integral(a: usize, b: usize) -> f64 {
    factorial(a) * factorial(b) / factorial(a + b + 2)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_one_point_is_midpoint() {
        let r = gauss_segment(1).unwrap();
        assert!((r.points[0] - 0.5).abs() < 1e-15);
        assert!((r.weights[0] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn gauss_two_points_match_moment_equations() {
        // Independent oracle: solve the moment equations for a symmetric
        // 2-point rule on [0,1]: points 1/2 +- d with w = 1/2 each, and
        // int x^2 = 1/3 forces d = 1/(2 sqrt(3)).
        let d = 1.0 / (2.0 * 3f64.sqrt());
        let r = gauss_segment(2).unwrap();
        assert!((r.points[0] - (0.5 - d)).abs() < 1e-14);
        assert!((r.points[1] - (0.5 + d)).abs() < 1e-14);
        assert!((r.weights[0] - 0.5).abs() < 1e-14);
    }

    #[test]
    fn gauss_cubic_exact() {
        let r = gauss_segment(2).unwrap();
        let integral: f64 = r
            .points
            .iter()
            .zip(&r.weights)
            .map(|(x, w)| w * x.powi(3))
            .sum();
        assert!((integral - 0.25).abs() < 1e-15);
    }

    #[test]
    fn gauss_degree_bounds() {
        assert!(gauss_segment(0).is_err());
        assert!(gauss_segment(65).is_err());
        for n in [5, 12, 33, 64] {
            let r = gauss_segment(n).unwrap();
            let sum: f64 = r.weights.iter().sum();
            assert!((sum - 1.0).abs() < 1e-13, "n={n} weight sum {sum}");
            // highest exact monomial
            let d = 2 * n - 1;
            let num: f64 = r
                .points
                .iter()
                .zip(&r.weights)
                .map(|(x, w)| w * x.powi(d as i32))
                .sum();
            let exact = 1.0 / (d as f64 + 1.0);
            assert!((num - exact).abs() < 1e-12 * exact.abs().max(1.0));
        }
    }

    #[test]
    fn triangle_rule_area() {
        let r = triangle_rule(0).unwrap();
        let sum: f64 = r.weights.iter().sum();
        assert!((sum - 0.5).abs() < 1e-15);
    }

    #[test]
    fn triangle_rule_monomials_vs_factorial_formula() {
        for d in [1usize, 3, 7, 12, 18] {
            let r = triangle_rule(d).unwrap();
            for a in 0..=d {
                for b in 0..=(d - a) {
                    let num: f64 = r
                        .points
                        .iter()
                        .zip(&r.weights)
                        .map(|(p, w)| w * p.x.powi(a as i32) * p.y.powi(b as i32))
                        .sum();
                    let exact = triangle_monomial_integral(a, b);
                    assert!(
                        (num - exact).abs() < 1e-14,
                        "d={d} a={a} b={b}: {num} vs {exact}"
                    );
                }
            }
        }
    }

    #[test]
    fn triangle_rule_symmetry_of_exact_integrals() {
        let r = triangle_rule(4).unwrap();
        let ix: f64 = r.points.iter().zip(&r.weights).map(|(p, w)| w * p.x).sum();
        let iy: f64 = r.points.iter().zip(&r.weights).map(|(p, w)| w * p.y).sum();
        assert!((ix - iy).abs() < 1e-15);
        assert!((ix - 1.0 / 6.0).abs() < 1e-15);
    }

    #[test]
    fn triangle_rule_points_inside() {
        let r = triangle_rule(15).unwrap();
        for p in &r.points {
            assert!(p.x >= 0.0 && p.y >= 0.0 && p.x + p.y <= 1.0 + 1e-14);
        }
        assert!(r.weights.iter().all(|w| *w > 0.0));
    }
}
