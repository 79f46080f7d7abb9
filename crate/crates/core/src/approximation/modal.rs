//! Orthonormal modal polynomial families used to condition Vandermonde
//! systems: Jacobi polynomials on [-1,1] and the collapsed-coordinate
//! (Koornwinder) basis on the reference triangle.

use nalgebra::Point2;

/// Classical Jacobi polynomials P_n^{(alpha,beta)} evaluated at `x`,
/// all degrees 0..=nmax.
pub fn jacobi_all(nmax: usize, alpha: f64, beta: f64, x: f64) -> Vec<f64> {
    let mut p = Vec::with_capacity(nmax + 1);
    p.push(1.0);
    if nmax == 0 {
        return p;
    }
    p.push(0.5 * (alpha - beta + (alpha + beta + 2.0) * x));
    for n in 2..=nmax {
        let nf = n as f64;
        let c = 2.0 * nf + alpha + beta;
        let a1 = 2.0 * nf * (nf + alpha + beta) * (c - 2.0);
        let a2 = (c - 1.0) * (alpha * alpha - beta * beta);
        let a3 = (c - 2.0) * (c - 1.0) * c;
        let a4 = 2.0 * (nf + alpha - 1.0) * (nf + beta - 1.0) * c;
        p.push(((a2 + a3 * x) * p[n - 1] - a4 * p[n - 2]) / a1);
    }
    p
}

/// L2 norm squared of P_n^{(alpha,beta)} under the Jacobi weight
/// (1-x)^alpha (1+x)^beta on [-1,1]; integer exponents only.
fn jacobi_norm_sq(n: usize, alpha: usize, beta: usize) -> f64 {
    fn gamma_int(k: usize) -> f64 {
        // Gamma(k) for integer k >= 1
        (1..k).map(|i| i as f64).product()
    }
    let a = alpha as f64;
    let b = beta as f64;
    let nf = n as f64;
    2f64.powf(a + b + 1.0) / (2.0 * nf + a + b + 1.0) * gamma_int(n + alpha + 1)
        * gamma_int(n + beta + 1)
        / (gamma_int(n + alpha + beta + 1) * gamma_int(n + 1))
}

/// Orthonormalized Jacobi values p_0..p_nmax at `x`.
pub fn jacobi_orthonormal_all(nmax: usize, alpha: usize, beta: usize, x: f64) -> Vec<f64> {
    let mut v = jacobi_all(nmax, alpha as f64, beta as f64, x);
    for (n, value) in v.iter_mut().enumerate() {
        *value /= jacobi_norm_sq(n, alpha, beta).sqrt();
    }
    v
}

/// Derivatives of the orthonormalized Jacobi polynomials at `x`.
///
/// Uses d/dx P_n^{(a,b)} = (n+a+b+1)/2 P_{n-1}^{(a+1,b+1)} with the norm
/// ratio computed numerically, so no closed-form scaling is assumed.
pub fn jacobi_orthonormal_deriv_all(nmax: usize, alpha: usize, beta: usize, x: f64) -> Vec<f64> {
    let mut d = vec![0.0; nmax + 1];
    if nmax == 0 {
        return d;
    }
    let shifted = jacobi_all(nmax - 1, alpha as f64 + 1.0, beta as f64 + 1.0, x);
    for n in 1..=nmax {
        let factor = (n as f64 + alpha as f64 + beta as f64 + 1.0) / 2.0;
        d[n] = factor * shifted[n - 1] / jacobi_norm_sq(n, alpha, beta).sqrt();
    }
    d
}

/// Number of modes of total degree <= k in 2D.
pub fn mode_count(k: usize) -> usize {
    (k + 1) * (k + 2) / 2
}

/// Evaluation of the orthogonal triangle basis and its gradients at a point
/// of the reference triangle {(x, y): x, y >= 0, x + y <= 1}.
///
/// Mode ordering: (i, j) with i = 0..=k outer, j = 0..=k-i inner.
pub fn koornwinder_eval(k: usize, pt: Point2<f64>) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let nm = mode_count(k);
    let mut val = Vec::with_capacity(nm);
    let mut dx = Vec::with_capacity(nm);
    let mut dy = Vec::with_capacity(nm);

    // collapsed coordinates on the (-1,-1)-(1,-1)-(-1,1) triangle
    let r = 2.0 * pt.x - 1.0;
    let s = 2.0 * pt.y - 1.0;
    let a = if (1.0 - s).abs() < 1e-14 {
        -1.0
    } else {
        2.0 * (1.0 + r) / (1.0 - s) - 1.0
    };
    let b = s;
    let hb = 0.5 * (1.0 - b);

    let fa_all = jacobi_orthonormal_all(k, 0, 0, a);
    let dfa_all = jacobi_orthonormal_deriv_all(k, 0, 0, a);
    for i in 0..=k {
        let gb_all = jacobi_orthonormal_all(k - i, 2 * i + 1, 0, b);
        let dgb_all = jacobi_orthonormal_deriv_all(k - i, 2 * i + 1, 0, b);
        let fa = fa_all[i];
        let dfa = dfa_all[i];
        let scale = 2f64.powf(i as f64 + 0.5);
        let hb_i = hb.powi(i as i32);
        let hb_im1 = if i > 0 { hb.powi(i as i32 - 1) } else { 0.0 };
        for j in 0..=(k - i) {
            let gb = gb_all[j];
            let dgb = dgb_all[j];
            val.push(scale * fa * gb * hb_i);
            let mut dmodedr = dfa * gb;
            if i > 0 {
                dmodedr *= hb_im1;
            }
            let mut dmodeds = dfa * gb * 0.5 * (1.0 + a);
            if i > 0 {
                dmodeds *= hb_im1;
            }
            let mut tmp = dgb * hb_i;
            if i > 0 {
                tmp -= 0.5 * i as f64 * gb * hb_im1;
            }
            dmodeds += fa * tmp;
            // chain rule through (r, s) = (2x-1, 2y-1)
            dx.push(2.0 * scale * dmodedr);
            dy.push(2.0 * scale * dmodeds);
        }
    }
    (val, dx, dy)
}

/// Orthonormal Legendre values and derivatives on the unit segment [0, 1],
/// degrees 0..=k, evaluated at `s`.
pub fn legendre01_eval(k: usize, s: f64) -> (Vec<f64>, Vec<f64>) {
    let x = 2.0 * s - 1.0;
    let v = jacobi_orthonormal_all(k, 0, 0, x);
    let d: Vec<f64> = jacobi_orthonormal_deriv_all(k, 0, 0, x)
        .iter()
        .map(|d| 2.0 * d)
        .collect();
    (v, d)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::triangle_rule;

    #[test]
    fn jacobi_values_match_known() {
        // P_2^{0,0}(x) = (3x^2 - 1)/2
        let v = jacobi_all(2, 0.0, 0.0, 0.3);
        assert!((v[2] - 0.5 * (3.0 * 0.09 - 1.0)).abs() < 1e-15);
        // P_1^{1,0}(x) = (1 - 1 + ... ) = 0.5*(1 - 0 + 3x) = (3x+1)/2
        let v = jacobi_all(1, 1.0, 0.0, 0.4);
        assert!((v[1] - 0.5 * (1.0 + 3.0 * 0.4)).abs() < 1e-15);
    }

    #[test]
    fn koornwinder_orthonormal_up_to_scale() {
        // The basis must be orthogonal on the triangle with a common scale.
        let k = 4;
        let rule = triangle_rule(2 * k + 2).unwrap();
        let nm = mode_count(k);
        let mut gram = vec![vec![0.0; nm]; nm];
        for (p, w) in rule.points.iter().zip(&rule.weights) {
            let (v, _, _) = koornwinder_eval(k, *p);
            for i in 0..nm {
                for j in 0..nm {
                    gram[i][j] += w * v[i] * v[j];
                }
            }
        }
        let scale = gram[0][0];
        for i in 0..nm {
            for j in 0..nm {
                let expect = if i == j { scale } else { 0.0 };
                assert!(
                    (gram[i][j] - expect).abs() < 1e-12,
                    "gram[{i}][{j}] = {}",
                    gram[i][j]
                );
            }
        }
    }

    #[test]
    fn koornwinder_gradients_match_finite_differences() {
        let k = 5;
        let h = 1e-6;
        for pt in [
            Point2::new(0.2, 0.3),
            Point2::new(0.05, 0.7),
            Point2::new(0.6, 0.1),
        ] {
            let (_, dx, dy) = koornwinder_eval(k, pt);
            let (vxp, _, _) = koornwinder_eval(k, Point2::new(pt.x + h, pt.y));
            let (vxm, _, _) = koornwinder_eval(k, Point2::new(pt.x - h, pt.y));
            let (vyp, _, _) = koornwinder_eval(k, Point2::new(pt.x, pt.y + h));
            let (vym, _, _) = koornwinder_eval(k, Point2::new(pt.x, pt.y - h));
            for m in 0..mode_count(k) {
                let fdx = (vxp[m] - vxm[m]) / (2.0 * h);
                let fdy = (vyp[m] - vym[m]) / (2.0 * h);
                assert!((dx[m] - fdx).abs() < 1e-5 * (1.0 + dx[m].abs()));
                assert!((dy[m] - fdy).abs() < 1e-5 * (1.0 + dy[m].abs()));
            }
        }
    }
}
