//! Superconvergent postprocessing, the elemental error estimate, the
//! Richardson degree update and the adaptive driver loop.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::solver::{DegreeMap, ElementGeometry, StokesSolver};

/// Targets and bounds of the degree-adaptive process.
#[derive(Debug, Clone)]
pub struct AdaptConfig {
    /// desired elemental accuracy
    pub eps: f64,
    pub max_iterations: usize,
    pub k_min: usize,
    pub k_max: usize,
}

impl AdaptConfig {
    pub fn new(eps: f64) -> Self {
        Self {
            eps,
            max_iterations: 10,
            k_min: 1,
            k_max: 8,
        }
    }
}

/// Largest degree decrease applied in one iteration; increases follow the
/// Richardson prediction unclamped (up to k_max).
pub const MAX_DECREASE_PER_ITERATION: i64 = 1;

/// One iteration record of the adaptive loop.
#[derive(Debug, Clone)]
pub struct AdaptIteration {
    pub degrees: Vec<usize>,
    pub estimated: Vec<f64>,
    pub exact: Option<Vec<f64>>,
    pub delta_k: Vec<i64>,
    pub dofs: usize,
}

impl AdaptIteration {
    pub fn max_estimated(&self) -> f64 {
        self.estimated.iter().cloned().fold(0.0, f64::max)
    }

    pub fn max_exact(&self) -> Option<f64> {
        self.exact
            .as_ref()
            .map(|v| v.iter().cloned().fold(0.0, f64::max))
    }
}

#[derive(Debug, Clone)]
pub struct AdaptReport {
    pub iterations: Vec<AdaptIteration>,
    pub converged: bool,
    pub eps: f64,
}

impl AdaptReport {
    pub fn final_degrees(&self) -> &[usize] {
        &self.iterations.last().expect("at least one iteration").degrees
    }
}

/// Postprocessed element solution and the tables used to build it.
#[derive(Debug)]
pub struct PostprocessResult {
    /// nodal values of the degree-(k+1) reconstruction, n1 x 2
    pub ustar: DMatrix<f64>,
    pub vol_hi: crate::solver::VolTables,
    /// degree-k basis tabulated at the k+1 quadrature
    pub lo_at_hi: crate::approximation::BasisEval,
    pub estimated: f64,
}

/// Solve the element-local reconstruction: find ustar of degree k+1 with
/// (grad ustar, grad v) = -(L, grad v) for all v and elemental mean matching
/// u, then evaluate the normalized error measure against u.
pub fn postprocess_and_estimate(
    geom: &ElementGeometry,
    k: usize,
    u_nodal: &DMatrix<f64>,
    l_nodal: &DMatrix<f64>,
    extra: usize,
) -> Result<PostprocessResult> {
    let vol_hi = geom.volume_tables(k + 1, extra)?;
    let lo_at_hi = geom.basis_at(k, &vol_hi.gen_pts)?;
    let n1 = vol_hi.n_en;
    let n0 = u_nodal.nrows();
    let nq = vol_hi.qp.len();

    // stiffness and mean row of the degree-(k+1) space
    let mut stiff = DMatrix::<f64>::zeros(n1 + 1, n1 + 1);
    for q in 0..nq {
        let w = vol_hi.qw[q];
        for i in 0..n1 {
            stiff[(i, n1)] += w * vol_hi.val[(q, i)];
            for j in 0..n1 {
                stiff[(i, j)] +=
                    w * (vol_hi.gx[(q, i)] * vol_hi.gx[(q, j)] + vol_hi.gy[(q, i)] * vol_hi.gy[(q, j)]);
            }
        }
    }
    for j in 0..n1 {
        stiff[(n1, j)] = stiff[(j, n1)];
    }

    // right-hand sides per velocity component
    let mut rhs = DMatrix::<f64>::zeros(n1 + 1, 2);
    for q in 0..nq {
        let w = vol_hi.qw[q];
        // L and u at the quadrature point from the degree-k nodal values
        let mut lq = [0.0f64; 4];
        let mut uq = [0.0f64; 2];
        for j in 0..n0 {
            let v = lo_at_hi.val[(q, j)];
            for c in 0..4 {
                lq[c] += v * l_nodal[(j, c)];
            }
            for c in 0..2 {
                uq[c] += v * u_nodal[(j, c)];
            }
        }
        for a in 0..2 {
            for i in 0..n1 {
                rhs[(i, a)] -=
                    w * (lq[2 * a] * vol_hi.gx[(q, i)] + lq[2 * a + 1] * vol_hi.gy[(q, i)]);
            }
            rhs[(n1, a)] += w * uq[a];
        }
    }

    let lu = stiff.lu();
    let sol = lu
        .solve(&rhs)
        .ok_or_else(|| Error::ElementDegeneracy("singular postprocessing system".into()))?;
    let ustar = sol.rows(0, n1).into_owned();

    let estimated = estimate_error(&vol_hi, &lo_at_hi, &ustar, u_nodal);
    Ok(PostprocessResult {
        ustar,
        vol_hi,
        lo_at_hi,
        estimated,
    })
}

/// Normalized elemental error measure between the reconstruction and the
/// solution: sqrt( (1/|Omega_e|) int (ustar - u) . (ustar - u) ).
pub fn estimate_error(
    vol_hi: &crate::solver::VolTables,
    lo_at_hi: &crate::approximation::BasisEval,
    ustar: &DMatrix<f64>,
    u_nodal: &DMatrix<f64>,
) -> f64 {
    let nq = vol_hi.qp.len();
    let n1 = vol_hi.n_en;
    let n0 = u_nodal.nrows();
    let mut acc = 0.0;
    for q in 0..nq {
        let mut diff = [0.0f64; 2];
        for a in 0..2 {
            let mut hi = 0.0;
            for i in 0..n1 {
                hi += vol_hi.val[(q, i)] * ustar[(i, a)];
            }
            let mut lo = 0.0;
            for j in 0..n0 {
                lo += lo_at_hi.val[(q, j)] * u_nodal[(j, a)];
            }
            diff[a] = hi - lo;
        }
        acc += vol_hi.qw[q] * (diff[0] * diff[0] + diff[1] * diff[1]);
    }
    (acc / vol_hi.area).sqrt()
}

/// Richardson degree update: ceil( log(eps / err) / log(h) ). A vanishing
/// error maps to the maximal allowed decrease (the formula is singular
/// there); h must be normalized below one.
pub fn degree_increment(estimated: f64, eps: f64, h: f64) -> Result<i64> {
    if !(eps > 0.0) {
        return Err(Error::Argument("desired accuracy must be positive".into()));
    }
    if !(h > 0.0 && h < 1.0) {
        return Err(Error::Argument(format!(
            "normalized element size must lie in (0, 1), got {h}"
        )));
    }
    if estimated == 0.0 {
        return Ok(-MAX_DECREASE_PER_ITERATION);
    }
    let ratio = (eps / estimated).ln() / h.ln();
    // snap near-integers so exact log ratios are not tipped by roundoff
    let rounded = ratio.round();
    let dk = if (ratio - rounded).abs() <= 1e-9 * ratio.abs().max(1.0) {
        rounded
    } else {
        ratio.ceil()
    };
    Ok(dk as i64)
}

/// Exact elemental error in the same normalized norm as the estimate,
/// measured against an analytic velocity field.
pub fn exact_error(
    vol_hi: &crate::solver::VolTables,
    lo_at_hi: &crate::approximation::BasisEval,
    u_nodal: &DMatrix<f64>,
    velocity: &dyn Fn(nalgebra::Point2<f64>) -> nalgebra::Vector2<f64>,
) -> f64 {
    let nq = vol_hi.qp.len();
    let n0 = u_nodal.nrows();
    let mut acc = 0.0;
    for q in 0..nq {
        let ue = velocity(vol_hi.qp[q]);
        let ue = [ue.x, ue.y];
        let mut d2 = 0.0;
        for a in 0..2 {
            let mut lo = 0.0;
            for j in 0..n0 {
                lo += lo_at_hi.val[(q, j)] * u_nodal[(j, a)];
            }
            let d = lo - ue[a];
            d2 += d * d;
        }
        acc += vol_hi.qw[q] * d2;
    }
    (acc / vol_hi.area).sqrt()
}

/// Run solve -> postprocess -> estimate -> degree update until every
/// elemental estimate drops below eps or the iteration cap is reached.
/// Exact errors are tracked when an analytic velocity is supplied.
pub fn adapt_loop(
    solver: &mut StokesSolver,
    adapt: &AdaptConfig,
    initial: Option<DegreeMap>,
    exact_velocity: Option<&(dyn Fn(nalgebra::Point2<f64>) -> nalgebra::Vector2<f64> + Sync)>,
) -> Result<AdaptReport> {
    let ne = solver.mesh.n_elements();
    let mut degrees = initial.unwrap_or_else(|| DegreeMap::uniform(ne, adapt.k_min.max(1)));
    let h: Vec<f64> = (0..ne)
        .map(|e| solver.mesh.element_size(e))
        .collect::<Result<_>>()?;

    let mut iterations = Vec::new();
    let mut converged = false;
    for _iter in 0..adapt.max_iterations {
        let out = solver.solve(&degrees)?;
        let mut estimated = Vec::with_capacity(ne);
        let mut exact = exact_velocity.map(|_| Vec::with_capacity(ne));
        for e in 0..ne {
            let pr = postprocess_and_estimate(
                &solver.backend.elems[e],
                degrees.k[e],
                &out.solution.u[e],
                &out.solution.l[e],
                solver.config.quad_extra,
            )?;
            estimated.push(pr.estimated);
            if let (Some(exact_vec), Some(vel)) = (exact.as_mut(), exact_velocity) {
                exact_vec.push(exact_error(
                    &pr.vol_hi,
                    &pr.lo_at_hi,
                    &out.solution.u[e],
                    &|x| vel(x),
                ));
            }
        }

        let mut delta_k = Vec::with_capacity(ne);
        for e in 0..ne {
            let dk = degree_increment(estimated[e], adapt.eps, h[e])?
                .max(-MAX_DECREASE_PER_ITERATION);
            delta_k.push(dk);
        }

        let max_est = estimated.iter().cloned().fold(0.0, f64::max);
        iterations.push(AdaptIteration {
            degrees: degrees.k.clone(),
            estimated,
            exact,
            delta_k: delta_k.clone(),
            dofs: out.solution.dofs,
        });

        if max_est <= adapt.eps {
            converged = true;
            break;
        }

        for e in 0..ne {
            let knew = (degrees.k[e] as i64 + delta_k[e])
                .clamp(adapt.k_min as i64, adapt.k_max as i64);
            degrees.k[e] = knew as usize;
        }
    }

    Ok(AdaptReport {
        iterations,
        converged,
        eps: adapt.eps,
    })
}
