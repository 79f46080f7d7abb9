//! Per-element HDG local systems for Stokes: the mixed (L, u, p) blocks with
//! the boundary-mean pressure constraint, the trace couplings, the element's
//! flux-continuity and mass-conservation rows, and static condensation.
//!
//! Unknown layout per element, n = number of element nodes:
//!   L  components c = 2a + b (row a, column b of -grad u), c*n + i
//!   u  components a, 4n + a*n + i
//!   p  6n + i
//!   zeta (multiplier of the boundary-mean constraint) at 7n.
//!
//! Trace layout per non-Dirichlet edge: x-components then y-components of the
//! face's trace nodes, faces in local edge order.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::mesh::TriMesh;
use crate::solver::discretization::Discretization;
use crate::solver::{BoundaryPoint, ProblemSpec};

#[derive(Debug, Clone)]
pub struct LocalSystem {
    pub n_en: usize,
    pub k: usize,
    /// full local matrix over (L, u, p, zeta)
    pub a: DMatrix<f64>,
    /// data right-hand side (source + Dirichlet terms)
    pub f: DVector<f64>,
    /// coupling to the element's trace unknowns: A x = f + b_trace * uhat + e_zeta * rho
    pub b_trace: DMatrix<f64>,
    /// flux-continuity rows of this element (one per trace dof)
    pub flux_rows: DMatrix<f64>,
    /// direct trace block of the flux rows (-tau * face mass)
    pub flux_trace: DMatrix<f64>,
    /// Neumann load of the flux rows
    pub flux_load: DVector<f64>,
    /// mass-conservation row over the trace dofs
    pub cons_row: DVector<f64>,
    pub cons_rhs: f64,
    /// (local edge, face id, first local trace dof, trace node count)
    pub edge_dofs: Vec<(usize, usize, usize, usize)>,
}

/// Condensed element: the Schur complement onto (uhat, rho) plus the maps
/// recovering the interior unknowns.
#[derive(Debug, Clone)]
pub struct CondensedElement {
    /// (n_tr + 1) x (n_tr + 1) elemental matrix over [uhat; rho]
    pub k_mat: DMatrix<f64>,
    pub rhs: DVector<f64>,
    /// x = recover_const + recover_trace * uhat + recover_rho * rho
    pub recover_const: DVector<f64>,
    pub recover_trace: DMatrix<f64>,
    pub recover_rho: DVector<f64>,
    pub edge_dofs: Vec<(usize, usize, usize, usize)>,
    pub n_tr: usize,
}

pub fn assemble_local(
    mesh: &TriMesh,
    disc: &Discretization,
    e: usize,
    spec: &ProblemSpec,
    tau: f64,
) -> Result<LocalSystem> {
    let ed = &disc.elems[e];
    let vol = &ed.vol;
    let n = vol.n_en;
    let k = vol.k;
    let nu = spec.viscosity;
    let nq = vol.qp.len();

    // volume blocks
    let mut mass = DMatrix::<f64>::zeros(n, n);
    let mut cx = DMatrix::<f64>::zeros(n, n);
    let mut cy = DMatrix::<f64>::zeros(n, n);
    let mut f_s = [DVector::<f64>::zeros(n), DVector::<f64>::zeros(n)];
    for q in 0..nq {
        let w = vol.qw[q];
        let s = (spec.body_force)(vol.qp[q]);
        for i in 0..n {
            let vi = vol.val[(q, i)];
            f_s[0][i] += w * vi * s.x;
            f_s[1][i] += w * vi * s.y;
            for j in 0..n {
                let vj = vol.val[(q, j)];
                mass[(i, j)] += w * vi * vj;
                cx[(i, j)] += w * vol.gx[(q, i)] * vj;
                cy[(i, j)] += w * vol.gy[(q, i)] * vj;
            }
        }
    }
    let c_mats = [&cx, &cy];

    // trace dof layout over non-Dirichlet edges
    let mut edge_dofs = Vec::new();
    let mut n_tr = 0usize;
    for ledge in 0..3 {
        let fid = mesh.elem_faces[e][ledge];
        if mesh.faces[fid].is_dirichlet() {
            continue;
        }
        let nt = disc.faces[fid].n_trace();
        edge_dofs.push((ledge, fid, n_tr, nt));
        n_tr += 2 * nt;
    }

    let dim = 7 * n + 1;
    let mut a = DMatrix::<f64>::zeros(dim, dim);
    let mut f = DVector::<f64>::zeros(dim);
    let mut b_trace = DMatrix::<f64>::zeros(dim, n_tr);
    let mut flux_rows = DMatrix::<f64>::zeros(n_tr, dim);
    let mut flux_trace = DMatrix::<f64>::zeros(n_tr, n_tr);
    let mut flux_load = DVector::<f64>::zeros(n_tr);
    let mut cons_row = DVector::<f64>::zeros(n_tr);
    let mut cons_rhs = 0.0;

    let idx_l = |c: usize, i: usize| c * n + i;
    let idx_u = |comp: usize, i: usize| 4 * n + comp * n + i;
    let idx_p = |i: usize| 6 * n + i;
    let idx_z = 7 * n;

    // volume terms
    for a_comp in 0..2 {
        for b_comp in 0..2 {
            let c = 2 * a_comp + b_comp;
            for i in 0..n {
                for j in 0..n {
                    // (G, L) block
                    a[(idx_l(c, i), idx_l(c, j))] += mass[(i, j)];
                    // -(div G, u)
                    a[(idx_l(c, i), idx_u(a_comp, j))] -= c_mats[b_comp][(i, j)];
                    // -(grad v, nu L)
                    a[(idx_u(a_comp, i), idx_l(c, j))] -= nu * c_mats[b_comp][(i, j)];
                }
            }
        }
        for i in 0..n {
            f[idx_u(a_comp, i)] += f_s[a_comp][i];
            for j in 0..n {
                // -(div v, p) and (grad w, u)
                a[(idx_u(a_comp, i), idx_p(j))] -= c_mats[a_comp][(i, j)];
                a[(idx_p(i), idx_u(a_comp, j))] += c_mats[a_comp][(i, j)];
            }
        }
    }

    // boundary terms, edge by edge
    for ledge in 0..3 {
        let fid = mesh.elem_faces[e][ledge];
        let fd = &disc.faces[fid];
        let ef = &ed.faces[ledge];
        let face = &mesh.faces[fid];
        let nqf = fd.qp.len();
        let is_dirichlet = face.is_dirichlet();
        let is_neumann = face.is_neumann();
        let trace_slot = edge_dofs.iter().find(|(le, ..)| *le == ledge).copied();

        for q in 0..nqf {
            let w = fd.qw[q];
            let nrm = ef.normals[q];
            let nb = [nrm.x, nrm.y];

            // element-element boundary blocks
            for i in 0..n {
                let vi = ef.val[(q, i)];
                // boundary pressure mean functional
                a[(idx_p(i), idx_z)] += w * vi;
                a[(idx_z, idx_p(i))] += w * vi;
                for j in 0..n {
                    let vj = ef.val[(q, j)];
                    for a_comp in 0..2 {
                        // + tau <v, u>
                        a[(idx_u(a_comp, i), idx_u(a_comp, j))] += tau * w * vi * vj;
                        for b_comp in 0..2 {
                            // + nu <v, (L n)_a>
                            a[(idx_u(a_comp, i), idx_l(2 * a_comp + b_comp, j))] +=
                                nu * w * vi * nb[b_comp] * vj;
                        }
                        // + <v, p n>
                        a[(idx_u(a_comp, i), idx_p(j))] += w * vi * nb[a_comp] * vj;
                    }
                }
            }

            if is_dirichlet {
                let bp = BoundaryPoint {
                    x: fd.qp[q],
                    normal: nrm,
                    curve: fd
                        .lambda
                        .as_ref()
                        .map(|lam| (fd.curve_id.unwrap_or(0), lam[q])),
                };
                let ud = (spec.dirichlet)(&bp);
                let ud_arr = [ud.x, ud.y];
                let ud_n = ud.dot(&nrm);
                cons_rhs -= w * ud_n;
                for i in 0..n {
                    let vi = ef.val[(q, i)];
                    for a_comp in 0..2 {
                        for b_comp in 0..2 {
                            // f_L: -<n.G, u_D>
                            f[idx_l(2 * a_comp + b_comp, i)] -= w * vi * nb[b_comp] * ud_arr[a_comp];
                        }
                        // f_u: + tau <v, u_D>
                        f[idx_u(a_comp, i)] += tau * w * vi * ud_arr[a_comp];
                    }
                    // f_p: <w, u_D . n>
                    f[idx_p(i)] += w * vi * ud_n;
                }
            }

            if let Some((_, _, base, nt)) = trace_slot {
                let neumann_t = if is_neumann {
                    let bp = BoundaryPoint {
                        x: fd.qp[q],
                        normal: nrm,
                        curve: fd
                            .lambda
                            .as_ref()
                            .map(|lam| (fd.curve_id.unwrap_or(0), lam[q])),
                    };
                    Some((spec.neumann)(&bp))
                } else {
                    None
                };
                for m in 0..nt {
                    let tm = fd.trace_val[(q, m)];
                    for a_comp in 0..2 {
                        let col = base + a_comp * nt + m;
                        cons_row[col] += w * tm * nb[a_comp];
                        if let Some(t) = neumann_t {
                            let t_arr = [t.x, t.y];
                            flux_load[col] -= w * tm * t_arr[a_comp];
                        }
                        for i in 0..n {
                            let vi = ef.val[(q, i)];
                            // element couplings to uhat
                            for b_comp in 0..2 {
                                b_trace[(idx_l(2 * a_comp + b_comp, i), col)] -=
                                    w * vi * nb[b_comp] * tm;
                                flux_rows[(col, idx_l(2 * a_comp + b_comp, i))] +=
                                    nu * w * tm * nb[b_comp] * vi;
                            }
                            b_trace[(idx_u(a_comp, i), col)] += tau * w * vi * tm;
                            b_trace[(idx_p(i), col)] += w * vi * nb[a_comp] * tm;
                            flux_rows[(col, idx_u(a_comp, i))] += tau * w * tm * vi;
                            flux_rows[(col, idx_p(i))] += w * tm * nb[a_comp] * vi;
                        }
                        // -tau <mu, uhat>
                        for m2 in 0..nt {
                            let col2 = base + a_comp * nt + m2;
                            flux_trace[(col, col2)] -= tau * w * tm * fd.trace_val[(q, m2)];
                        }
                    }
                }
            }
        }
    }

    Ok(LocalSystem {
        n_en: n,
        k,
        a,
        f,
        b_trace,
        flux_rows,
        flux_trace,
        flux_load,
        cons_row,
        cons_rhs,
        edge_dofs,
    })
}

/// Eliminate (L, u, p, zeta) in favour of the element's trace unknowns and
/// mean pressure, keeping the recovery maps for back-substitution.
pub fn condense(local: &LocalSystem) -> Result<CondensedElement> {
    let dim = 7 * local.n_en + 1;
    let n_tr = local.b_trace.ncols();
    let lu = local.a.clone().lu();

    // multi-RHS solve: [f | B | e_zeta]
    let mut rhs = DMatrix::<f64>::zeros(dim, 1 + n_tr + 1);
    rhs.column_mut(0).copy_from(&local.f);
    rhs.view_mut((0, 1), (dim, n_tr)).copy_from(&local.b_trace);
    rhs[(dim - 1, 1 + n_tr)] = 1.0; // rho enters through the constraint row
    let solved = lu.solve(&rhs).ok_or_else(|| {
        Error::ElementDegeneracy(format!(
            "singular local system (k = {}, n = {})",
            local.k, local.n_en
        ))
    })?;

    let recover_const = DVector::from(solved.column(0).into_owned());
    let recover_trace = solved.view((0, 1), (dim, n_tr)).into_owned();
    let recover_rho = DVector::from(solved.column(1 + n_tr).into_owned());

    let mut k_mat = DMatrix::<f64>::zeros(n_tr + 1, n_tr + 1);
    let mut rhs_out = DVector::<f64>::zeros(n_tr + 1);
    if n_tr > 0 {
        let k_tt = &local.flux_rows * &recover_trace + &local.flux_trace;
        k_mat.view_mut((0, 0), (n_tr, n_tr)).copy_from(&k_tt);
        let k_tr = &local.flux_rows * &recover_rho;
        k_mat.view_mut((0, n_tr), (n_tr, 1)).copy_from(&k_tr);
        for c in 0..n_tr {
            k_mat[(n_tr, c)] = local.cons_row[c];
        }
        let load = &local.flux_load - &local.flux_rows * &recover_const;
        rhs_out.rows_mut(0, n_tr).copy_from(&load);
    }
    rhs_out[n_tr] = local.cons_rhs;

    Ok(CondensedElement {
        k_mat,
        rhs: rhs_out,
        recover_const,
        recover_trace,
        recover_rho,
        edge_dofs: local.edge_dofs.clone(),
        n_tr,
    })
}

impl CondensedElement {
    /// Back-substitute the element interior unknowns from the solved global
    /// trace values and mean pressure.
    pub fn recover(&self, uhat: &DVector<f64>, rho: f64) -> DVector<f64> {
        &self.recover_const + &self.recover_trace * uhat + rho * &self.recover_rho
    }
}
