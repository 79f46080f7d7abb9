//! Per-element geometry backends: straight elements, isoparametric curved
//! elements of fixed or regenerated degree, and NEFEM charts.

use nalgebra::{Matrix2, Point2};
use std::sync::Arc;

use crate::approximation::nefem::NefemChart;
use crate::approximation::triangle::BasisEval;
use crate::approximation::{reference_basis, IsoGeometry, PhysicalBasis};
use crate::error::{Error, Result};
use crate::mesh::TriMesh;
use crate::nurbs::NurbsCurve;
use crate::quadrature::{gauss_segment, triangle_rule};
use crate::solver::DegreeMap;

/// How curved-element geometry follows the functional degree.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GeometryStrategy {
    /// Polynomial boundary of fixed degree q, never updated.
    IsoFixed(usize),
    /// Isoparametric with q = k_e, re-projected on every degree change.
    IsoRegen,
    /// Exact NURBS boundary; functional degree moves freely.
    Nefem,
}

/// Geometry of a single element.
#[derive(Debug, Clone)]
pub enum ElementGeometry {
    Straight { verts: [Point2<f64>; 3] },
    Iso { geom: IsoGeometry, curved_edge: usize },
    Nefem { chart: NefemChart },
}

/// Volume quadrature and basis tables of one element at one degree.
#[derive(Debug, Clone)]
pub struct VolTables {
    pub k: usize,
    pub n_en: usize,
    /// physical quadrature points and weights (measure included)
    pub qp: Vec<Point2<f64>>,
    pub qw: Vec<f64>,
    pub val: nalgebra::DMatrix<f64>,
    pub gx: nalgebra::DMatrix<f64>,
    pub gy: nalgebra::DMatrix<f64>,
    /// backend coordinates of the quadrature points (reference triangle or
    /// chart rectangle), usable to evaluate another degree at the same rule
    pub gen_pts: Vec<Point2<f64>>,
    /// physical positions of the nodal degrees of freedom
    pub nodes_phys: Vec<Point2<f64>>,
    /// lattice indices of the nodal set (for sub-triangulation output)
    pub lattice: Vec<(usize, usize)>,
    pub area: f64,
    pub basis_cond: f64,
}

impl ElementGeometry {
    pub fn is_curved(&self) -> bool {
        !matches!(self, ElementGeometry::Straight { .. })
    }

    /// Build volume tables for functional degree k. `extra` widens every
    /// quadrature rule beyond its polynomial-exactness requirement.
    pub fn volume_tables(&self, k: usize, extra: usize) -> Result<VolTables> {
        match self {
            ElementGeometry::Straight { verts } => {
                let rule = triangle_rule(2 * k + 2 + extra)?;
                let basis = reference_basis(k)?;
                let ev = basis.eval(&rule.points);
                let j = Matrix2::from_columns(&[verts[1] - verts[0], verts[2] - verts[0]]);
                let det = j.determinant();
                if det <= 0.0 {
                    return Err(Error::Geometry("inverted straight element".into()));
                }
                let jinv_t = j.try_inverse().unwrap().transpose();
                let n = basis.len();
                let nq = rule.points.len();
                let mut gx = nalgebra::DMatrix::zeros(nq, n);
                let mut gy = nalgebra::DMatrix::zeros(nq, n);
                for q in 0..nq {
                    for i in 0..n {
                        let g = jinv_t * nalgebra::Vector2::new(ev.gx[(q, i)], ev.gy[(q, i)]);
                        gx[(q, i)] = g.x;
                        gy[(q, i)] = g.y;
                    }
                }
                let qp: Vec<Point2<f64>> = rule
                    .points
                    .iter()
                    .map(|p| Point2::from(verts[0].coords + j * p.coords))
                    .collect();
                let qw: Vec<f64> = rule.weights.iter().map(|w| w * det).collect();
                let nodes_phys = basis
                    .nodes
                    .points
                    .iter()
                    .map(|p| Point2::from(verts[0].coords + j * p.coords))
                    .collect();
                Ok(VolTables {
                    k,
                    n_en: n,
                    qp,
                    area: qw.iter().sum(),
                    qw,
                    val: ev.val,
                    gx,
                    gy,
                    gen_pts: rule.points.clone(),
                    nodes_phys,
                    lattice: basis.nodes.lattice.clone(),
                    basis_cond: basis.cond_estimate,
                })
            }
            ElementGeometry::Iso { geom, .. } => {
                let rule = triangle_rule(2 * k + 2 * geom.q + 2 + extra)?;
                let basis = reference_basis(k)?;
                let ev = basis.eval(&rule.points);
                let (xs, js) = geom.map_checked(&rule.points)?;
                let n = basis.len();
                let nq = rule.points.len();
                let mut gx = nalgebra::DMatrix::zeros(nq, n);
                let mut gy = nalgebra::DMatrix::zeros(nq, n);
                let mut qw = Vec::with_capacity(nq);
                for q in 0..nq {
                    let jinv_t = js[q]
                        .try_inverse()
                        .ok_or_else(|| Error::Geometry("singular Jacobian".into()))?
                        .transpose();
                    for i in 0..n {
                        let g = jinv_t * nalgebra::Vector2::new(ev.gx[(q, i)], ev.gy[(q, i)]);
                        gx[(q, i)] = g.x;
                        gy[(q, i)] = g.y;
                    }
                    qw.push(rule.weights[q] * js[q].determinant());
                }
                let (nodes_phys, _) = geom.map(&basis.nodes.points);
                Ok(VolTables {
                    k,
                    n_en: n,
                    qp: xs,
                    area: qw.iter().sum(),
                    qw,
                    val: ev.val,
                    gx,
                    gy,
                    gen_pts: rule.points.clone(),
                    nodes_phys,
                    lattice: basis.nodes.lattice.clone(),
                    basis_cond: basis.cond_estimate,
                })
            }
            ElementGeometry::Nefem { chart } => {
                let (gen_pts, qw_raw) = nefem_rectangle_rule(chart, k, extra)?;
                let nodes_phys = chart.nodal_set(k)?;
                let basis = PhysicalBasis::new(k, nodes_phys.clone())?;
                let mut qp = Vec::with_capacity(gen_pts.len());
                let mut qw = Vec::with_capacity(gen_pts.len());
                for (g, w) in gen_pts.iter().zip(&qw_raw) {
                    let (x, j) = chart.map(g.x, g.y)?;
                    let det = j.determinant();
                    if det < 0.0 {
                        return Err(Error::InvalidChart(format!(
                            "det J = {det:.3e} on the quadrature grid"
                        )));
                    }
                    qp.push(x);
                    qw.push(w * det);
                }
                let ev = basis.eval(&qp);
                let lattice = crate::approximation::warp_blend_nodes(k).lattice;
                Ok(VolTables {
                    k,
                    n_en: basis.len(),
                    area: qw.iter().sum(),
                    qp,
                    qw,
                    val: ev.val,
                    gx: ev.gx,
                    gy: ev.gy,
                    gen_pts,
                    nodes_phys,
                    lattice,
                    basis_cond: basis.cond_estimate,
                })
            }
        }
    }

    /// Evaluate the degree-k basis of this element at backend coordinates
    /// produced by [`volume_tables`] (possibly of another degree).
    pub fn basis_at(&self, k: usize, gen_pts: &[Point2<f64>]) -> Result<BasisEval> {
        match self {
            ElementGeometry::Straight { verts } => {
                let basis = reference_basis(k)?;
                let ev = basis.eval(gen_pts);
                let j = Matrix2::from_columns(&[verts[1] - verts[0], verts[2] - verts[0]]);
                let jinv_t = j.try_inverse().unwrap().transpose();
                Ok(chain_rule_const(ev, &jinv_t))
            }
            ElementGeometry::Iso { geom, .. } => {
                let basis = reference_basis(k)?;
                let mut ev = basis.eval(gen_pts);
                let (_, js) = geom.map(gen_pts);
                for q in 0..gen_pts.len() {
                    let jinv_t = js[q]
                        .try_inverse()
                        .ok_or_else(|| Error::Geometry("singular Jacobian".into()))?
                        .transpose();
                    for i in 0..basis.len() {
                        let g = jinv_t * nalgebra::Vector2::new(ev.gx[(q, i)], ev.gy[(q, i)]);
                        ev.gx[(q, i)] = g.x;
                        ev.gy[(q, i)] = g.y;
                    }
                }
                Ok(ev)
            }
            ElementGeometry::Nefem { chart } => {
                let nodes = chart.nodal_set(k)?;
                let basis = PhysicalBasis::new(k, nodes)?;
                let mut phys = Vec::with_capacity(gen_pts.len());
                for g in gen_pts {
                    let (x, _) = chart.map(g.x, g.y)?;
                    phys.push(x);
                }
                Ok(basis.eval(&phys))
            }
        }
    }
}

fn chain_rule_const(mut ev: BasisEval, jinv_t: &Matrix2<f64>) -> BasisEval {
    for q in 0..ev.val.nrows() {
        for i in 0..ev.val.ncols() {
            let g = jinv_t * nalgebra::Vector2::new(ev.gx[(q, i)], ev.gy[(q, i)]);
            ev.gx[(q, i)] = g.x;
            ev.gy[(q, i)] = g.y;
        }
    }
    ev
}

/// Composite tensor rule on the chart rectangle R, split at interior knots:
/// n1 = ceil((2k + q_curve + 2)/2) Gauss points per lambda1 sub-span and
/// n2 = k + 2 in lambda2, both widened by `extra`.
fn nefem_rectangle_rule(
    chart: &NefemChart,
    k: usize,
    extra: usize,
) -> Result<(Vec<Point2<f64>>, Vec<f64>)> {
    let q_curve = chart.curve.degree();
    let n1 = (2 * k + q_curve + 2).div_ceil(2) + extra.div_ceil(2);
    let n2 = k + 2 + extra.div_ceil(2);
    let g1 = gauss_segment(n1.clamp(1, 64))?;
    let g2 = gauss_segment(n2.clamp(1, 64))?;
    let mut spans = vec![chart.interval.a];
    spans.extend(chart.curve.interior_breakpoints(&chart.interval));
    spans.push(chart.interval.b);
    let mut pts = Vec::new();
    let mut wts = Vec::new();
    for win in spans.windows(2) {
        let (a, b) = (win[0], win[1]);
        let len = b - a;
        for (s1, w1) in g1.points.iter().zip(&g1.weights) {
            let l1 = a + s1 * len;
            for (s2, w2) in g2.points.iter().zip(&g2.weights) {
                pts.push(Point2::new(l1, *s2));
                wts.push(w1 * len * w2);
            }
        }
    }
    Ok((pts, wts))
}

/// Geometry state for the whole mesh under one strategy.
#[derive(Debug, Clone)]
pub struct GeometryBackend {
    pub strategy: GeometryStrategy,
    pub elems: Vec<ElementGeometry>,
    pub curves: Vec<Arc<NurbsCurve>>,
}

impl GeometryBackend {
    /// Classify elements and construct their geometry. Curved boundary faces
    /// must traverse their curve with increasing parameter (domain on the
    /// left); elements with two curved edges are not supported.
    pub fn build(
        mesh: &TriMesh,
        curves: &[Arc<NurbsCurve>],
        strategy: GeometryStrategy,
        degrees: &DegreeMap,
    ) -> Result<Self> {
        let mut elems = Vec::with_capacity(mesh.n_elements());
        for e in 0..mesh.n_elements() {
            let verts = mesh.element_vertices(e);
            let mut curved: Vec<(usize, crate::nurbs::ParamInterval)> = Vec::new();
            for ledge in 0..3 {
                let f = &mesh.faces[mesh.elem_faces[e][ledge]];
                if f.left.0 != e {
                    continue; // boundary faces always have the element on the left
                }
                if let Some(bi) = &f.boundary {
                    if let Some(iv) = bi.interval {
                        curved.push((ledge, iv));
                    }
                }
            }
            let geom = match curved.len() {
                0 => ElementGeometry::Straight { verts },
                1 => {
                    let (ledge, iv) = curved[0];
                    let curve = curves
                        .get(iv.curve)
                        .ok_or_else(|| Error::Geometry(format!("curve id {} missing", iv.curve)))?;
                    check_edge_matches_curve(mesh, e, ledge, curve, &iv)?;
                    match strategy {
                        GeometryStrategy::Nefem => {
                            let x_i = verts[(ledge + 2) % 3];
                            ElementGeometry::Nefem {
                                chart: NefemChart::new(curve.clone(), iv, x_i, ledge)?,
                            }
                        }
                        GeometryStrategy::IsoFixed(q) => ElementGeometry::Iso {
                            geom: IsoGeometry::curved(q.max(1), verts, ledge, curve, &iv)?,
                            curved_edge: ledge,
                        },
                        GeometryStrategy::IsoRegen => ElementGeometry::Iso {
                            geom: IsoGeometry::curved(
                                degrees.k[e].max(1),
                                verts,
                                ledge,
                                curve,
                                &iv,
                            )?,
                            curved_edge: ledge,
                        },
                    }
                }
                _ => {
                    return Err(Error::Geometry(format!(
                        "element {e} touches the curved boundary on {} edges; split it",
                        curved.len()
                    )))
                }
            };
            elems.push(geom);
        }
        Ok(Self {
            strategy,
            elems,
            curves: curves.to_vec(),
        })
    }

    /// Apply the strategy's geometry update for a new degree map: a no-op for
    /// the fixed and NEFEM strategies, a re-projection at q = k_e otherwise.
    pub fn update(&mut self, mesh: &TriMesh, degrees: &DegreeMap) -> Result<()> {
        if self.strategy != GeometryStrategy::IsoRegen {
            return Ok(());
        }
        for e in 0..mesh.n_elements() {
            let curved_edge = match &self.elems[e] {
                ElementGeometry::Iso { geom, curved_edge } => {
                    if geom.q == degrees.k[e].max(1) {
                        continue;
                    }
                    *curved_edge
                }
                _ => continue,
            };
            let f = &mesh.faces[mesh.elem_faces[e][curved_edge]];
            let iv = f
                .boundary
                .as_ref()
                .and_then(|b| b.interval)
                .ok_or_else(|| Error::Geometry("curved edge lost its interval".into()))?;
            let curve = self.curves[iv.curve].clone();
            self.elems[e] = ElementGeometry::Iso {
                geom: IsoGeometry::curved(
                    degrees.k[e].max(1),
                    mesh.element_vertices(e),
                    curved_edge,
                    &curve,
                    &iv,
                )?,
                curved_edge,
            };
        }
        Ok(())
    }
}

fn check_edge_matches_curve(
    mesh: &TriMesh,
    e: usize,
    ledge: usize,
    curve: &NurbsCurve,
    iv: &crate::nurbs::ParamInterval,
) -> Result<()> {
    let tri = mesh.elements[e];
    let a = mesh.vertices[tri[ledge]];
    let b = mesh.vertices[tri[(ledge + 1) % 3]];
    let ca = curve.evaluate(iv.a)?;
    let cb = curve.evaluate(iv.b)?;
    let tol = 1e-8 * mesh.domain_diameter;
    if (a - ca).norm() > tol || (b - cb).norm() > tol {
        return Err(Error::Geometry(format!(
            "element {e}: curved edge endpoints do not match C(lambda) \
             (|a-C(a)| = {:.2e}, |b-C(b)| = {:.2e})",
            (a - ca).norm(),
            (b - cb).norm()
        )));
    }
    Ok(())
}
