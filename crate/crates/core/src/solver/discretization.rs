//! Mesh-level discrete tables: one canonical quadrature per face shared by
//! both adjacent elements, and per-element volume/boundary basis tables.

use nalgebra::{DMatrix, Point2, Vector2};

use crate::approximation::{trace_basis, PhysicalBasis, SegmentBasis};
use crate::error::{Error, Result};
use crate::mesh::TriMesh;
use crate::quadrature::gauss_segment;
use crate::solver::geometry::{ElementGeometry, GeometryBackend, VolTables};
use crate::solver::DegreeMap;

/// Canonical quadrature and trace tables of one face. The canonical
/// coordinate s runs over [0, 1] along `Face::verts[0] -> verts[1]`, i.e. in
/// the left element's CCW direction (and with increasing curve parameter on
/// curved boundary faces).
#[derive(Debug, Clone)]
pub struct FaceDisc {
    pub k_hat: usize,
    pub s: Vec<f64>,
    pub qp: Vec<Point2<f64>>,
    /// arc-length weights
    pub qw: Vec<f64>,
    /// outward normal of the left element at each quadrature point
    pub normal_left: Vec<Vector2<f64>>,
    /// curve parameter per point, for data given on the exact boundary
    pub lambda: Option<Vec<f64>>,
    pub curve_id: Option<usize>,
    /// trace basis values at the quadrature points (nq x (k_hat + 1))
    pub trace_val: DMatrix<f64>,
    pub trace_nodes_s: Vec<f64>,
    pub trace_nodes_phys: Vec<Point2<f64>>,
    pub trace_nodes_lambda: Option<Vec<f64>>,
}

impl FaceDisc {
    pub fn n_trace(&self) -> usize {
        self.k_hat + 1
    }
}

/// Element-side view of one of its faces.
#[derive(Debug, Clone)]
pub struct ElemFace {
    /// element basis values at the face quadrature points (nq x n_en)
    pub val: DMatrix<f64>,
    /// outward normals for this element (sign-flipped for the right side)
    pub normals: Vec<Vector2<f64>>,
}

#[derive(Debug, Clone)]
pub struct ElemDisc {
    pub vol: VolTables,
    pub faces: [ElemFace; 3],
}

#[derive(Debug, Clone)]
pub struct Discretization {
    pub faces: Vec<FaceDisc>,
    pub elems: Vec<ElemDisc>,
    pub face_degrees: Vec<usize>,
}

impl Discretization {
    pub fn build(
        mesh: &TriMesh,
        backend: &GeometryBackend,
        degrees: &DegreeMap,
        extra: usize,
    ) -> Result<Self> {
        let face_degrees: Vec<usize> = (0..mesh.faces.len())
            .map(|f| degrees.face_degree(mesh, f))
            .collect();

        let mut faces = Vec::with_capacity(mesh.faces.len());
        for (fid, face) in mesh.faces.iter().enumerate() {
            let k_hat = face_degrees[fid];
            let quad_deg = degrees.k[face.left.0]
                .max(face.right.map_or(0, |(e, _)| degrees.k[e]))
                .max(k_hat);
            faces.push(build_face(mesh, backend, fid, k_hat, quad_deg, extra)?);
        }

        let mut elems = Vec::with_capacity(mesh.n_elements());
        for e in 0..mesh.n_elements() {
            elems.push(build_elem(mesh, backend, e, degrees.k[e], &faces, extra)?);
        }
        Ok(Self {
            faces,
            elems,
            face_degrees,
        })
    }
}

fn rot_right(v: Vector2<f64>) -> Vector2<f64> {
    Vector2::new(v.y, -v.x)
}

fn build_face(
    mesh: &TriMesh,
    backend: &GeometryBackend,
    fid: usize,
    k_hat: usize,
    quad_deg: usize,
    extra: usize,
) -> Result<FaceDisc> {
    let face = &mesh.faces[fid];
    let a = mesh.vertices[face.verts[0]];
    let b = mesh.vertices[face.verts[1]];
    let tb = trace_basis(k_hat)?;
    let interval = face.boundary.as_ref().and_then(|bi| bi.interval);
    let n_straight = (quad_deg + 2 + extra.div_ceil(2)).clamp(1, 64);

    let (s, qp, qw, normal_left, lambda): (
        Vec<f64>,
        Vec<Point2<f64>>,
        Vec<f64>,
        Vec<Vector2<f64>>,
        Option<Vec<f64>>,
    ) = match (&backend.elems[face.left.0], interval) {
        // straight face (interior faces and straight boundary portions)
        (_, None) => {
            let g = gauss_segment(n_straight)?;
            let d = b - a;
            let len = d.norm();
            let n = rot_right(d) / len;
            let qp = g
                .points
                .iter()
                .map(|s| Point2::from(a.coords + *s * d))
                .collect();
            let qw = g.weights.iter().map(|w| w * len).collect();
            (
                g.points.clone(),
                qp,
                qw,
                vec![n; g.points.len()],
                None,
            )
        }
        // curved boundary face on a NEFEM element: quadrature in the
        // parametric space, composite across interior knots
        (ElementGeometry::Nefem { chart }, Some(iv)) => {
            let q_curve = chart.curve.degree();
            let npts = ((2 * quad_deg + q_curve + 2).div_ceil(2) + 1 + extra.div_ceil(2))
                .clamp(1, 64);
            let g = gauss_segment(npts)?;
            let mut spans = vec![iv.a];
            spans.extend(chart.curve.interior_breakpoints(&iv));
            spans.push(iv.b);
            let mut s = Vec::new();
            let mut qp = Vec::new();
            let mut qw = Vec::new();
            let mut normals = Vec::new();
            let mut lambda = Vec::new();
            for win in spans.windows(2) {
                let len = win[1] - win[0];
                for (t, w) in g.points.iter().zip(&g.weights) {
                    let l = win[0] + t * len;
                    let (x, d1, _) = chart.curve.eval_with_ders2(l)?;
                    let speed = d1.norm();
                    s.push((l - iv.a) / (iv.b - iv.a));
                    qp.push(x);
                    qw.push(w * len * speed);
                    normals.push(rot_right(d1) / speed);
                    lambda.push(l);
                }
            }
            (s, qp, qw, normals, Some(lambda))
        }
        // curved boundary face on an isoparametric element: quadrature on the
        // polynomial edge restriction of the element geometry
        (ElementGeometry::Iso { geom, curved_edge }, Some(iv)) => {
            let f_ledge = face.left.1;
            if f_ledge != *curved_edge {
                return Err(Error::Geometry(
                    "curved face does not match the element's curved edge".into(),
                ));
            }
            let npts = (quad_deg + geom.q + 2 + extra.div_ceil(2)).clamp(1, 64);
            let g = gauss_segment(npts)?;
            let edge_ids = geom.lattice().edge_nodes(f_ledge);
            let edge_basis = SegmentBasis::equispaced(geom.q)?;
            let (val, der) = edge_basis.eval_with_deriv(&g.points);
            let mut qp = Vec::new();
            let mut qw = Vec::new();
            let mut normals = Vec::new();
            let mut lambda = Vec::new();
            for (row, (t, w)) in g.points.iter().zip(&g.weights).enumerate() {
                let mut x = Vector2::zeros();
                let mut dx = Vector2::zeros();
                for (slot, idx) in edge_ids.iter().enumerate() {
                    x += val[(row, slot)] * geom.nodes[*idx].coords;
                    dx += der[(row, slot)] * geom.nodes[*idx].coords;
                }
                let speed = dx.norm();
                qp.push(Point2::from(x));
                qw.push(w * speed);
                normals.push(rot_right(dx) / speed);
                lambda.push(iv.a + t * (iv.b - iv.a));
            }
            (g.points.clone(), qp, qw, normals, Some(lambda))
        }
        // curved-tagged face whose element keeps straight chords (iso q = 1
        // degenerates there); the parameter is still tracked for data
        (ElementGeometry::Straight { .. }, Some(iv)) => {
            let g = gauss_segment(n_straight)?;
            let d = b - a;
            let len = d.norm();
            let n = rot_right(d) / len;
            let qp = g
                .points
                .iter()
                .map(|s| Point2::from(a.coords + *s * d))
                .collect();
            let qw: Vec<f64> = g.weights.iter().map(|w| w * len).collect();
            let lambda = g
                .points
                .iter()
                .map(|s| iv.a + s * (iv.b - iv.a))
                .collect();
            (g.points.clone(), qp, qw, vec![n; g.points.len()], Some(lambda))
        }
    };

    let trace_val = tb.eval(&s);
    let trace_nodes_s = tb.nodes.clone();
    let (trace_nodes_phys, trace_nodes_lambda) = match interval {
        Some(iv) => {
            let curve = backend
                .curves
                .get(iv.curve)
                .ok_or_else(|| Error::Geometry(format!("curve id {} missing", iv.curve)))?;
            match &backend.elems[face.left.0] {
                ElementGeometry::Straight { .. } => {
                    // nodes on the chord, parameters tracked affinely
                    let phys = trace_nodes_s
                        .iter()
                        .map(|t| Point2::from(a.coords + *t * (b - a)))
                        .collect();
                    let lam = trace_nodes_s
                        .iter()
                        .map(|t| iv.a + t * (iv.b - iv.a))
                        .collect();
                    (phys, Some(lam))
                }
                ElementGeometry::Iso { geom, .. } => {
                    let edge_ids = geom.lattice().edge_nodes(face.left.1);
                    let edge_basis = SegmentBasis::equispaced(geom.q)?;
                    let val = edge_basis.eval(&trace_nodes_s);
                    let mut phys = Vec::new();
                    for row in 0..trace_nodes_s.len() {
                        let mut x = Vector2::zeros();
                        for (slot, idx) in edge_ids.iter().enumerate() {
                            x += val[(row, slot)] * geom.nodes[*idx].coords;
                        }
                        phys.push(Point2::from(x));
                    }
                    let lam = trace_nodes_s
                        .iter()
                        .map(|t| iv.a + t * (iv.b - iv.a))
                        .collect();
                    (phys, Some(lam))
                }
                ElementGeometry::Nefem { .. } => {
                    let lam: Vec<f64> = trace_nodes_s
                        .iter()
                        .map(|t| iv.a + t * (iv.b - iv.a))
                        .collect();
                    let mut phys = Vec::new();
                    for l in &lam {
                        phys.push(curve.evaluate(*l)?);
                    }
                    (phys, Some(lam))
                }
            }
        }
        None => {
            let phys = trace_nodes_s
                .iter()
                .map(|t| Point2::from(a.coords + *t * (b - a)))
                .collect();
            (phys, None)
        }
    };

    Ok(FaceDisc {
        k_hat,
        s,
        qp,
        qw,
        normal_left,
        lambda,
        curve_id: interval.map(|iv| iv.curve),
        trace_val,
        trace_nodes_s,
        trace_nodes_phys,
        trace_nodes_lambda,
    })
}

fn build_elem(
    mesh: &TriMesh,
    backend: &GeometryBackend,
    e: usize,
    k: usize,
    faces: &[FaceDisc],
    extra: usize,
) -> Result<ElemDisc> {
    let geom = &backend.elems[e];
    let vol = geom.volume_tables(k, extra)?;

    // reference vertices for edge parametrization of reference-based bases
    let ref_verts = [
        Point2::new(0.0, 0.0),
        Point2::new(1.0, 0.0),
        Point2::new(0.0, 1.0),
    ];

    let mut elem_faces: Vec<ElemFace> = Vec::with_capacity(3);
    for ledge in 0..3 {
        let fid = mesh.elem_faces[e][ledge];
        let fd = &faces[fid];
        let face = &mesh.faces[fid];
        let is_left = face.left == (e, ledge);
        let normals: Vec<Vector2<f64>> = if is_left {
            fd.normal_left.clone()
        } else {
            fd.normal_left.iter().map(|n| -n).collect()
        };
        let val = match geom {
            ElementGeometry::Nefem { chart } => {
                // physical basis: evaluate directly at the face points
                let basis = PhysicalBasis::new(k, chart.nodal_set(k)?)?;
                basis.eval(&fd.qp).val
            }
            _ => {
                let basis = crate::approximation::reference_basis(k)?;
                let r0 = ref_verts[ledge];
                let r1 = ref_verts[(ledge + 1) % 3];
                let pts: Vec<Point2<f64>> = fd
                    .s
                    .iter()
                    .map(|s| {
                        let t = if is_left { *s } else { 1.0 - *s };
                        Point2::from(r0.coords + t * (r1 - r0))
                    })
                    .collect();
                basis.eval(&pts).val
            }
        };
        elem_faces.push(ElemFace { val, normals });
    }
    let faces_arr: [ElemFace; 3] = elem_faces
        .try_into()
        .map_err(|_| Error::Assembly("element face table construction".into()))?;
    Ok(ElemDisc {
        vol,
        faces: faces_arr,
    })
}
