//! Triangular meshes with face connectivity, boundary tags, curved-edge
//! parametric intervals, nested refinement and element-size metrics.

use std::collections::HashMap;

use nalgebra::Point2;

use crate::error::{Error, Result};
use crate::nurbs::{NurbsCurve, ParamInterval};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundaryTag {
    Dirichlet,
    Neumann,
}

impl BoundaryTag {
    pub fn from_file_tag(t: usize) -> Result<Self> {
        match t {
            1 => Ok(BoundaryTag::Dirichlet),
            2 => Ok(BoundaryTag::Neumann),
            _ => Err(Error::Parse(format!("unknown boundary tag {t}"))),
        }
    }

    pub fn file_tag(&self) -> usize {
        match self {
            BoundaryTag::Dirichlet => 1,
            BoundaryTag::Neumann => 2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryInfo {
    pub tag: BoundaryTag,
    pub interval: Option<ParamInterval>,
}

/// One mesh face (edge). `verts` are listed in the left element's CCW order.
#[derive(Debug, Clone)]
pub struct Face {
    pub verts: [usize; 2],
    /// (element, local edge) that owns the canonical orientation
    pub left: (usize, usize),
    pub right: Option<(usize, usize)>,
    pub boundary: Option<BoundaryInfo>,
}

impl Face {
    pub fn is_interior(&self) -> bool {
        self.right.is_some()
    }

    pub fn is_dirichlet(&self) -> bool {
        matches!(
            self.boundary,
            Some(BoundaryInfo {
                tag: BoundaryTag::Dirichlet,
                ..
            })
        )
    }

    pub fn is_neumann(&self) -> bool {
        matches!(
            self.boundary,
            Some(BoundaryInfo {
                tag: BoundaryTag::Neumann,
                ..
            })
        )
    }
}

/// Boundary edge specification as read from a mesh file.
#[derive(Debug, Clone)]
pub struct BoundaryEdgeSpec {
    pub v: [usize; 2],
    pub tag: BoundaryTag,
    pub interval: Option<ParamInterval>,
}

#[derive(Debug, Clone)]
pub struct TriMesh {
    pub vertices: Vec<Point2<f64>>,
    /// CCW vertex triples
    pub elements: Vec<[usize; 3]>,
    pub faces: Vec<Face>,
    /// face index of each element's local edges 0..3
    pub elem_faces: Vec<[usize; 3]>,
    pub domain_diameter: f64,
}

fn signed_area(a: Point2<f64>, b: Point2<f64>, c: Point2<f64>) -> f64 {
    0.5 * ((b.x - a.x) * (c.y - a.y) - (c.x - a.x) * (b.y - a.y))
}

impl TriMesh {
    /// Build a mesh with full connectivity from vertices, CCW elements and
    /// boundary edge tags. Face ordering is the deterministic first-encounter
    /// order over (element, local edge).
    pub fn new(
        vertices: Vec<Point2<f64>>,
        elements: Vec<[usize; 3]>,
        boundary: Vec<BoundaryEdgeSpec>,
    ) -> Result<Self> {
        for (e, tri) in elements.iter().enumerate() {
            for &v in tri {
                if v >= vertices.len() {
                    return Err(Error::Topology(format!(
                        "element {e} references vertex {v} out of range"
                    )));
                }
            }
            let area = signed_area(vertices[tri[0]], vertices[tri[1]], vertices[tri[2]]);
            if area <= 0.0 {
                return Err(Error::Topology(format!(
                    "element {e} is not counter-clockwise (signed area {area:.3e})"
                )));
            }
        }

        let mut faces: Vec<Face> = Vec::new();
        let mut elem_faces = vec![[usize::MAX; 3]; elements.len()];
        let mut lookup: HashMap<(usize, usize), usize> = HashMap::new();
        for (e, tri) in elements.iter().enumerate() {
            for ledge in 0..3 {
                let a = tri[ledge];
                let b = tri[(ledge + 1) % 3];
                let key = (a.min(b), a.max(b));
                match lookup.get(&key) {
                    None => {
                        lookup.insert(key, faces.len());
                        elem_faces[e][ledge] = faces.len();
                        faces.push(Face {
                            verts: [a, b],
                            left: (e, ledge),
                            right: None,
                            boundary: None,
                        });
                    }
                    Some(&f) => {
                        if faces[f].right.is_some() {
                            return Err(Error::Topology(format!(
                                "non-manifold edge between vertices {a} and {b}"
                            )));
                        }
                        if faces[f].verts != [b, a] {
                            return Err(Error::Topology(format!(
                                "inconsistent orientation across edge ({a}, {b})"
                            )));
                        }
                        faces[f].right = Some((e, ledge));
                        elem_faces[e][ledge] = f;
                    }
                }
            }
        }

        // attach boundary tags
        let mut spec_lookup: HashMap<(usize, usize), &BoundaryEdgeSpec> = HashMap::new();
        for s in &boundary {
            let key = (s.v[0].min(s.v[1]), s.v[0].max(s.v[1]));
            if spec_lookup.insert(key, s).is_some() {
                return Err(Error::Topology(format!(
                    "duplicate boundary specification for edge {:?}",
                    s.v
                )));
            }
        }
        for face in faces.iter_mut() {
            if face.is_interior() {
                let key = (
                    face.verts[0].min(face.verts[1]),
                    face.verts[0].max(face.verts[1]),
                );
                if spec_lookup.contains_key(&key) {
                    return Err(Error::Topology(format!(
                        "interior edge {:?} carries a boundary tag",
                        face.verts
                    )));
                }
                continue;
            }
            let key = (
                face.verts[0].min(face.verts[1]),
                face.verts[0].max(face.verts[1]),
            );
            let spec = spec_lookup.remove(&key).ok_or_else(|| {
                Error::Topology(format!("boundary edge {:?} has no tag", face.verts))
            })?;
            if let Some(iv) = &spec.interval {
                // curved edges must run with the curve parameter: v_start = C(a)
                if spec.v[0] != face.verts[0] {
                    return Err(Error::Geometry(format!(
                        "curved boundary edge {:?} is reversed against the element orientation",
                        spec.v
                    )));
                }
                face.boundary = Some(BoundaryInfo {
                    tag: spec.tag,
                    interval: Some(*iv),
                });
            } else {
                face.boundary = Some(BoundaryInfo {
                    tag: spec.tag,
                    interval: None,
                });
            }
        }
        if !spec_lookup.is_empty() {
            let leftover: Vec<_> = spec_lookup.keys().collect();
            return Err(Error::Topology(format!(
                "boundary specifications do not match any boundary edge: {leftover:?}"
            )));
        }

        let domain_diameter = diameter(&vertices);
        Ok(Self {
            vertices,
            elements,
            faces,
            elem_faces,
            domain_diameter,
        })
    }

    pub fn n_elements(&self) -> usize {
        self.elements.len()
    }

    pub fn element_vertices(&self, e: usize) -> [Point2<f64>; 3] {
        let tri = self.elements[e];
        [
            self.vertices[tri[0]],
            self.vertices[tri[1]],
            self.vertices[tri[2]],
        ]
    }

    /// Chordal signed area of an element.
    pub fn chord_area(&self, e: usize) -> f64 {
        let [a, b, c] = self.element_vertices(e);
        signed_area(a, b, c)
    }

    /// V - E + T; equals 1 for a simply connected triangulated domain.
    pub fn euler_characteristic(&self) -> i64 {
        self.vertices.len() as i64 - self.faces.len() as i64 + self.elements.len() as i64
    }

    /// Characteristic element size: longest chord edge normalized by the
    /// domain diameter, so the Richardson degree update sees h < 1.
    pub fn element_size(&self, e: usize) -> Result<f64> {
        let [a, b, c] = self.element_vertices(e);
        if self.chord_area(e).abs() < 1e-300 {
            return Err(Error::Geometry(format!("element {e} is degenerate")));
        }
        let longest = (b - a)
            .norm()
            .max((c - b).norm())
            .max((a - c).norm());
        Ok(longest / self.domain_diameter)
    }

    /// Uniform quadrisection; curved boundary edges split at the parametric
    /// midpoint with the new vertex placed on the curve.
    pub fn nested_refine(&self, curves: &[NurbsCurve]) -> Result<TriMesh> {
        let mut vertices = self.vertices.clone();
        // midpoint vertex of every face
        let mut face_mid = Vec::with_capacity(self.faces.len());
        for face in &self.faces {
            let a = self.vertices[face.verts[0]];
            let b = self.vertices[face.verts[1]];
            let interval = face.boundary.as_ref().and_then(|bi| bi.interval);
            let p = match interval {
                Some(iv) => {
                    let curve = curves.get(iv.curve).ok_or_else(|| {
                        Error::Geometry(format!("curve id {} not loaded", iv.curve))
                    })?;
                    curve.evaluate(iv.midpoint())?
                }
                None => Point2::from((a.coords + b.coords) / 2.0),
            };
            face_mid.push(vertices.len());
            vertices.push(p);
        }

        let mut elements = Vec::with_capacity(4 * self.elements.len());
        for (e, tri) in self.elements.iter().enumerate() {
            let m01 = face_mid[self.elem_faces[e][0]];
            let m12 = face_mid[self.elem_faces[e][1]];
            let m20 = face_mid[self.elem_faces[e][2]];
            elements.push([tri[0], m01, m20]);
            elements.push([m01, tri[1], m12]);
            elements.push([m20, m12, tri[2]]);
            elements.push([m01, m12, m20]);
        }

        let mut boundary = Vec::new();
        for face in &self.faces {
            let Some(bi) = &face.boundary else { continue };
            let mid = face_mid[self
                .elem_faces[face.left.0][face.left.1]];
            match bi.interval {
                Some(iv) => {
                    let (first, second) = iv.split();
                    boundary.push(BoundaryEdgeSpec {
                        v: [face.verts[0], mid],
                        tag: bi.tag,
                        interval: Some(first),
                    });
                    boundary.push(BoundaryEdgeSpec {
                        v: [mid, face.verts[1]],
                        tag: bi.tag,
                        interval: Some(second),
                    });
                }
                None => {
                    boundary.push(BoundaryEdgeSpec {
                        v: [face.verts[0], mid],
                        tag: bi.tag,
                        interval: None,
                    });
                    boundary.push(BoundaryEdgeSpec {
                        v: [mid, face.verts[1]],
                        tag: bi.tag,
                        interval: None,
                    });
                }
            }
        }
        TriMesh::new(vertices, elements, boundary)
    }

    /// Parse the plain-text mesh format: sections VERTICES (count; `x y` per
    /// line), ELEMENTS (count; `v1 v2 v3`), BOUNDARY (count;
    /// `v_start v_end tag [curve_id lambda_a lambda_b]`). Indices are
    /// zero-based; tags 1=Dirichlet, 2=Neumann.
    pub fn read(text: &str) -> Result<TriMesh> {
        let mut lines = text
            .lines()
            .map(|l| l.split('#').next().unwrap_or("").trim())
            .filter(|l| !l.is_empty());
        fn expect<'a>(line: Option<&'a str>, what: &str) -> Result<&'a str> {
            line.ok_or_else(|| Error::Parse(format!("mesh file ended before {what}")))
        }
        fn count(line: &str, what: &str) -> Result<usize> {
            line.parse()
                .map_err(|_| Error::Parse(format!("bad {what} count: {line}")))
        }

        let header = expect(lines.next(), "VERTICES")?;
        if header != "VERTICES" {
            return Err(Error::Parse(format!("expected VERTICES, found {header}")));
        }
        let nv = count(expect(lines.next(), "vertex count")?, "vertex")?;
        let mut vertices = Vec::with_capacity(nv);
        for _ in 0..nv {
            let line = expect(lines.next(), "vertex record")?;
            let f: Vec<&str> = line.split_whitespace().collect();
            if f.len() != 2 {
                return Err(Error::Parse(format!("vertex record needs x y: {line}")));
            }
            let x: f64 = f[0].parse().map_err(|_| Error::Parse(format!("bad vertex x: {line}")))?;
            let y: f64 = f[1].parse().map_err(|_| Error::Parse(format!("bad vertex y: {line}")))?;
            vertices.push(Point2::new(x, y));
        }

        let header = expect(lines.next(), "ELEMENTS")?;
        if header != "ELEMENTS" {
            return Err(Error::Parse(format!("expected ELEMENTS, found {header}")));
        }
        let ne = count(expect(lines.next(), "element count")?, "element")?;
        let mut elements = Vec::with_capacity(ne);
        for _ in 0..ne {
            let line = expect(lines.next(), "element record")?;
            let f: Vec<&str> = line.split_whitespace().collect();
            if f.len() != 3 {
                return Err(Error::Parse(format!("element record needs v1 v2 v3: {line}")));
            }
            let mut tri = [0usize; 3];
            for (slot, tok) in tri.iter_mut().zip(&f) {
                *slot = tok
                    .parse()
                    .map_err(|_| Error::Parse(format!("bad element vertex: {line}")))?;
            }
            elements.push(tri);
        }

        let header = expect(lines.next(), "BOUNDARY")?;
        if header != "BOUNDARY" {
            return Err(Error::Parse(format!("expected BOUNDARY, found {header}")));
        }
        let nb = count(expect(lines.next(), "boundary count")?, "boundary")?;
        let mut boundary = Vec::with_capacity(nb);
        for _ in 0..nb {
            let line = expect(lines.next(), "boundary record")?;
            let f: Vec<&str> = line.split_whitespace().collect();
            if f.len() != 3 && f.len() != 6 {
                return Err(Error::Parse(format!(
                    "boundary record needs 3 or 6 fields: {line}"
                )));
            }
            let a: usize = f[0].parse().map_err(|_| Error::Parse(format!("bad boundary vertex: {line}")))?;
            let b: usize = f[1].parse().map_err(|_| Error::Parse(format!("bad boundary vertex: {line}")))?;
            let tag: usize = f[2].parse().map_err(|_| Error::Parse(format!("bad boundary tag: {line}")))?;
            let interval = if f.len() == 6 {
                let cid: usize = f[3].parse().map_err(|_| Error::Parse(format!("bad curve id: {line}")))?;
                let la: f64 = f[4].parse().map_err(|_| Error::Parse(format!("bad lambda_a: {line}")))?;
                let lb: f64 = f[5].parse().map_err(|_| Error::Parse(format!("bad lambda_b: {line}")))?;
                Some(ParamInterval::new(cid, la, lb)?)
            } else {
                None
            };
            boundary.push(BoundaryEdgeSpec {
                v: [a, b],
                tag: BoundaryTag::from_file_tag(tag)?,
                interval,
            });
        }
        TriMesh::new(vertices, elements, boundary)
    }

    /// Write the mesh in the text format accepted by [`TriMesh::read`].
    pub fn write(&self) -> String {
        let mut out = String::new();
        out.push_str("VERTICES\n");
        out.push_str(&format!("{}\n", self.vertices.len()));
        for v in &self.vertices {
            out.push_str(&format!("{} {}\n", v.x, v.y));
        }
        out.push_str("ELEMENTS\n");
        out.push_str(&format!("{}\n", self.elements.len()));
        for t in &self.elements {
            out.push_str(&format!("{} {} {}\n", t[0], t[1], t[2]));
        }
        let nb = self.faces.iter().filter(|f| f.boundary.is_some()).count();
        out.push_str("BOUNDARY\n");
        out.push_str(&format!("{nb}\n"));
        for f in &self.faces {
            let Some(bi) = &f.boundary else { continue };
            match bi.interval {
                Some(iv) => out.push_str(&format!(
                    "{} {} {} {} {} {}\n",
                    f.verts[0],
                    f.verts[1],
                    bi.tag.file_tag(),
                    iv.curve,
                    iv.a,
                    iv.b
                )),
                None => out.push_str(&format!(
                    "{} {} {}\n",
                    f.verts[0],
                    f.verts[1],
                    bi.tag.file_tag()
                )),
            }
        }
        out
    }
}

fn diameter(vertices: &[Point2<f64>]) -> f64 {
    let mut d: f64 = 0.0;
    for i in 0..vertices.len() {
        for j in (i + 1)..vertices.len() {
            d = d.max((vertices[i] - vertices[j]).norm_squared());
        }
    }
    d.sqrt()
}
