//! Global trace system: scatter of condensed elemental blocks into the
//! sparse saddle system over (uhat, rho), the pure-Dirichlet pressure fix,
//! and the direct sparse factorization.

use faer::prelude::Solve;
use faer::sparse::{SparseColMat, Triplet};
use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::mesh::TriMesh;
use crate::solver::local::CondensedElement;

/// Global unknown layout: trace dofs per interior/Neumann face, then one mean
/// pressure per element, then the single pressure-level multiplier when the
/// problem is pure Dirichlet.
#[derive(Debug, Clone)]
pub struct DofLayout {
    pub face_offset: Vec<Option<usize>>,
    pub rho_offset: usize,
    pub n_elements: usize,
    pub pressure_multiplier: Option<usize>,
    pub n_dofs: usize,
}

impl DofLayout {
    pub fn build(mesh: &TriMesh, face_degrees: &[usize], pure_dirichlet: bool) -> DofLayout {
        let mut face_offset = vec![None; mesh.faces.len()];
        let mut next = 0usize;
        for (fid, face) in mesh.faces.iter().enumerate() {
            if face.is_dirichlet() {
                continue;
            }
            face_offset[fid] = Some(next);
            next += 2 * (face_degrees[fid] + 1);
        }
        let rho_offset = next;
        next += mesh.n_elements();
        let pressure_multiplier = if pure_dirichlet {
            let idx = next;
            next += 1;
            Some(idx)
        } else {
            None
        };
        DofLayout {
            face_offset,
            rho_offset,
            n_elements: mesh.n_elements(),
            pressure_multiplier,
            n_dofs: next,
        }
    }

    /// Global indices of one element's local [uhat; rho] vector.
    pub fn element_dofs(&self, elem: usize, condensed: &CondensedElement) -> Vec<usize> {
        let mut ids = Vec::with_capacity(condensed.n_tr + 1);
        for (_, fid, _, nt) in &condensed.edge_dofs {
            let base = self.face_offset[*fid].expect("non-Dirichlet face has trace dofs");
            for comp in 0..2 {
                for m in 0..*nt {
                    ids.push(base + comp * nt + m);
                }
            }
        }
        ids.push(self.rho_offset + elem);
        ids
    }
}

pub struct GlobalSystem {
    pub matrix: SparseColMat<usize, f64>,
    pub rhs: DVector<f64>,
}

/// Assemble the condensed elemental contributions; flux-continuity rows sit
/// at the trace dofs, the per-element conservation rows at the rho slots, and
/// the pure-Dirichlet case adds one multiplier enforcing sum(rho) = 0 while
/// entering every conservation row.
pub fn assemble_global(
    mesh: &TriMesh,
    condensed: &[CondensedElement],
    layout: &DofLayout,
) -> Result<GlobalSystem> {
    let n = layout.n_dofs;
    let mut triplets: Vec<Triplet<usize, usize, f64>> = Vec::new();
    let mut rhs = DVector::<f64>::zeros(n);

    for (e, ce) in condensed.iter().enumerate() {
        let ids = layout.element_dofs(e, ce);
        let dim = ids.len();
        debug_assert_eq!(dim, ce.n_tr + 1);
        for r in 0..dim {
            let gr = ids[r];
            rhs[gr] += ce.rhs[r];
            for c in 0..dim {
                let v = ce.k_mat[(r, c)];
                if v != 0.0 {
                    triplets.push(Triplet::new(gr, ids[c], v));
                }
            }
        }
    }

    if let Some(mult) = layout.pressure_multiplier {
        for e in 0..layout.n_elements {
            let row = layout.rho_offset + e;
            triplets.push(Triplet::new(row, mult, 1.0));
            triplets.push(Triplet::new(mult, layout.rho_offset + e, 1.0));
        }
    }

    // structural singularity check before factorizing
    let mut row_seen = vec![false; n];
    let mut col_seen = vec![false; n];
    for t in &triplets {
        row_seen[t.row] = true;
        col_seen[t.col] = true;
    }
    if let Some(row) = row_seen.iter().position(|s| !s) {
        return Err(Error::Assembly(format!(
            "structurally singular global system: empty row {row} \
             (missing pressure constraint or isolated element?)"
        )));
    }
    if let Some(col) = col_seen.iter().position(|s| !s) {
        return Err(Error::Assembly(format!(
            "structurally singular global system: unknown {col} never referenced"
        )));
    }

    let matrix = SparseColMat::try_new_from_triplets(n, n, &triplets)
        .map_err(|e| Error::Assembly(format!("sparse matrix construction: {e:?}")))?;
    let _ = mesh;
    Ok(GlobalSystem { matrix, rhs })
}

impl GlobalSystem {
    /// Direct sparse LU solve; returns the solution and the relative
    /// residual norm of the assembled system.
    pub fn solve(&self) -> Result<(DVector<f64>, f64)> {
        let n = self.rhs.len();
        let lu = self
            .matrix
            .sp_lu()
            .map_err(|e| Error::SingularSystem(format!("sparse LU failed: {e:?}")))?;
        let b = faer::col::Col::from_fn(n, |i| self.rhs[i]);
        let x = lu.solve(&b);
        // residual check
        let ax = &self.matrix * &x;
        let mut res = 0.0f64;
        let mut bnorm = 0.0f64;
        for i in 0..n {
            let r: f64 = ax[i] - self.rhs[i];
            res += r * r;
            bnorm += self.rhs[i] * self.rhs[i];
        }
        let rel = if bnorm > 0.0 {
            (res / bnorm).sqrt()
        } else {
            res.sqrt()
        };
        Ok((DVector::from_fn(n, |i, _| x[i]), rel))
    }
}
