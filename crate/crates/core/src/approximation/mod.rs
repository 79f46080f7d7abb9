//! Polynomial bases and geometric mappings: reference-triangle and segment
//! nodal bases for isoparametric elements, physical-space Cartesian bases and
//! parametric trace bases for NEFEM, and the two element mappings.

pub mod iso;
pub mod modal;
pub mod nefem;
pub mod nodes;
pub mod physical;
pub mod segment;
pub mod triangle;

pub use iso::IsoGeometry;
pub use nefem::NefemChart;
pub use nodes::{equispaced_nodes, gauss_lobatto01, warp_blend_nodes, TriangleNodes};
pub use physical::PhysicalBasis;
pub use segment::SegmentBasis;
pub use triangle::{BasisEval, TriangleBasis};

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use crate::error::Result;

/// Shared reference bases, one per (degree, node family); elements of equal
/// degree reuse the same tables.
pub fn reference_basis(k: usize) -> Result<Arc<TriangleBasis>> {
    static CACHE: OnceLock<Mutex<HashMap<usize, Arc<TriangleBasis>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let mut guard = cache.lock().unwrap();
    if let Some(b) = guard.get(&k) {
        return Ok(b.clone());
    }
    let b = Arc::new(TriangleBasis::new(warp_blend_nodes(k))?);
    guard.insert(k, b.clone());
    Ok(b)
}

/// Shared geometry bases at equispaced lattices (classic high-order layout).
pub fn geometry_basis(q: usize) -> Result<Arc<TriangleBasis>> {
    static CACHE: OnceLock<Mutex<HashMap<usize, Arc<TriangleBasis>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let mut guard = cache.lock().unwrap();
    if let Some(b) = guard.get(&q) {
        return Ok(b.clone());
    }
    let b = Arc::new(TriangleBasis::new(equispaced_nodes(q))?);
    guard.insert(q, b.clone());
    Ok(b)
}

/// Shared trace bases: degree-k Lagrange at Gauss-Lobatto nodes on [0, 1].
pub fn trace_basis(k_hat: usize) -> Result<Arc<SegmentBasis>> {
    static CACHE: OnceLock<Mutex<HashMap<usize, Arc<SegmentBasis>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let mut guard = cache.lock().unwrap();
    if let Some(b) = guard.get(&k_hat) {
        return Ok(b.clone());
    }
    let b = Arc::new(SegmentBasis::lobatto(k_hat)?);
    guard.insert(k_hat, b.clone());
    Ok(b)
}
