//! Hybridisable discontinuous Galerkin solver for stationary 2D Stokes flow
//! with per-element polynomial degree, NURBS-enhanced curved elements,
//! superconvergent postprocessing and automatic degree adaptivity.

pub mod approximation;
pub mod error;
pub mod mesh;
pub mod nurbs;
pub mod quadrature;

pub mod adaptivity;
pub mod benchmarks;
pub mod solver;
pub use error::{Error, Result};
pub use mesh::{BoundaryEdgeSpec, BoundaryInfo, BoundaryTag, Face, TriMesh};
pub use nurbs::{read_curves, write_curves, NurbsCurve, ParamInterval};
