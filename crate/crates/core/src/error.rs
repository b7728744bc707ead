use thiserror::Error;

use crate::fespace::FeError;
use crate::geometry::GeometryError;
use crate::linsolve::SolveError;
use crate::mesh::MeshError;

/// Top-level error of the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Fe(#[from] FeError),
    #[error(transparent)]
    Solve(#[from] SolveError),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}
