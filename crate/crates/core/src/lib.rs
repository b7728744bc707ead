//! Fictitious domain solver for the incompressible Navier-Stokes equations
//! with a norm-dependent Brinkman penalty, on Alfeld-split triangulations
//! with Scott-Vogelius elements.

pub mod analysis;
pub mod assembly;
pub mod check;
pub mod cli;
pub mod config;
pub mod error;
pub mod fespace;
pub mod geometry;
pub mod linsolve;
pub mod manufactured;
pub mod mesh;
pub mod oracle;
pub mod quadrature;
pub mod report;
pub mod scalar;
pub mod sparse;
pub mod timeloop;

pub use error::Error;

/// Double-precision instantiations used by the solver driver and the CLI.
pub type Mesh = mesh::Mesh<f64>;
pub type Discretization = assembly::Discretization<f64, geometry::Disk<f64>>;
pub type VelocitySpace = fespace::VelocitySpace<f64>;
pub type CsrMatrix = sparse::CsrMatrix<f64>;
pub type StokesBlocks = assembly::StokesBlocks<f64>;
