//! Parameter-free, locking-free enriched Galerkin discretization of linear
//! elasticity on triangular and tetrahedral meshes.
//!
//! The discrete space enriches vector P1 continuous elements with one
//! constant per facet that corrects the normal component of the displacement.
//! Weak gradient and divergence operators built from that correction replace
//! the classical ones in the bilinear form, which keeps the method free of
//! volumetric locking as λ grows without any tunable penalty parameter.

pub mod analysis;
pub mod assembly;
pub mod cli;
pub mod error;
pub mod geometry;
pub mod mesh;
pub mod quadrature;
pub mod solver;
pub mod space;
pub mod sparse;
pub mod vtk;
pub mod weakops;

pub use error::{Error, Result};
