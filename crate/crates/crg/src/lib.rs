//! Constructive renormalization-group workbench for the half-filled Hubbard
//! model on the honeycomb lattice.

pub mod error;
pub mod linalg;
pub mod honeycomb;
pub mod propagators;
pub mod gn_trees;
pub mod grassmann;
pub mod diagrams;
pub mod ed;
pub mod bbf;
pub mod momentum_poly;
pub mod kernel;
pub mod multiscale;
pub mod symmetry;
pub mod acceptance;

pub use error::{CrgError, Result};
