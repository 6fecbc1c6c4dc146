//! Desk-scale laboratory for iterated function systems, locally constant skew
//! products and blender models.

pub mod blender;
pub mod error;
pub mod fixed;
pub mod hamiltonian;
pub mod ifs;
pub mod integrable;
pub mod map;
pub mod perturb;
pub mod skew;
pub mod space;

pub use error::{Error, Result};
pub use map::SmoothMap;
pub use space::{Factor, Region, StateSpace};
