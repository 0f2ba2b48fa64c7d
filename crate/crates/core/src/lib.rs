//! Linear symplectic geometry on the complexified graph.
//!
//! The crate builds quadratic generating functions for every real linear
//! symplectomorphism (including the case of a singular `B` block), evaluates
//! the skew-valued map `H ↦ JH + HᵀJ` with its algebraic identities, searches
//! for preimages of skew targets, and quantizes symplectic matrices on
//! Gaussian states.

pub mod error;
pub mod explorer;
pub mod genfun;
pub mod io;
pub mod linalg;
pub mod metaplectic;
pub mod suite;
pub mod symplectic;
pub mod xmap;

pub use error::{Error, Result};
