//! Curved flats in pseudo-orthogonal symmetric spaces.
//!
//! Solutions are generated from a hierarchy of commuting Lax flows on
//! finite-dimensional spaces of twisted loops. The pipeline integrates the
//! flows over a coordinate grid, assembles the flat connection family
//! `A₀ + μA₁`, integrates frames, and reconstructs the developing isometry
//! and the associated isometric immersion between space forms.

pub mod algebra;
pub mod cli;
pub mod error;
pub mod frame;
pub mod geometry;
pub mod lax;
pub mod loops;

pub use error::{Error, ErrorCategory, Result};
