//! Spectral encoding of 3D shapes as spherical-harmonic moment vectors (SMVs)
//! and a cascade of band-specialised GANs that synthesizes new SMVs.
//!
//! The pipeline runs mesh → [`sampler`] → [`sh`] for encoding, [`cascade`]
//! for generation, and [`transform`] + [`feature`] to push spatial-domain
//! feedback back into the spectral generators. [`metrics`] scores the result.

pub mod assignment;
pub mod cascade;
pub mod codec;
pub mod error;
pub mod feature;
pub mod geometry;
pub mod io;
pub mod kdtree;
pub mod metrics;
pub mod nn;
pub mod pipeline;
pub mod sampler;
pub mod sh;
pub mod shapes;
pub mod synthetic;
pub mod transform;

pub use error::{Error, Result};
pub use geometry::{PointCloud, TriangleMesh};
pub use sh::{Degree, Smv, SphericalGrid};
