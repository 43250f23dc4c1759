//! Draw Haar-random unitary matrices by dialling each component of an
//! interferometer mesh independently from its own closed-form distribution.
//!
//! The crate covers the full pipeline: per-component sampling for three mesh
//! layouts and three component conventions ([`sampler`]), assembly of the
//! dialled parameters into the dense unitary ([`circuit`]), statistical
//! verification against a Ginibre-QR oracle ([`verify`]), the change-of-
//! variables check behind the sampling densities ([`jacobian`]), coverage
//! of imperfect components ([`coverage`]), and compilation of power-of-two
//! meshes onto qubit registers ([`qubit`]).
//!
//! All randomness flows through counter-style ChaCha streams keyed by seed
//! and component address, so every output is reproducible bit for bit and
//! independent of sampling order.

pub mod circuit;
pub mod coverage;
pub mod error;
pub mod jacobian;
pub mod jsonfmt;
pub mod linalg;
pub mod quad;
pub mod qubit;
pub mod sampler;
pub mod verify;

pub use error::{Error, Result};
