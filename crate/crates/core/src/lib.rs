//! Quantitative Helly selection for families of halfspaces and symmetric
//! strips.
//!
//! Given a family whose intersection `P` is a bounded polytope, the
//! selection pipelines pick a sub-family of size proportional to the
//! dimension and attach a closed-form bound on
//! `vol(selected intersection) / vol(P)`. Each pipeline moves `P` to John's
//! position, extracts a decomposition of the identity from the contact
//! points, and then either sparsifies it with the barrier method
//! ([`sparsify`]) and controls the volume with Brascamp–Lieb weights
//! ([`blieb`]), or selects a Dvoretzky–Rogers basis plus a ray-exit face
//! ([`select::select_naszodi`]). The [`volume`] module measures the actual
//! ratio so every certificate can be checked.

pub mod blieb;
pub mod error;
pub mod john;
pub mod linalg;
pub mod lp;
pub mod model;
pub mod nnls;
pub mod report;
pub mod select;
pub mod sparsify;
pub mod volume;

pub use error::{Error, Result};
