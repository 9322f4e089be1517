//! Interpolation of intermediate slices in 3D flow-velocity volumes.
//!
//! Velocimetry techniques measure planar velocity slices whose out-of-plane
//! spacing is much coarser than the in-plane resolution. This crate
//! reconstructs the missing intermediate slices with three interpolators of
//! increasing physical fidelity:
//!
//! * [`reconstruct::linear_midpoint`] — per-pixel averaging of the two
//!   bracketing slices;
//! * [`hs`] — Horn-Schunck optical flow on the velocity-magnitude images,
//!   followed by a symmetric warp-average;
//! * [`divflow`] — a symmetric optical-flow formulation with an additional
//!   divergence-minimization term, so the reconstructed field stays close to
//!   the incompressible-flow constraint `div v = 0`.
//!
//! [`metrics`] quantifies reconstructions (discrete divergence statistics
//! and mean squared error against ground truth); [`datasets`] provides a
//! divergence-free analytical test volume, a deterministic Gaussian noise
//! model, and file I/O (VVF binary volumes, per-slice CSV ingestion).

pub mod datasets;
pub mod divflow;
pub mod error;
pub mod field;
pub mod hs;
pub mod metrics;
pub mod reconstruct;
pub mod stencils;

pub use error::{FieldError, ParamError, SolveError, SolverError};
pub use field::{FlowField, GridSpec, ScalarSlice, VectorSlice, VolumeField};
