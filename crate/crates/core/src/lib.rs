//! Characterization and scalable estimation of correlated multiqubit readout
//! transition matrices, plus correction of measured distributions.
//!
//! The crate is organized bottom-up:
//!
//! * [`bits`], [`geometry`], [`filter`], [`matrix`], [`norm`]: classical
//!   states, register layout, Moore neighborhoods, qubit filters, dense
//!   matrices and error measures.
//! * [`model`], [`backend`], [`dist`]: the correlated noise model used as
//!   ground truth and the exact, sampled and replay measurement backends.
//! * [`characterize`]: single-qubit matrices, the `A`/`B`/`C` correlators and
//!   the product approximation.
//! * [`estimate`]: filtered mean fields and pair fluctuations assembled into
//!   `T_est = T_mean + T_pair` from `O(4^k n^2)` preparations.
//! * [`correct`]: constrained least-squares and direct-inverse correction.

pub mod backend;
pub mod bits;
pub mod characterize;
pub mod correct;
pub mod dist;
pub mod error;
pub mod estimate;
pub mod filter;
pub mod geometry;
pub mod matrix;
pub mod model;
pub mod norm;
pub mod presets;

pub use backend::{Backend, Session};
pub use bits::BitString;
pub use dist::{Counts, Dataset, ProbDist};
pub use error::{Error, Result};
pub use geometry::{moore_neighborhood, Neighborhood, RegisterGeometry};
pub use matrix::TransitionMatrix;
pub use model::{NoiseModel, NoiseModelSpec};
pub use norm::{norm_distance, MatrixNorm};
pub use correct::{compare_matrices, correct_constrained, correct_direct_inverse, CorrectionResult};
pub use estimate::{circuit_budget, estimate_t, CalibrationTables};
