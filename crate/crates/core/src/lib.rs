//! Sparse latent Gaussian models for split-panel monitoring data.
//!
//! The crate builds hierarchical additive smoothers out of Gaussian Markov
//! random field components and fits them exactly:
//!
//! * [`sparse`]: symmetric sparse matrices, fill-reducing Cholesky, solves and
//!   Takahashi selected inversion.
//! * [`penalty`]: random-walk and cyclic random-walk penalties and the joint
//!   hour-of-week Kronecker precision.
//! * [`basis`]: recursive (cyclic) B-spline bases for the annual trend.
//! * [`spde`]: triangular meshes, P1 finite elements and Matérn SPDE precisions.
//! * [`model`]: observation tables and assembly of the joint latent model.
//! * [`inference`]: Gaussian posteriors, sum-to-zero conditioning, linear
//!   combinations and empirical-Bayes hyperparameter search.
//!
//! The remaining modules ([`table`], [`simulate`], [`archive`], [`plot`],
//! [`config`], [`fit`]) back the command-line tool.

pub mod archive;
pub mod basis;
pub mod config;
mod error;
pub mod fit;
pub mod inference;
pub mod model;
pub mod penalty;
pub mod plot;
pub mod simulate;
pub mod spde;
pub mod sparse;
pub mod table;

pub use error::{Error, Result};
