//! Finite-blocklength converse bounds for discrete memoryless channels, with
//! exact evaluation for singular channels.
//!
//! The crate is organized bottom-up:
//!
//! - [`channel`]: matrices, input distributions, symmetry and singularity;
//! - [`measures`]: capacity, dispersions, third moments, sphere-packing exponent;
//! - [`exactdist`]: exact law of the singular-channel statistic `sum -ln alpha(Y_i)`;
//! - [`bounds`]: third-order converse constants and reports;
//! - [`minimax`]: the Neyman-Pearson evaluation with a non-product output law;
//! - [`verify`]: brute-force ML decoding, Monte-Carlo and audits.

pub mod bounds;
pub mod channel;
pub mod error;
pub mod exactdist;
pub mod measures;
pub mod minimax;
pub mod normal;
pub mod numeric;
pub mod verify;

pub use channel::{Channel, Classification, InputDist};
pub use error::{Error, ErrorKind, Result};
