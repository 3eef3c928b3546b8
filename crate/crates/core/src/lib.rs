//! Antenna-array EIRP synthesis and link-level evaluation for a 5G NR gNB.
//!
//! The crate models an active antenna panel (element, subarray, panel),
//! enumerates the Type I single-panel precoding codebook, synthesizes 3D
//! EIRP patterns, selects codebook subsets that keep radiation toward a
//! protected direction low, and measures what those subsets cost a UE with a
//! Monte-Carlo MIMO downlink simulator.
//!
//! ```text
//! geometry -> codebook -> radiation -> nulling / statistics
//!                 \                        |
//!                  channel ----------> linksim
//! ```

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod channel;
pub mod codebook;
pub mod error;
pub mod geometry;
pub mod linksim;
pub mod nulling;
pub mod radiation;
pub mod rng;
pub mod statistics;

pub use error::{Error, Result};

pub use num_complex::Complex64;
