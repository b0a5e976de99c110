//! Distributed-MIMO downlink simulator with integrated phase-coherent
//! multistatic imaging.
//!
//! The crate models a network of access points (APs) that jointly serve
//! single-antenna UEs while a subset of them (the Rx APs) forms a coherent
//! back-projection image of a region of interest from AP-specific sensing
//! waveforms superposed on the precoded data.

// `!(x > 0.0)` is used on purpose to reject NaN in parameter checks.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod channel;
pub mod error;
pub mod experiment;
pub mod grid;
pub mod imaging;
pub mod metrics;
pub mod pipeline;
pub mod precoding;
pub mod receive;
pub mod scenario;
pub mod selection;
pub mod validation;
pub mod waveform;

pub use error::{Error, Result};
pub use grid::{GridConfig, C64};
