//! Fading numbers of multiple-input single-output (MISO) fading channels with memory.
//!
//! The fading number is the constant term in the high-SNR capacity expansion
//! `C(SNR) = log log SNR + chi + o(1)`. This crate computes
//!
//! * closed forms for Gaussian fading ([`fading_number`]),
//! * upper and lower bound brackets for general regular fading laws, both on an
//!   analytic Gaussian path and on a Monte Carlo / k-nearest-neighbour path ([`bounds`]),
//! * high-SNR mutual-information trajectories of the beam-forming input
//!   ([`capacity_sim`]).
//!
//! All information quantities are in nats.

pub mod acceptance;
pub mod bounds;
pub mod capacity_sim;
pub mod cli;
pub mod error;
pub mod fading_number;
pub mod linalg;
pub mod oracles;
pub mod prediction;
pub mod process_models;
pub mod seeds;
pub mod special_functions;

pub use error::{Error, Result};
