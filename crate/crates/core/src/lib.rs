//! Estimation and testing for latent structure random graphs.
//!
//! A latent structure graph is a random dot product graph whose latent
//! positions lie on a one-dimensional curve. This crate samples such graphs,
//! recovers latent positions by adjacency spectral embedding, estimates the
//! support curve and the distribution along it, and runs two-sample tests.

pub mod cli;
pub mod curve;
pub mod distribution;
pub mod error;
pub mod graph;
pub mod hypothesis;
pub mod inference;
pub mod io;
pub mod linalg;
pub mod manifold;
pub mod rng;
pub mod spectral;

pub use error::{Error, Result};
