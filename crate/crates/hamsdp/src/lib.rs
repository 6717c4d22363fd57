//! Semidefinite programming bounds for error-correcting and covering codes in
//! the Hamming space.

pub mod bounds_code;
pub mod bounds_covering;
pub mod certify;
pub mod cli;
pub mod combinatorics;
pub mod error;
pub mod report;
pub mod sdp;
pub mod selftest;
pub mod terwilliger;

pub use error::{Error, Result};
