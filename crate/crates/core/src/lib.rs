//! Exact-rational constructions around rearranging conditionally convergent
//! series: Riemann-style rearrangements, oscillating rearrangements built
//! from a bracketing, the BD-N example series, and the instrumented series
//! that turns a tail bound into a structural certificate.
//!
//! Everything is single-threaded. Streams, permutations and schedules share
//! memo tables through `Rc<RefCell<..>>`, so none of the types are `Send`.

// Errors carry the exact rationals that broke a certificate; they are only
// built on failure paths, so their size is not worth boxing away.
#![allow(clippy::result_large_err, clippy::type_complexity)]

pub mod error;
pub mod exact_core;

pub use error::{Result, SeriesError};
pub use exact_core::*;

pub mod demo;
pub mod oracles;
pub mod rearrange;
pub mod oscillate;
pub mod bdn;
pub mod instrument;
pub mod cli;
