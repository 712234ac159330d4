//! Rigidity and global-rigidity certificates for periodic frameworks given by
//! their quotient ℤᵈ-gain graphs.
//!
//! The usual flow: build a [`GainGraph`], place it with a [`Realization`],
//! then ask [`certify`] for a super-stability certificate or a randomized
//! generic test, or ask [`optimize`] for the unit-volume energy minimizer.

pub mod certify;
pub mod construct;
pub mod error;
pub mod framework;
pub mod gain_graph;
pub mod io;
pub mod linalg;
pub mod optimize;
pub mod stress;
pub mod svg;

pub use certify::{Certificate, Verdict};
pub use error::{Error, Result};
pub use framework::Realization;
pub use gain_graph::{GainEdge, GainGraph, Marking};
pub use linalg::Tolerances;
