// Quadrature tables and frozen reference values keep every digit of
// their sources, and `!(x > 0.0)`-style guards deliberately reject NaN
// along with the out-of-range values.
#![allow(clippy::excessive_precision, clippy::neg_cmp_op_on_partial_ord)]

//! Physics and analysis library for single-photon collection through
//! optical nanofibers.
//!
//! The crate covers the full chain from waveguide electromagnetics to
//! detector records: exact vectorial modes of a step-index cylinder
//! ([`fiber_modes`]), spontaneous-emission coupling of a nearby dipole into
//! those modes ([`dipole_coupling`]), adiabaticity analysis of fiber tapers
//! ([`taper_design`]), stochastic emission and background simulation
//! ([`emitter_sim`]), correlation and fitting of time-tag streams
//! ([`photon_analysis`]), and a compact binary/CSV time-tag format
//! ([`timetag_io`]).

pub mod dipole_coupling;
pub mod emitter_sim;
pub mod error;
pub mod fiber_modes;
pub mod numerics;
pub mod photon_analysis;
pub mod taper_design;
pub mod timetag_io;

pub use error::{CoreError, Result};
