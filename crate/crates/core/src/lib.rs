//! Numerical toolkit for magnetic surface helicity on toroidal surfaces.
//!
//! The crate computes, on VMEC-style double-Fourier tori:
//! - quadrature grids with exact tangent frames and normal-offset surfaces;
//! - the harmonic basis normalised by canonical period conditions, Hodge
//!   projection and surface differential operators;
//! - the tangentially projected surface Biot-Savart operator, helicity and
//!   cross-helicity, the 2x2 harmonic-sector matrix and its eigenfields;
//! - field-line tracing, asymptotic winding numbers and the rotational
//!   transform by both the surface-integral formula and transit counting;
//! - Gauss linking numbers and a Monte-Carlo verification of helicity as
//!   average asymptotic linking of field lines;
//! - divergence-free sheet currents on a coil winding surface with the
//!   zero-average-toroidal-winding ("simple") constraint and Tikhonov
//!   target-field solves.

pub mod biot_savart;
pub mod calculus;
pub mod coil;
pub mod curves;
pub mod error;
pub mod fields;
pub mod geometry;
pub mod harmonic;
pub mod helicity;
pub mod linking;
pub mod math;
pub mod neumann;
pub mod ode;
pub mod spectral;
pub mod tolerances;
pub mod windings;

pub use error::{Error, ErrorClass, Result};
