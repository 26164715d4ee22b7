//! Numerical workbench for classical scattering of a charged particle in a
//! static electromagnetic field `(V, B)`.
//!
//! The crate simulates the Newton equation `ẍ = -∇V(x) + B(x)ẋ` from an
//! incoming free asymptote, extracts scattering data `(a_sc, b_sc)`, evaluates
//! the high-energy expansion functionals of the scattering map together with
//! their certified error bounds, and reconstructs `∇V` and `B` from synthetic
//! scattering data by X-ray transform inversion. A dedicated module builds the
//! two-dimensional pair of distinct magnetic fields that share the same
//! second-order position data, demonstrating the non-uniqueness of that
//! reconstruction route in the plane.
//!
//! Modules map onto the pipeline stages:
//!
//! * [`fields`] — analytic field families with exact derivatives, decay
//!   envelopes and structural validators,
//! * [`dynamics`] — adaptive trajectory integration and asymptote fitting,
//! * [`picard`] — the integral-operator (fixed-point) formulation with its
//!   contraction constants and thresholds,
//! * [`asymptotics`] — the limit functionals, finite-energy vectors and Born
//!   leading terms on oriented lines,
//! * [`xray`] — forward X-ray transform, sinograms, filtered backprojection,
//! * [`inversion`] — end-to-end reconstruction pipelines and error reports,
//! * [`counterexample`] — the planar non-uniqueness construction.

pub mod asymptotics;
pub mod counterexample;
pub mod dynamics;
pub mod error;
pub mod fields;
pub mod inversion;
pub mod io;
pub mod picard;
pub mod quad;
pub mod vec3;
pub mod xray;

pub use error::{Error, Result};
pub use fields::{Field, FieldSample};
pub use vec3::{Mat3, Vec3};
