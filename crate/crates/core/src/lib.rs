//! Finite-section linearization of nonlinear dynamical systems with
//! (quasi-)periodic vector fields.
//!
//! Two lifting routes are provided: the classical Carleman linearization
//! onto state monomials and the Carleman-Fourier linearization onto
//! complex exponentials of an extended state, which yields a sparse
//! block-upper-triangular operator. The crate also carries a
//! high-accuracy reference integrator, the convergence-bound machinery
//! (T0, N0, theorem bounds), clipped log-error metrics, and Kuramoto
//! model constructors used throughout the test and sweep drivers.

pub mod analysis;
pub mod carleman_classical;
pub mod carleman_fourier;
pub mod fourier_field;
pub mod integrate;
pub mod kuramoto;

pub use num_complex::Complex64;

pub use analysis::{BoundParams, ErrorMetric, ErrorSurface};
pub use carleman_classical::ClassicalSystem;
pub use carleman_fourier::{BlockMatrix, LiftedSystem, MultiIndexTable};
pub use fourier_field::{
    DecayEnvelope, ExtendedField, FourierField1D, MaclaurinCoeffs, QuasiPeriodicField,
};
pub use integrate::{TimeGrid, Trajectory};
pub use kuramoto::{KuramotoModel, NormalizedKuramoto};
