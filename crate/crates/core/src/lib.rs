//! Numerical laboratory for corotational wave maps on the wormhole
//! `ℝ × S³` with metric `dr² + (r²+1)dΩ²`.
//!
//! The crate is organized around the objects that can be computed and
//! cross-checked at desk scale:
//!
//! * [`numerics`] — shared kernels: adaptive ODE integration with dense
//!   output, bracketed bisection, quadrature, and power-law fitting.
//! * [`geometry`] — metric weights, energies, weighted norms, and the
//!   change of variables between the azimuth field ψ and the reduced
//!   field u = ⟨r⟩⁻¹(ψ − Q).
//! * [`harmonic`] — degree-n static solutions Q_n by shooting, their
//!   asymptotics, and the prescribed-asymptotics family built by Picard
//!   iteration.
//! * [`spectral`] — one-dimensional scattering: Jost solutions,
//!   Wronskians, zero-energy analysis, spectral-measure weights, the
//!   distorted Fourier transform, free-wave propagation, and the
//!   dispersive-decay probe.
//! * [`evolution`] — method-of-lines evolution of the nonlinear field
//!   equation, its u-form, the linearized equation, and flat radial
//!   waves.
//! * [`resolution`] — soliton-resolution diagnostics: local energy,
//!   radiation extraction, exterior-energy projections, and the λ/μ
//!   observables.
//! * [`acceptance`] — the aggregated acceptance suite with pinned
//!   tolerances, shared by `cargo test` and the CLI.

pub mod acceptance;
pub mod evolution;
pub mod geometry;
pub mod harmonic;
pub mod io;
pub mod numerics;
pub mod resolution;
pub mod spectral;
