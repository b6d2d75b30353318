//! Shape optimization of stellarator coil winding surfaces.
//!
//! A coil winding surface (CWS) is a closed toroidal surface `S` carrying a
//! divergence-free sheet current `j`. For a fixed plasma boundary and target
//! normal field, the toolkit
//!
//! 1. solves the Tikhonov-regularized least-squares problem
//!    `C(S) = min_j ||BS_S j - B_T||^2 + lambda ||j||^2` for the optimal
//!    current potential at fixed shape ([`inverse`]),
//! 2. evaluates the exact derivative of `C` (plus geometric penalties on
//!    perimeter, plasma distance and reach) with respect to the Fourier
//!    coefficients of the surface ([`shape_gradient`], [`penalties`]),
//! 3. drives a dense BFGS descent over those coefficients ([`optim`]).
//!
//! Surfaces are truncated double Fourier series in stellarator-symmetric
//! form ([`surfaces`]); currents come from a scalar potential on the flat
//! torus pushed forward through the parametrization ([`currents`]); the
//! Biot-Savart kernel is `K(x,y) = (x-y)/|x-y|^3` with no `mu_0/4pi`
//! prefactor, so computed fields satisfy `circulation = 4 pi I_enclosed`
//! ([`biot_savart`]).
//!
//! All operations are pure functions of immutable inputs. Parallel loops
//! write to disjoint slots or reduce in a fixed order, so results are
//! bit-reproducible independently of the worker count.

pub mod basis;
pub mod biot_savart;
pub mod config;
pub mod currents;
pub mod error;
pub mod geometry;
pub mod inverse;
pub mod io;
pub mod optim;
pub mod penalties;
pub mod shape_gradient;
pub mod surfaces;

pub use error::CoreError;

/// Convenience alias used throughout: 3-vectors in meters / amperes-per-meter.
pub type Vec3 = nalgebra::Vector3<f64>;
/// 3x3 real matrices (per-point tensors such as `X2`).
pub type Mat3 = nalgebra::Matrix3<f64>;
