//! Decides whether surfaces in a two-parameter family of degree-4 del Pezzo
//! surfaces violate the Hasse principle through a Brauer-Manin obstruction,
//! and computes the densities and analytic constants that govern how often
//! that happens.
//!
//! The family is cut out in P^4 by the two quadrics
//!
//! ```text
//! Q1 = t2^2 - D t3^2 - t0 t1
//! Q2 = t2^2 - D t4^2 - (t0 + A t1)(t0 + B t1)
//! ```
//!
//! with `D > 1` squarefree, `D = 1 (mod 8)`, and integer parameters `(A, B)`.
//!
//! Module layout, bottom up:
//! * [`arith`] - exact integer arithmetic: Kronecker/Hilbert symbols, p-adic
//!   valuations and squares, deterministic factorization.
//! * [`surface`] - the family itself: smoothness, quadric evaluation,
//!   Jacobians, degeneracy sentinels.
//! * [`localsolve`] - p-adic solubility by bounded lifting with Hensel
//!   certificates, and evaluation of the quaternion class on local points.
//! * [`brauer`] - closed-form constancy criteria, admissibility of parameters,
//!   and the final verdict pipeline.
//! * [`density`] - counting scans, local densities via residue-class trees,
//!   and the sigma density function with its mean values.
//! * [`analytic`] - high-precision Euler products, L-values and the leading
//!   constants of the counting asymptotics.
//! * [`selftest`] - fast end-to-end consistency checks for the CLI.

pub mod analytic;
pub mod arith;
pub mod brauer;
pub mod density;
pub mod localsolve;
pub mod selftest;
pub mod surface;
