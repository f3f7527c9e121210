//! Core library for a periodic multi-source status-update system served by a
//! single shared transmitter under a randomized scheduling policy.
//!
//! The crate is organized around four layers:
//!
//! * [`model`]: system parameters, meaning the sampling period, service-time
//!   models with closed-form log-MGFs, scheduling weight vectors, and
//!   per-source violation targets.
//! * [`simulator`]: an event-driven simulator producing peak-age samples and
//!   per-update decomposition records that can be audited against the waiting
//!   time recursion.
//! * [`wallenius`]: the probability that a weighted without-replacement
//!   draw selects a given subset first (three interchangeable backends:
//!   adaptive quadrature, a saddlepoint approximation, and an exact
//!   enumeration oracle).
//! * [`bounds`] / [`designer`]: analytical tail bounds built on the above,
//!   and weight-design algorithms that invert those bounds against
//!   per-source violation targets.

pub mod bounds;
pub mod designer;
pub mod model;
mod numeric;
pub mod simulator;
pub mod wallenius;
