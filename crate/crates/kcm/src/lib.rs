//! Simulation and verification toolkit for kinetically constrained models
//! (KCMs) with general update families in dimensions 1 and 2.
//!
//! The crate is organised around six subsystems:
//!
//! * [`family`] — exact algebra of update families: range, stable directions
//!   as rational arcs on the circle, and the supercritical / critical /
//!   subcritical classification. All predicates use integer arithmetic only.
//! * [`bootstrap`] — deterministic bootstrap percolation closure and the
//!   constructive search for local-spread certificates.
//! * [`harris`] — the Harris graphical construction: labelled Poisson clock
//!   logs, trajectory evolution, shared-clock coupling, and exact generator /
//!   detailed-balance checks on tiny systems.
//! * [`dual`] — backward dual paths, activation events, disagreement-path
//!   construction, codings and the reasonable-coding set.
//! * [`auxperc`] — the auxiliary oriented percolation process built from
//!   clock logs via a spread certificate, with transfer-of-zeroes checks and
//!   Monte Carlo estimators for bond and survival probabilities.
//! * [`lab`] — experiment harness: convergence measurements, exponential
//!   fits, stationarity checks and parallel replica execution.

pub mod auxperc;
pub mod bootstrap;
pub mod dual;
pub mod error;
pub mod family;
pub mod harris;
pub mod lab;
pub mod rng;
pub mod stats;

pub use error::KcmError;
pub use family::{Classification, ExactDirection, UpdateFamily, Vec2};
