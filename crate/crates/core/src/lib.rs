//! Simulator for distributed convex optimization with stabilized
//! proximal-point methods.
//!
//! The crate is organised around five layers:
//!
//! * [`problems`] generates synthetic client populations (quadratics,
//!   polyhedron feasibility, logistic regression), exposes per-client
//!   gradient oracles and estimates dissimilarity constants.
//! * [`subproblem`] builds the drift-corrected regularized local objectives
//!   and their inexactness (stopping) rules.
//! * [`local_solvers`] drives a local objective until its rule fires.
//! * [`algorithms`] holds the server-side round engines (S-DANE,
//!   Acc-S-DANE, DANE, FedProx, S-DANE-DL, stabilized proximal point).
//! * [`harness`] runs declarative experiments, records traces and compares
//!   them.
//!
//! [`sampling`] provides uniform client sampling and its exact
//! enumeration oracle.

pub mod algorithms;
pub mod error;
pub mod harness;
pub mod linalg;
pub mod local_solvers;
pub mod problems;
pub mod rng;
pub mod sampling;
pub mod subproblem;

pub use error::{Error, Result};
