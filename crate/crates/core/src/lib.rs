//! Temporally correlated quantum noise from ARMA models mapped onto CPTP
//! channels through Stiefel-manifold exponentials.

pub mod arma;
pub mod circuit;
pub mod quantum;
pub mod schwarma;
pub mod trotter;
pub mod experiments;
pub mod error;
pub mod io;
pub mod linalg;
pub mod rng;

pub use error::{Error, Result};
