//! Spectral analysis of -alpha u''(x) - u''(-x) + p(x) u(x) + q(x) u(-x) = lambda u(x)
//! on (-1, 1): reduction to a matrix Sturm-Liouville problem, solutions and Weyl
//! data, characteristic functions and their zeros, Hadamard reconstruction,
//! coefficient fitting from spectra, and a first-order reduction.

pub mod cli;
pub mod error;
pub mod first_order;
pub mod hadamard;
pub mod inverse;
pub mod linalg;
pub mod ode;
pub mod par;
pub mod problem;
pub mod spectral;
pub mod verify;

pub use error::{Error, Result};
pub use num_complex::Complex64;
