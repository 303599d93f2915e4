//! Numerical evaluation of extended Airy, Pearcey and sine kernels by complex
//! contour quadrature, together with their complete asymptotic expansions in
//! the Airy-to-sine and Pearcey-to-sine regimes.

pub mod cseries;
pub mod error;
pub mod expansion;
pub mod kernels;
pub mod phase;
pub mod quadrature;
pub mod verify;

mod special;

pub use error::{Error, Result};
pub use num_complex::Complex64 as C64;

pub(crate) const I: C64 = C64::new(0.0, 1.0);
