//! Normal forms and Fermi golden rule diagnostics for the forced cubic NLS
//! `i u_t = (-Delta + V + c) u + gamma(t) |u|^2 u` on a periodic box.

// `!(x > 0.0)` is used on purpose so NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod algebra;
pub mod birkhoff;
pub mod dynamics;
pub mod error;
pub mod fgr;
pub mod pipeline;
pub mod resonance;
pub mod spectral;

pub use error::{Error, Result};
pub use num_complex::Complex64 as C64;
