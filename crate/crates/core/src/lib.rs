//! Learning Green's functions of linear elliptic operators from forcing and
//! solution pairs.

// `!(a < b)` comparisons reject NaN on purpose.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
#![allow(clippy::needless_range_loop)]

pub mod cli;
pub mod error;
pub mod gp;
pub mod hs;
pub mod io;
pub mod linalg;
pub mod pipeline;
pub mod pde;
pub mod rational;
pub mod rng;
pub mod rsvd;

pub use error::{Error, Result};
