//! Compressed-sensing reconstruction by approximate message passing with
//! factorized spike-and-slab priors or a generalized RBM prior.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod amp;
pub mod data;
pub mod error;
pub mod experiment;
pub mod model_io;
pub mod prior;
pub mod special;
pub mod tap;
pub mod training;

pub use amp::{reconstruct, CsInstance, PriorMode, SolverOptions};
pub use error::{Error, Result};
pub use prior::{Moments, Prior, TiltedField};
pub use tap::{Grbm, TapOptions};
