//! Reference computations for checking the solver crates.
//!
//! Everything here is written for clarity rather than speed and shares no
//! code with `grbm-amp`: integrals use adaptive Gauss–Kronrod quadrature, RBM
//! marginals use brute-force enumeration of hidden states, and the AMP
//! reference is a straight transcription of the update rules on nested
//! `Vec`s.

pub mod amp_reference;
pub mod enumerate;
pub mod quad;

pub use enumerate::{enumerate_marginals, Marginals};
pub use quad::{integrate, log_integrate, tilted_unit, Tilted, Unit};
