//! Quasistatic evolution of gradient damage with fatigue in antiplane shear.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod diagnostics;
pub mod energy;
pub mod error;
pub mod evolution;
pub mod fe;
pub mod laws;
pub mod mesh;
pub mod oracle;
pub mod rescaling;
pub mod sparse;
pub mod step;
pub mod variation;
