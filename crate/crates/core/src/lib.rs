//! Continuous-space electromagnetic channel simulation.

// Negated float comparisons are used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
// Index loops read closer to the component formulas than zipped iterators.
#![allow(clippy::needless_range_loop)]

pub mod capacity;
pub mod channel_stats;
pub mod cli;
pub mod config;
pub mod error;
pub mod geom;
pub mod green;
pub mod optim;
pub mod quadrature;
pub mod scatter;
pub mod specfun;
pub mod stochastic_env;
pub mod swf;

pub use error::{Error, Result};
