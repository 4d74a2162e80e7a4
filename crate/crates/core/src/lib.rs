// `!(x > 0.0)` guards deliberately reject NaN as well.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod harness;
pub mod metrics;
pub mod particles;
pub mod pde;
pub mod paths;
pub mod torus;

pub use error::{Error, Result};
pub use torus::{BandEvaluator, CutoffParam, Field, MollifierParam, TorusGrid};
