//! Periodic grid functions on the circle `[0, 2π)`.

mod field;
mod grid;
mod kernels;

pub use field::{BandEvaluator, Field};
pub use grid::{wrap, TorusGrid};
pub use kernels::{
    basis_eval, basis_sup, bessel_i0_log, cutoff, mollifier_eval, CutoffParam, MollifierParam,
};
