use std::fmt;
use std::str::FromStr;

use crate::error::Error;
use crate::torus::{basis_eval, Field};

/// Test functions for weak pairings `⟨f, ρ⟩`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum TestFunction {
    /// Basis element `e_z`.
    Basis(i64),
    /// `f ≡ 1`.
    One,
    /// `exp(cos x)`.
    ExpCos,
}

impl TestFunction {
    pub fn eval(&self, x: f64) -> f64 {
        match *self {
            TestFunction::Basis(z) => basis_eval(z, x),
            TestFunction::One => 1.0,
            TestFunction::ExpCos => x.cos().exp(),
        }
    }

    /// `∫ f ρ` on the grid.
    pub fn pair_field(&self, rho: &Field) -> f64 {
        match self {
            TestFunction::One => rho.integral(),
            f => rho.pair_fn(|x| f.eval(x)),
        }
    }
}

impl fmt::Display for TestFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TestFunction::Basis(z) => write!(f, "e{z}"),
            TestFunction::One => write!(f, "one"),
            TestFunction::ExpCos => write!(f, "expcos"),
        }
    }
}

impl FromStr for TestFunction {
    type Err = Error;

    /// Accepts `one`, `expcos` and `e<z>` such as `e1`, `e-1`, `e0`.
    fn from_str(s: &str) -> Result<Self, Error> {
        let s = s.trim();
        match s {
            "one" | "1" => Ok(TestFunction::One),
            "expcos" => Ok(TestFunction::ExpCos),
            _ => s
                .strip_prefix('e')
                .and_then(|z| z.parse::<i64>().ok())
                .map(TestFunction::Basis)
                .ok_or_else(|| Error::Parse(format!("unknown test function {s:?}"))),
        }
    }
}
