use std::f64::consts::PI;

use super::field::Field;
use super::grid::TorusGrid;
use crate::error::{Error, Result};

const TWO_PI: f64 = 2.0 * PI;

/// Orthonormal real Fourier basis on the circle.
///
/// `sin(zx)/√π` for `z > 0`, `1/√(2π)` for `z = 0`, `cos(zx)/√π` for `z < 0`.
pub fn basis_eval(z: i64, x: f64) -> f64 {
    match z {
        0 => 1.0 / TWO_PI.sqrt(),
        z if z > 0 => (z as f64 * x).sin() / PI.sqrt(),
        z => (z as f64 * x).cos() / PI.sqrt(),
    }
}

/// Largest value of `|e_z|` on the circle.
pub fn basis_sup(z: i64) -> f64 {
    if z == 0 {
        1.0 / TWO_PI.sqrt()
    } else {
        1.0 / PI.sqrt()
    }
}

/// `log I₀(u)` for the modified Bessel function of the first kind.
pub fn bessel_i0_log(u: f64) -> Result<f64> {
    if !(u > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "bessel_i0_log needs u > 0, got {u}"
        )));
    }
    if u <= 20.0 {
        let q = 0.25 * u * u;
        let mut term = 1.0;
        let mut sum = 1.0;
        let mut k = 1.0;
        loop {
            term *= q / (k * k);
            sum += term;
            if term < 1e-17 * sum {
                break;
            }
            k += 1.0;
        }
        Ok(sum.ln())
    } else {
        // Hankel expansion  e^u / √(2πu) · Σ ((2k-1)!!)² / (k! 8^k u^k),
        // summed while the terms keep shrinking.
        let mut term = 1.0;
        let mut sum = 1.0;
        let mut k = 1.0f64;
        loop {
            let next = term * (2.0 * k - 1.0).powi(2) / (8.0 * k * u);
            if next >= term || next < 1e-17 {
                if next < term {
                    sum += next;
                }
                break;
            }
            term = next;
            sum += term;
            k += 1.0;
        }
        Ok(u - 0.5 * (TWO_PI * u).ln() + sum.ln())
    }
}

/// Von Mises mollifier with concentration `1/ε`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MollifierParam {
    epsilon: f64,
    log_i0: f64,
}

impl MollifierParam {
    pub fn new(epsilon: f64) -> Result<Self> {
        if !(epsilon > 0.0) || !epsilon.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "mollifier epsilon must be positive, got {epsilon}"
            )));
        }
        Ok(Self {
            epsilon,
            log_i0: bessel_i0_log(1.0 / epsilon)?,
        })
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn eval(&self, x: f64) -> f64 {
        mollifier_eval(self, x)
    }

    /// `log Φ_ε(x)`.
    pub fn log_eval(&self, x: f64) -> f64 {
        x.cos() / self.epsilon - TWO_PI.ln() - self.log_i0
    }

    pub fn field(&self, grid: &TorusGrid) -> Field {
        Field::from_fn(grid, |x| self.eval(x))
    }

    /// `m_ε = min Φ_ε = Φ_ε(π)`, evaluated like [`Self::eval`] so the floor
    /// also holds in floating point.
    pub fn lower_bound(&self) -> f64 {
        self.eval(std::f64::consts::PI)
    }

    /// `M_ε = max Φ_ε = Φ_ε(0)`.
    pub fn upper_bound(&self) -> f64 {
        self.eval(0.0)
    }

    /// `D_ε ≥ max |Φ_ε'|`.
    pub fn derivative_bound(&self) -> f64 {
        self.upper_bound() / self.epsilon
    }
}

/// `Φ_ε(x) = exp(cos x / ε) / (2π I₀(1/ε))`.
pub fn mollifier_eval(p: &MollifierParam, x: f64) -> f64 {
    if p.epsilon < 0.2 {
        p.log_eval(x).exp()
    } else {
        (x.cos() / p.epsilon).exp() / (TWO_PI * p.log_i0.exp())
    }
}

/// Lipschitz-1 truncation: identity on `[-M, M]`, zero outside `(-2M, 2M)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CutoffParam {
    m: f64,
}

impl CutoffParam {
    pub fn new(m: f64) -> Result<Self> {
        if !(m > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "cutoff level must be positive, got {m}"
            )));
        }
        Ok(Self { m })
    }

    pub fn level(&self) -> f64 {
        self.m
    }

    pub fn apply(&self, a: f64) -> f64 {
        cutoff(self, a)
    }
}

pub fn cutoff(p: &CutoffParam, a: f64) -> f64 {
    let m = p.m;
    let r = a.abs();
    if r <= m {
        a
    } else if r < 2.0 * m {
        a.signum() * (2.0 * m - r)
    } else {
        0.0
    }
}
