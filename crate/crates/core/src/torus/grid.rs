use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

const TWO_PI: f64 = 2.0 * PI;

struct Plans {
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    padded_forward: Arc<dyn Fft<f64>>,
    padded_inverse: Arc<dyn Fft<f64>>,
}

/// Uniform periodic grid on `[0, 2π)` with cached transform plans.
///
/// Cloning is cheap; the plans are shared.
#[derive(Clone)]
pub struct TorusGrid {
    n: usize,
    plans: Arc<Plans>,
}

impl TorusGrid {
    pub fn new(n_points: usize) -> Result<Self> {
        if n_points < 8 || !n_points.is_multiple_of(2) {
            return Err(Error::InvalidGrid(format!(
                "need an even number of points >= 8, got {n_points}"
            )));
        }
        let mut planner = FftPlanner::new();
        let padded = 3 * n_points / 2;
        let plans = Plans {
            forward: planner.plan_fft_forward(n_points),
            inverse: planner.plan_fft_inverse(n_points),
            padded_forward: planner.plan_fft_forward(padded),
            padded_inverse: planner.plan_fft_inverse(padded),
        };
        Ok(Self {
            n: n_points,
            plans: Arc::new(plans),
        })
    }

    pub fn n_points(&self) -> usize {
        self.n
    }

    pub fn spacing(&self) -> f64 {
        TWO_PI / self.n as f64
    }

    pub fn node(&self, j: usize) -> f64 {
        j as f64 * self.spacing()
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.n).map(|j| self.node(j)).collect()
    }

    /// Highest resolved wavenumber (the Nyquist mode).
    pub fn nyquist(&self) -> usize {
        self.n / 2
    }

    /// Signed wavenumber stored at transform index `k`.
    pub fn wavenumber(&self, k: usize) -> i64 {
        if k <= self.n / 2 {
            k as i64
        } else {
            k as i64 - self.n as i64
        }
    }

    /// Transform index holding wavenumber `z`, if it is resolved on this grid.
    pub fn index_of(&self, z: i64) -> Option<usize> {
        let half = (self.n / 2) as i64;
        if z > half || z <= -half {
            None
        } else if z >= 0 {
            Some(z as usize)
        } else {
            Some((z + self.n as i64) as usize)
        }
    }

    /// Coefficients `c_k` with `f(x_j) = Σ_k c_k e^{i k x_j}`.
    pub(crate) fn forward(&self, values: &[f64]) -> Vec<Complex64> {
        debug_assert_eq!(values.len(), self.n);
        let mut buf: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.plans.forward.process(&mut buf);
        let scale = 1.0 / self.n as f64;
        for c in &mut buf {
            *c *= scale;
        }
        buf
    }

    pub(crate) fn inverse(&self, spectral: &[Complex64]) -> Vec<f64> {
        debug_assert_eq!(spectral.len(), self.n);
        let mut buf = spectral.to_vec();
        self.plans.inverse.process(&mut buf);
        buf.into_iter().map(|c| c.re).collect()
    }

    /// Product of two band-limited functions with 3/2 zero padding; the
    /// result is truncated back to this grid with the Nyquist mode cleared.
    pub(crate) fn dealiased_product(&self, a: &[Complex64], b: &[Complex64]) -> Vec<Complex64> {
        let m = 3 * self.n / 2;
        let pad = |src: &[Complex64]| {
            let mut out = vec![Complex64::new(0.0, 0.0); m];
            for (k, &c) in src.iter().enumerate() {
                let z = self.wavenumber(k);
                if z.unsigned_abs() as usize == self.n / 2 {
                    continue;
                }
                let idx = if z >= 0 { z as usize } else { (z + m as i64) as usize };
                out[idx] = c;
            }
            self.plans.padded_inverse.process(&mut out);
            out
        };
        let pa = pad(a);
        let pb = pad(b);
        let mut prod: Vec<Complex64> = pa
            .iter()
            .zip(&pb)
            .map(|(x, y)| Complex64::new(x.re * y.re, 0.0))
            .collect();
        self.plans.padded_forward.process(&mut prod);
        let scale = 1.0 / m as f64;
        let mut out = vec![Complex64::new(0.0, 0.0); self.n];
        for (k, slot) in out.iter_mut().enumerate() {
            let z = self.wavenumber(k);
            if z.unsigned_abs() as usize == self.n / 2 {
                continue;
            }
            let idx = if z >= 0 { z as usize } else { (z + m as i64) as usize };
            *slot = prod[idx] * scale;
        }
        out
    }
}

impl PartialEq for TorusGrid {
    fn eq(&self, other: &Self) -> bool {
        self.n == other.n
    }
}

impl fmt::Debug for TorusGrid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TorusGrid").field("n_points", &self.n).finish()
    }
}

/// Reduce an angle into `[0, 2π)`.
pub fn wrap(x: f64) -> f64 {
    let r = x.rem_euclid(TWO_PI);
    // rem_euclid can round up to exactly 2π for tiny negative inputs
    if r >= TWO_PI {
        0.0
    } else {
        r
    }
}
