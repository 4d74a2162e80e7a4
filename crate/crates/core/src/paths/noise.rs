use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::path::{heat_convolution_trajectory, SampledPath};
use crate::error::{Error, Result};

/// Parametric eigenvalue law `λ_z = c|z|^{-p}` for `z ≠ 0`, `λ_0 = c`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecayLaw {
    pub c: f64,
    pub p: f64,
}

/// Eigenvalues `λ_z` of the noise on modes `|z| ≤ m`.
#[derive(Clone, Debug, PartialEq)]
pub struct NoiseSpec {
    m: usize,
    // index z + m
    lambdas: Vec<f64>,
    decay: Option<DecayLaw>,
}

impl NoiseSpec {
    /// Explicit list for modes `-m..=m` (length `2m + 1`).
    pub fn explicit(lambdas: Vec<f64>) -> Result<Self> {
        if lambdas.len() % 2 != 1 {
            return Err(Error::InvalidParameter(format!(
                "lambda list must have odd length 2m+1, got {}",
                lambdas.len()
            )));
        }
        if lambdas.iter().any(|&l| !(l >= 0.0) || !l.is_finite()) {
            return Err(Error::InvalidParameter("eigenvalues must be finite and >= 0".into()));
        }
        if lambdas.iter().all(|&l| l == 0.0) {
            return Err(Error::InvalidParameter("eigenvalues are identically zero".into()));
        }
        Ok(Self {
            m: lambdas.len() / 2,
            lambdas,
            decay: None,
        })
    }

    pub fn parametric(c: f64, p: f64, m: usize) -> Result<Self> {
        if !(c > 0.0) || !(p >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "decay law needs c > 0 and p >= 0, got c={c}, p={p}"
            )));
        }
        let law = DecayLaw { c, p };
        let lambdas = (-(m as i64)..=m as i64).map(|z| law_value(&law, z)).collect();
        Ok(Self {
            m,
            lambdas,
            decay: Some(law),
        })
    }

    /// No forcing at all on modes `|z| ≤ m`.
    pub fn zero(m: usize) -> Self {
        Self {
            m,
            lambdas: vec![0.0; 2 * m + 1],
            decay: None,
        }
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn decay(&self) -> Option<DecayLaw> {
        self.decay
    }

    pub fn lambda(&self, z: i64) -> f64 {
        if z.unsigned_abs() as usize > self.m {
            0.0
        } else {
            self.lambdas[(z + self.m as i64) as usize]
        }
    }

    pub fn is_zero(&self) -> bool {
        self.lambdas.iter().all(|&l| l == 0.0)
    }

    /// Modes with nonzero eigenvalue, in increasing `z`.
    pub fn active_modes(&self) -> Vec<(i64, f64)> {
        (-(self.m as i64)..=self.m as i64)
            .map(|z| (z, self.lambda(z)))
            .filter(|&(_, l)| l != 0.0)
            .collect()
    }

    /// Same eigenvalues, restricted to `|z| ≤ m`.
    pub fn truncate(&self, m: usize) -> NoiseSpec {
        let m = m.min(self.m);
        NoiseSpec {
            m,
            lambdas: (-(m as i64)..=m as i64).map(|z| self.lambda(z)).collect(),
            decay: self.decay,
        }
    }
}

fn law_value(law: &DecayLaw, z: i64) -> f64 {
    if z == 0 {
        law.c
    } else {
        law.c * (z.unsigned_abs() as f64).powf(-law.p)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DecayReport {
    pub accepted: bool,
    /// `(L, Σ_{|z|≤L} λ_z² |z|^{4δ})` for `L = 1, 2, 4, …`.
    pub partial_sums: Vec<(u64, f64)>,
}

/// Summability test for `Σ λ_z² |z|^{4δ}`.
pub fn eigenvalue_decay_check(spec: &NoiseSpec, delta: f64) -> Result<DecayReport> {
    if !(delta > 0.0 && delta < 0.5) {
        return Err(Error::InvalidParameter(format!(
            "delta must lie in (0, 1/2), got {delta}"
        )));
    }
    let weight = |z: i64| (z.unsigned_abs() as f64).powf(4.0 * delta);
    let mut partial_sums = Vec::new();
    match spec.decay {
        Some(law) => {
            let mut acc = law.c * law.c * weight(0);
            let mut z_done = 0u64;
            for k in 0..=20 {
                let l = 1u64 << k;
                for z in z_done + 1..=l {
                    let lam = law_value(&law, z as i64);
                    acc += 2.0 * lam * lam * weight(z as i64);
                }
                z_done = l;
                partial_sums.push((l, acc));
            }
            Ok(DecayReport {
                accepted: 2.0 * law.p - 4.0 * delta > 1.0,
                partial_sums,
            })
        }
        None => {
            let mut l = 1u64;
            loop {
                let s: f64 = (-(l as i64)..=l as i64)
                    .map(|z| spec.lambda(z).powi(2) * weight(z))
                    .sum();
                partial_sums.push((l, s));
                if l as usize >= spec.m.max(1) {
                    break;
                }
                l *= 2;
            }
            Ok(DecayReport {
                accepted: true,
                partial_sums,
            })
        }
    }
}

/// `sup_t Σ_{|z|≥L} z² λ_z² |I_z(t)|²` with `I_z` the heat convolution of mode `z`'s path.
pub fn tail_remainder(
    spec: &NoiseSpec,
    paths: &BTreeMap<i64, SampledPath>,
    cutoff: u64,
    times: &[f64],
) -> Result<f64> {
    let mut totals = vec![0.0; times.len()];
    for (&z, path) in paths {
        if z.unsigned_abs() < cutoff {
            continue;
        }
        let lam = spec.lambda(z);
        if lam == 0.0 {
            continue;
        }
        let w = (z * z) as f64 * lam * lam;
        for (acc, i) in totals.iter_mut().zip(heat_convolution_trajectory(z, path, times)) {
            *acc += w * i * i;
        }
    }
    if totals.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite(f64::NAN));
    }
    Ok(totals.into_iter().fold(0.0, f64::max))
}
