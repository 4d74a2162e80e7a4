use crate::error::{Error, Result};
use crate::paths::RngStreams;
use crate::torus::{wrap, CutoffParam, MollifierParam};

use super::law::InitialLaw;

/// Regularization levels of one particle system.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SystemParams {
    pub mollifier: MollifierParam,
    pub cutoff: CutoffParam,
    /// Number of linear segments of the approximating driving path.
    pub kappa: usize,
    /// Highest noise mode kept.
    pub m: usize,
}

impl SystemParams {
    pub fn new(epsilon: f64, m_cutoff: f64, kappa: usize, modes: usize) -> Result<Self> {
        if kappa == 0 {
            return Err(Error::InvalidParameter("kappa must be at least 1".into()));
        }
        Ok(Self {
            mollifier: MollifierParam::new(epsilon)?,
            cutoff: CutoffParam::new(m_cutoff)?,
            kappa,
            m: modes,
        })
    }
}

/// Positions on the circle and real weights of `N` particles.
#[derive(Clone, Debug, PartialEq)]
pub struct ParticleEnsemble {
    positions: Vec<f64>,
    weights: Vec<f64>,
    params: SystemParams,
    time: f64,
}

impl ParticleEnsemble {
    pub fn new(positions: Vec<f64>, weights: Vec<f64>, params: SystemParams) -> Result<Self> {
        if positions.is_empty() {
            return Err(Error::InvalidParameter("ensemble needs at least one particle".into()));
        }
        if positions.len() != weights.len() {
            return Err(Error::SampleCountMismatch {
                left: positions.len(),
                right: weights.len(),
            });
        }
        if positions.iter().chain(&weights).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite(0.0));
        }
        Ok(Self {
            positions: positions.into_iter().map(wrap).collect(),
            weights,
            params,
            time: 0.0,
        })
    }

    pub(crate) fn advanced(&self, positions: Vec<f64>, weights: Vec<f64>, dt: f64) -> Result<Self> {
        if weights.iter().any(|v| !v.is_finite()) || positions.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite(self.time + dt));
        }
        Ok(Self {
            positions,
            weights,
            params: self.params,
            time: self.time + dt,
        })
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn positions(&self) -> &[f64] {
        &self.positions
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn params(&self) -> &SystemParams {
        &self.params
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    /// `(1/N) Σ A^i f(X^i)`.
    pub fn pairing(&self, f: impl Fn(f64) -> f64) -> f64 {
        let s: f64 = self
            .positions
            .iter()
            .zip(&self.weights)
            .map(|(&x, &a)| a * f(x))
            .sum();
        s / self.len() as f64
    }

    /// `(1/N) Σ f(X^i)`, the unweighted empirical measure.
    pub fn position_pairing(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.positions.iter().map(|&x| f(x)).sum::<f64>() / self.len() as f64
    }

    pub fn mean_weight(&self) -> f64 {
        self.pairing(|_| 1.0)
    }
}

/// `N` i.i.d. draws from the initial law.
pub fn init_ensemble(
    law: &InitialLaw,
    n: usize,
    streams: &RngStreams,
    params: SystemParams,
) -> Result<ParticleEnsemble> {
    let (x, a) = law.sample(n, streams);
    ParticleEnsemble::new(x, a, params)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::particles::law::WeightLaw;
    use crate::torus::TorusGrid;

    fn params() -> SystemParams {
        SystemParams::new(0.2, 10.0, 16, 0).unwrap()
    }

    #[test]
    fn pairing_examples() {
        let e = ParticleEnsemble::new(vec![0.1; 4], vec![1.0; 4], params()).unwrap();
        assert_eq!(e.pairing(|_| 1.0), 1.0);
        let e = ParticleEnsemble::new(vec![0.0, 1.0, 2.0], vec![2.0, 0.0, 4.0], params()).unwrap();
        assert_eq!(e.pairing(|_| 1.0), 2.0);
    }

    #[test]
    fn validation() {
        assert!(ParticleEnsemble::new(vec![], vec![], params()).is_err());
        assert!(ParticleEnsemble::new(vec![0.0], vec![1.0, 2.0], params()).is_err());
        assert!(ParticleEnsemble::new(vec![0.0], vec![f64::NAN], params()).is_err());
        let e = ParticleEnsemble::new(vec![-0.5, 7.0], vec![1.0, 1.0], params()).unwrap();
        assert!(e.positions().iter().all(|x| (0.0..std::f64::consts::TAU).contains(x)));
    }

    #[test]
    fn init_is_deterministic() {
        let g = TorusGrid::new(32).unwrap();
        let law = InitialLaw::uniform(&g, WeightLaw::Normal { mean: 1.0, std: 0.1 }).unwrap();
        let a = init_ensemble(&law, 100, &RngStreams::new(3), params()).unwrap();
        let b = init_ensemble(&law, 100, &RngStreams::new(3), params()).unwrap();
        assert_eq!(a, b);
        let n = 100_000;
        let big = init_ensemble(&law, n, &RngStreams::new(4), params()).unwrap();
        assert!((big.mean_weight() - 1.0).abs() < 4.0 * 0.1 / (n as f64).sqrt());
    }
}
