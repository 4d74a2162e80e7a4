use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::paths::{RngStreams, StreamKind};
use crate::torus::{wrap, BandEvaluator, Field, TorusGrid};

const INITIAL_TAG: u64 = 0x1A1;

/// Marginal law of the initial weights.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum WeightLaw {
    Constant { value: f64 },
    Normal { mean: f64, std: f64 },
}

impl WeightLaw {
    pub fn mean(&self) -> f64 {
        match *self {
            WeightLaw::Constant { value } => value,
            WeightLaw::Normal { mean, .. } => mean,
        }
    }
}

/// Product initial law `ζ₀(x) dx ⊗ γ(da)` on the circle times the line.
#[derive(Clone, Debug)]
pub struct InitialLaw {
    zeta0: Field,
    weights: WeightLaw,
    sampler: BandEvaluator,
    bound: f64,
}

impl InitialLaw {
    /// `zeta0` is normalized to unit mass; its minimum must be positive.
    pub fn new(zeta0: Field, weights: WeightLaw) -> Result<Self> {
        let mass = zeta0.integral();
        if !(mass > 0.0) {
            return Err(Error::NonPositiveDensity {
                min: zeta0.min().0,
                x: zeta0.min().1,
            });
        }
        let zeta0 = zeta0.scale(1.0 / mass);
        let (min, x) = zeta0.min();
        if !(min > 0.0) {
            return Err(Error::NonPositiveDensity { min, x });
        }
        if let WeightLaw::Normal { std, .. } = weights {
            if !(std >= 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "weight standard deviation must be >= 0, got {std}"
                )));
            }
        }
        let sampler = zeta0.evaluator();
        // the interpolant can overshoot the nodal maximum slightly
        let bound = zeta0.max() * 1.05;
        Ok(Self {
            zeta0,
            weights,
            sampler,
            bound,
        })
    }

    pub fn uniform(grid: &TorusGrid, weights: WeightLaw) -> Result<Self> {
        Self::new(Field::constant(grid, 1.0 / TAU), weights)
    }

    /// `ζ₀ ∝ 1 + a cos x`, `|a| < 1`.
    pub fn tilted(grid: &TorusGrid, amplitude: f64, weights: WeightLaw) -> Result<Self> {
        Self::new(
            Field::from_fn(grid, |x| (1.0 + amplitude * x.cos()) / TAU),
            weights,
        )
    }

    pub fn zeta0(&self) -> &Field {
        &self.zeta0
    }

    pub fn weight_law(&self) -> WeightLaw {
        self.weights
    }

    /// `ρ₀(x) = ∫ a μ₀(x, da) = E[A₀] ζ₀(x)`.
    pub fn rho0(&self) -> Field {
        self.zeta0.scale(self.weights.mean())
    }

    /// Lower bound `η = min ζ₀`.
    pub fn eta(&self) -> f64 {
        self.zeta0.min().0
    }

    /// `n` i.i.d. draws `(X₀, A₀)`. Particle `i` uses its own substream, so
    /// the first `k` draws do not depend on `n`.
    pub fn sample(&self, n: usize, streams: &RngStreams) -> (Vec<f64>, Vec<f64>) {
        let seeds = streams.derive(INITIAL_TAG);
        let mut xs = Vec::with_capacity(n);
        let mut ws = Vec::with_capacity(n);
        for i in 0..n {
            let mut rng = seeds.substream(StreamKind::Particle(i as u64)).rng();
            let x = loop {
                let x = wrap(TAU * rng.uniform());
                let u = rng.uniform() * self.bound;
                if u <= self.sampler.eval(x) {
                    break x;
                }
            };
            let a = match self.weights {
                WeightLaw::Constant { value } => value,
                WeightLaw::Normal { mean, std } => mean + std * rng.normal(),
            };
            xs.push(x);
            ws.push(a);
        }
        (xs, ws)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_degenerate_density() {
        let g = TorusGrid::new(32).unwrap();
        let bad = Field::from_fn(&g, |x| 1.0 + 1.5 * x.cos());
        assert!(matches!(
            InitialLaw::new(bad, WeightLaw::Constant { value: 1.0 }),
            Err(Error::NonPositiveDensity { .. })
        ));
        assert!(InitialLaw::new(Field::zeros(&g), WeightLaw::Constant { value: 1.0 }).is_err());
    }

    #[test]
    fn constant_weights_and_determinism() {
        let g = TorusGrid::new(32).unwrap();
        let law = InitialLaw::uniform(&g, WeightLaw::Constant { value: 1.0 }).unwrap();
        let (x, a) = law.sample(4, &RngStreams::new(1));
        assert!(a.iter().all(|&w| w == 1.0));
        assert!(x.iter().all(|&v| (0.0..TAU).contains(&v)));
        let (x2, _) = law.sample(4, &RngStreams::new(1));
        assert_eq!(x, x2);
        let (x8, _) = law.sample(8, &RngStreams::new(1));
        assert_eq!(&x8[..4], &x[..]);
    }

    #[test]
    fn sampled_marginals_match() {
        let g = TorusGrid::new(64).unwrap();
        let law = InitialLaw::tilted(&g, 0.5, WeightLaw::Normal { mean: 1.0, std: 0.1 }).unwrap();
        let n = 100_000;
        let (x, a) = law.sample(n, &RngStreams::new(11));
        let mean_a = a.iter().sum::<f64>() / n as f64;
        assert!((mean_a - 1.0).abs() < 4.0 * 0.1 / (n as f64).sqrt());
        // ⟨cos, ζ₀⟩ = a/2 for the tilted law
        let emp = x.iter().map(|v| v.cos()).sum::<f64>() / n as f64;
        assert!((emp - 0.25).abs() < 4.0 / (n as f64).sqrt(), "{emp}");
        let emp_rho = x.iter().zip(&a).map(|(v, w)| w * v.cos()).sum::<f64>() / n as f64;
        let exact = law.rho0().pair_fn(f64::cos);
        assert!((emp_rho - exact).abs() < 4.0 / (n as f64).sqrt());
        assert!((law.eta() - 0.5 / TAU).abs() < 1e-12);
    }
}
