use crate::error::{Error, Result};
use crate::torus::Field;

use super::ensemble::ParticleEnsemble;
use super::system::{Closure, ParticleSystem};

/// One step of the decoupled pairs driven by PDE fields:
/// `dX = -(V' + F'*ρ)(X) dt + √2 dβ`, `dA = q(X)/ζ(X) dY`.
///
/// `system` supplies the potentials and forcing; its own interaction and
/// mollifier are not used.
pub fn mean_field_ensemble_step(
    system: &ParticleSystem,
    e: &ParticleEnsemble,
    rho: &Field,
    zeta: &Field,
    dt: f64,
    dy: &[f64],
    dbeta: &[f64],
) -> Result<ParticleEnsemble> {
    let (min, x) = zeta.min();
    if !(min > 0.0) {
        return Err(Error::NonPositiveDensity { min, x });
    }
    let interaction = system.potentials().df().convolve(rho)?.evaluator();
    let density = zeta.evaluator();
    system
        .step(
            e,
            dt,
            dy,
            dbeta,
            Closure::External {
                interaction: &interaction,
                density: &density,
            },
        )
        .map(|r| r.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::particles::{EngineOptions, Potentials, SystemParams, WeightForcing};
    use crate::torus::TorusGrid;
    use std::f64::consts::TAU;

    fn setup(q: f64) -> (TorusGrid, ParticleSystem, SystemParams) {
        let g = TorusGrid::new(32).unwrap();
        let pot = Potentials::new(Field::zeros(&g), Field::from_fn(&g, f64::cos), Field::constant(&g, q)).unwrap();
        let prm = SystemParams::new(0.3, 10.0, 4, 0).unwrap();
        let s = ParticleSystem::new(pot, prm, WeightForcing::Profile, EngineOptions::default()).unwrap();
        (g, s, prm)
    }

    #[test]
    fn frozen_without_drift() {
        let (g, s, prm) = setup(0.0);
        let e = ParticleEnsemble::new(vec![0.2, 2.0, 5.5], vec![1.0; 3], prm).unwrap();
        let zeta = Field::constant(&g, 1.0 / TAU);
        let n = mean_field_ensemble_step(&s, &e, &Field::zeros(&g), &zeta, 0.1, &[0.0], &[0.0; 3]).unwrap();
        assert_eq!(n.positions(), e.positions());
    }

    #[test]
    fn uniform_density_weight_increment() {
        let c = 0.7;
        let (g, s, prm) = setup(c);
        let e = ParticleEnsemble::new(vec![0.2, 4.0], vec![1.0, 2.0], prm).unwrap();
        let zeta = Field::constant(&g, 1.0 / TAU);
        let dy = 0.05;
        let n = mean_field_ensemble_step(&s, &e, &Field::zeros(&g), &zeta, 0.1, &[dy], &[0.0; 2]).unwrap();
        for i in 0..2 {
            let inc = n.weights()[i] - e.weights()[i];
            assert!((inc - TAU * c * dy).abs() < 1e-12);
        }
    }

    #[test]
    fn refuses_nonpositive_zeta() {
        let (g, s, prm) = setup(1.0);
        let e = ParticleEnsemble::new(vec![0.2], vec![1.0], prm).unwrap();
        let zeta = Field::from_fn(&g, f64::cos);
        let r = mean_field_ensemble_step(&s, &e, &Field::zeros(&g), &zeta, 0.1, &[0.1], &[0.0]);
        assert!(matches!(r, Err(Error::NonPositiveDensity { .. })));
    }
}
