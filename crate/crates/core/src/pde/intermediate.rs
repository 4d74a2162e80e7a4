use crate::error::{Error, Result};
use crate::paths::{uniform_mesh, RngStreams};
use crate::particles::{
    init_ensemble, Closure, CommonDriver, EngineOptions, IdiosyncraticNoise, InitialLaw,
    ParticleEnsemble, ParticleSystem, Potentials, SystemParams, WeightForcing,
};
use crate::torus::{Field, TorusGrid};

use super::bounds::LowerBoundCertificate;
use super::etd::EtdCache;
use super::linear::FloorWatch;
use super::mkv::{mkv_drift, Recorder, Trajectory};

/// Which weighted-marginal equation to solve.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Level {
    /// Forcing `q ζ/(Φ_ε * ζ) ∂_t Y^κ`.
    EpsMKappa { epsilon: f64 },
    /// Forcing `q ∂_t Y^κ`.
    MKappa,
}

/// How the interaction `Γ_M(x, μ_t)` is evaluated.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum GammaSource {
    /// Against a mean-field reference ensemble of `n_ref` pairs that is
    /// advanced alongside the fields.
    Ensemble { n_ref: usize, seed: u64 },
    /// `F' * ρ_t`, exact when the cutoff never acts.
    Uncut,
}

#[derive(Clone, Debug)]
pub struct IntermediateInputs {
    pub potentials: Potentials,
    pub law: InitialLaw,
    /// Cutoff level `M`.
    pub cutoff: f64,
    pub forcing: WeightForcing,
    /// Driving paths, already replaced by their `κ`-segment interpolants.
    pub driver: CommonDriver,
    pub dt: f64,
    pub horizon: f64,
    pub record_every: usize,
    pub gamma: GammaSource,
}

#[derive(Clone, Debug)]
pub struct IntermediateRun {
    pub rho: Trajectory,
    pub zeta: Trajectory,
    pub certificate: LowerBoundCertificate,
    /// Final state of the reference ensemble, if one was used.
    pub reference: Option<ParticleEnsemble>,
}

fn profiles(grid: &TorusGrid, pot: &Potentials, forcing: &WeightForcing) -> Vec<Field> {
    match forcing {
        WeightForcing::Profile => vec![pot.q().clone()],
        WeightForcing::Modes(spec) => forcing
            .driver_modes()
            .into_iter()
            .map(|z| Field::basis(grid, z).scale(spec.lambda(z)))
            .collect(),
    }
}

/// Solve the weighted marginal `ρ` together with its companion `ζ`:
///
/// `∂_t ζ = ∂_xx ζ + ∂_x[(V' + Γ)ζ]`,
/// `∂_t ρ = ∂_xx ρ + ∂_x[(V' + Γ)ρ] + Σ_k g_k r ∂_t Y^k`,
///
/// with `r = ζ/(Φ_ε * ζ)` or `r = 1` depending on the level.
pub fn solve_intermediate_rho(level: Level, inputs: &IntermediateInputs) -> Result<IntermediateRun> {
    let pot = &inputs.potentials;
    let grid = pot.grid().clone();
    let zeta0 = inputs.law.zeta0().clone();
    let rho0 = inputs.law.rho0();
    if zeta0.grid() != &grid {
        return Err(Error::GridMismatch {
            left: grid.n_points(),
            right: zeta0.grid().n_points(),
        });
    }
    if inputs.driver.len() != inputs.forcing.n_drivers() {
        return Err(Error::IncrementMismatch {
            expected: inputs.forcing.n_drivers(),
            got: inputs.driver.len(),
        });
    }
    if inputs.driver.horizon() + 1e-12 * inputs.horizon < inputs.horizon {
        return Err(Error::DomainMismatch {
            left: inputs.horizon,
            right: inputs.driver.horizon(),
        });
    }
    let gs = profiles(&grid, pot, &inputs.forcing);
    let epsilon = match level {
        Level::EpsMKappa { epsilon } => epsilon,
        Level::MKappa => 1.0,
    };
    let modes = match &inputs.forcing {
        WeightForcing::Profile => 0,
        WeightForcing::Modes(s) => s.m(),
    };
    let params = SystemParams::new(epsilon, inputs.cutoff, 1, modes)?;
    let phi = match level {
        Level::EpsMKappa { .. } => Some(params.mollifier.field(&grid)),
        Level::MKappa => None,
    };

    let mut reference = match inputs.gamma {
        GammaSource::Ensemble { n_ref, seed } => {
            let system = ParticleSystem::new(
                pot.clone(),
                params,
                inputs.forcing.clone(),
                EngineOptions {
                    check_floor: false,
                    ..EngineOptions::default()
                },
            )?;
            let streams = RngStreams::new(seed);
            let e = init_ensemble(&inputs.law, n_ref, &streams, params)?;
            let noise = IdiosyncraticNoise::new(n_ref, &streams);
            Some((system, e, noise))
        }
        GammaSource::Uncut => None,
    };

    let times = uniform_mesh(inputs.horizon, inputs.dt)?;
    let steps = times.len() - 1;
    let mut cache = EtdCache::new(&grid);
    let mut rho = rho0;
    let mut zeta = zeta0.clone();
    let mut rec_rho = Recorder::new(&rho, inputs.record_every, steps);
    let mut rec_zeta = Recorder::new(&zeta, inputs.record_every, steps);
    let mut watch = FloorWatch::new(&zeta0)?;

    for k in 0..steps {
        let (t0, t1) = (times[k], times[k + 1]);
        let dt = t1 - t0;
        if k > 0 {
            watch.check(t0, &zeta)?;
        }
        let b = match &reference {
            Some((system, e, _)) => pot.dv().add(&system.interaction_field(e, &grid))?,
            None => mkv_drift(&rho, pot)?,
        };
        watch.see_drift(&b);

        // weight denominator: Φ_ε * ζ or ζ
        let den = match &phi {
            Some(phi) => phi.convolve(&zeta)?,
            None => zeta.clone(),
        };
        let dy = inputs.driver.increments(t0, t1);
        let mut inc: Option<Field> = None;
        if dy.iter().any(|&d| d != 0.0) {
            let mut acc = vec![0.0; grid.n_points()];
            for (g, d) in gs.iter().zip(&dy) {
                for (a, v) in acc.iter_mut().zip(g.values()) {
                    *a += v * d;
                }
            }
            if phi.is_some() {
                for ((a, z), dn) in acc.iter_mut().zip(zeta.values()).zip(den.values()) {
                    *a *= z / dn;
                }
            }
            inc = Some(Field::from_values(&grid, acc)?);
        }

        if let Some((system, e, noise)) = &mut reference {
            let db = noise.next(dt);
            let ev = den.evaluator();
            let (next, _) = system.step(e, dt, &dy, &db, Closure::ExternalDensity(&ev))?;
            *e = next;
        }

        rec_zeta.before(&zeta, Some(&b), dt);
        rec_rho.before(&rho, Some(&b), dt);
        let etd = cache.get(dt);
        zeta = etd.step(&zeta, Some(&b), None, t0, true)?;
        rho = etd.step(&rho, Some(&b), inc.as_ref(), t0, true)?;
        rec_zeta.after(k, t1, &zeta, 0.0);
        rec_rho.after(k, t1, &rho, inc.as_ref().map_or(0.0, Field::mass));
    }
    watch.check(times[steps], &zeta)?;
    Ok(IntermediateRun {
        rho: rec_rho.finish(),
        zeta: rec_zeta.finish(),
        certificate: watch.certificate(),
        reference: reference.map(|r| r.1),
    })
}
