use std::f64::consts::SQRT_2;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::paths::{uniform_mesh, NoiseSpec, NormalRng, RngStreams, SampledPath, StreamKind};
use crate::torus::{basis_eval, basis_sup, wrap, BandEvaluator, Field, TorusGrid};

use super::ensemble::{ParticleEnsemble, SystemParams};
use super::observables::TestFunction;
use super::potentials::{half_spectrum, Potentials};

const CHUNK: usize = 256;
const BETA_TAG: u64 = 0xB3;

/// How pairwise sums over the ensemble are computed.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Method {
    /// `O(N²)` direct double loop.
    Direct,
    /// Fourier mode sums against the kernel's band, `O(N·K)`.
    Spectral,
    /// Direct while `N` does not exceed the number of retained modes.
    #[default]
    Auto,
}

impl Method {
    fn spectral(self, n: usize, modes: usize) -> bool {
        match self {
            Method::Direct => false,
            Method::Spectral => true,
            Method::Auto => n > modes,
        }
    }
}

/// Which weight the cutoff acts on inside the interaction sum.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum CutoffIndex {
    /// `(1/N) Σ_j χ_M(A^j) F'(X^i - X^j)`.
    #[default]
    Neighbour,
    /// `χ_M(A^i) (1/N) Σ_j F'(X^i - X^j)`.
    Own,
}

/// Common forcing of the weights.
#[derive(Clone, Debug, PartialEq)]
pub enum WeightForcing {
    /// `q(X) dY` with `q` from the potentials; one driving path.
    Profile,
    /// `Σ_{|z|≤m} λ_z e_z(X) dY^z`; one driving path per mode `-m..=m`.
    Modes(NoiseSpec),
}

impl WeightForcing {
    pub fn n_drivers(&self) -> usize {
        match self {
            WeightForcing::Profile => 1,
            WeightForcing::Modes(s) => 2 * s.m() + 1,
        }
    }

    /// Driver index `k` ↦ noise mode `z`.
    pub fn driver_modes(&self) -> Vec<i64> {
        match self {
            WeightForcing::Profile => vec![0],
            WeightForcing::Modes(s) => (-(s.m() as i64)..=s.m() as i64).collect(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EngineOptions {
    pub interaction: Method,
    pub density: Method,
    pub cutoff_index: CutoffIndex,
    /// Fail the step when a weight denominator drops below `m_ε`.
    pub check_floor: bool,
}

impl Default for EngineOptions {
    fn default() -> Self {
        Self {
            interaction: Method::Auto,
            density: Method::Auto,
            cutoff_index: CutoffIndex::Neighbour,
            check_floor: true,
        }
    }
}

/// Where the drift and the weight denominator come from.
#[derive(Clone, Copy, Debug)]
pub enum Closure<'a> {
    /// Interacting system: `Γ_M` and `Φ_ε * ζ^N` from the ensemble itself.
    Empirical,
    /// Interaction from the ensemble, denominator from a supplied density.
    ExternalDensity(&'a BandEvaluator),
    /// Both supplied: drift `-(V' + g)(x)` with `g` the first evaluator,
    /// denominator the second.
    External {
        interaction: &'a BandEvaluator,
        density: &'a BandEvaluator,
    },
}

/// Per-step bookkeeping.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepDiagnostics {
    /// Smallest denominator divided by `m_ε` (empirical closures) or the
    /// smallest denominator (external ones).
    pub min_denominator_ratio: f64,
    pub floor_hits: usize,
}

/// Particle dynamics with fixed potentials, regularization and forcing.
#[derive(Clone, Debug)]
pub struct ParticleSystem {
    pot: Potentials,
    params: SystemParams,
    forcing: WeightForcing,
    options: EngineOptions,
    df_coeffs: Vec<Complex64>,
    phi_coeffs: Vec<Complex64>,
}

/// `S_k = (1/N) Σ_j w_j e^{-ikX_j}` for `k = 0..=kmax`, reduced in a fixed order.
pub fn mode_sums(positions: &[f64], weights: Option<&[f64]>, kmax: usize) -> Vec<Complex64> {
    let n = positions.len();
    let partial: Vec<Vec<Complex64>> = positions
        .par_chunks(CHUNK)
        .enumerate()
        .map(|(c, xs)| {
            let mut acc = vec![Complex64::new(0.0, 0.0); kmax + 1];
            for (i, &x) in xs.iter().enumerate() {
                let w = weights.map_or(1.0, |ws| ws[c * CHUNK + i]);
                if w == 0.0 {
                    continue;
                }
                let step = Complex64::new(x.cos(), -x.sin());
                let mut p = Complex64::new(w, 0.0);
                for slot in acc.iter_mut() {
                    *slot += p;
                    p *= step;
                }
            }
            acc
        })
        .collect();
    let mut total = vec![Complex64::new(0.0, 0.0); kmax + 1];
    for part in partial {
        for (t, p) in total.iter_mut().zip(part) {
            *t += p;
        }
    }
    let inv = 1.0 / n as f64;
    total.iter_mut().for_each(|t| *t *= inv);
    total
}

impl ParticleSystem {
    pub fn new(
        pot: Potentials,
        params: SystemParams,
        forcing: WeightForcing,
        options: EngineOptions,
    ) -> Result<Self> {
        if let WeightForcing::Modes(spec) = &forcing {
            if spec.m() != params.m {
                return Err(Error::InvalidParameter(format!(
                    "noise spec keeps {} modes but the system has m = {}",
                    spec.m(),
                    params.m
                )));
            }
        }
        // mollifier coefficients from a fine dedicated grid
        let mgrid = TorusGrid::new(1024)?;
        let phi_coeffs = half_spectrum(&params.mollifier.field(&mgrid), 1e-15);
        Ok(Self {
            df_coeffs: pot.df_half_spectrum(),
            phi_coeffs,
            pot,
            params,
            forcing,
            options,
        })
    }

    pub fn potentials(&self) -> &Potentials {
        &self.pot
    }

    pub fn params(&self) -> &SystemParams {
        &self.params
    }

    pub fn forcing(&self) -> &WeightForcing {
        &self.forcing
    }

    pub fn options(&self) -> &EngineOptions {
        &self.options
    }

    fn interaction_weights(&self, e: &ParticleEnsemble) -> Option<Vec<f64>> {
        match self.options.cutoff_index {
            CutoffIndex::Neighbour => Some(
                e.weights()
                    .iter()
                    .map(|&a| self.params.cutoff.apply(a))
                    .collect(),
            ),
            CutoffIndex::Own => None,
        }
    }

    /// `Γ(X^i)` for every particle, without the `-V'` part.
    fn interaction_all(&self, e: &ParticleEnsemble) -> Vec<f64> {
        let xs = e.positions();
        let w = self.interaction_weights(e);
        let raw: Vec<f64> = if self.options.interaction.spectral(e.len(), self.df_coeffs.len()) {
            let ev = self.interaction_evaluator_with(xs, w.as_deref());
            xs.par_iter().map(|&x| ev.eval(x)).collect()
        } else {
            let n = xs.len() as f64;
            xs.par_iter()
                .map(|&xi| {
                    let mut s = 0.0;
                    for (j, &xj) in xs.iter().enumerate() {
                        let wj = w.as_ref().map_or(1.0, |w| w[j]);
                        if wj != 0.0 {
                            s += wj * self.pot.df_at(xi - xj);
                        }
                    }
                    s / n
                })
                .collect()
        };
        match self.options.cutoff_index {
            CutoffIndex::Neighbour => raw,
            CutoffIndex::Own => raw
                .into_iter()
                .zip(e.weights())
                .map(|(g, &a)| self.params.cutoff.apply(a) * g)
                .collect(),
        }
    }

    fn interaction_evaluator_with(&self, xs: &[f64], w: Option<&[f64]>) -> BandEvaluator {
        let k = self.df_coeffs.len() - 1;
        let s = mode_sums(xs, w, k);
        let c: Vec<Complex64> = self.df_coeffs.iter().zip(&s).map(|(a, b)| a * b).collect();
        BandEvaluator::from_half_spectrum(&c)
    }

    /// `Γ_M(x, μ^N) = (1/N) Σ_j χ_M(A^j) F'(x - X^j)` as an off-grid evaluator.
    pub fn interaction_evaluator(&self, e: &ParticleEnsemble) -> BandEvaluator {
        let w: Vec<f64> = e
            .weights()
            .iter()
            .map(|&a| self.params.cutoff.apply(a))
            .collect();
        self.interaction_evaluator_with(e.positions(), Some(&w))
    }

    /// `Γ_M(·, μ^N)` sampled on a grid.
    pub fn interaction_field(&self, e: &ParticleEnsemble, grid: &TorusGrid) -> Field {
        let ev = self.interaction_evaluator(e);
        Field::from_fn(grid, |x| ev.eval(x))
    }

    /// Drift of particle `i`: `-V'(X^i) - Γ_M(X^i, μ^N)`, by direct summation.
    pub fn interaction_drift(&self, i: usize, e: &ParticleEnsemble) -> f64 {
        let xs = e.positions();
        let xi = xs[i];
        let mut s = 0.0;
        for (j, &xj) in xs.iter().enumerate() {
            let wj = match self.options.cutoff_index {
                CutoffIndex::Neighbour => self.params.cutoff.apply(e.weights()[j]),
                CutoffIndex::Own => self.params.cutoff.apply(e.weights()[i]),
            };
            s += wj * self.pot.df_at(xi - xj);
        }
        -self.pot.dv_at(xi) - s / xs.len() as f64
    }

    /// `(Φ_ε * ζ^N)(x) = (1/N) Σ_j Φ_ε(x - X^j)`, by direct summation.
    pub fn mollified_density(&self, e: &ParticleEnsemble, x: f64) -> f64 {
        let p = &self.params.mollifier;
        e.positions().iter().map(|&y| p.eval(x - y)).sum::<f64>() / e.len() as f64
    }

    /// `Φ_ε * ζ^N` as an off-grid evaluator built from mode sums.
    pub fn density_evaluator(&self, e: &ParticleEnsemble) -> BandEvaluator {
        let k = self.phi_coeffs.len() - 1;
        let s = mode_sums(e.positions(), None, k);
        let c: Vec<Complex64> = self
            .phi_coeffs
            .iter()
            .zip(&s)
            .map(|(a, b)| a * b)
            .collect();
        BandEvaluator::from_half_spectrum(&c)
    }

    fn density_all(&self, e: &ParticleEnsemble) -> Vec<f64> {
        let xs = e.positions();
        if self.options.density.spectral(e.len(), self.phi_coeffs.len()) {
            let ev = self.density_evaluator(e);
            xs.par_iter().map(|&x| ev.eval(x)).collect()
        } else {
            let p = self.params.mollifier;
            let n = xs.len() as f64;
            xs.par_iter()
                .map(|&x| xs.iter().map(|&y| p.eval(x - y)).sum::<f64>() / n)
                .collect()
        }
    }

    /// Per-driver coefficients of `dA^i` given the denominator value at `X^i`.
    fn coeffs_at(&self, x: f64, denominator: f64) -> Vec<f64> {
        match &self.forcing {
            WeightForcing::Profile => vec![self.pot.q_at(x) / denominator],
            WeightForcing::Modes(spec) => (-(spec.m() as i64)..=spec.m() as i64)
                .map(|z| {
                    let l = spec.lambda(z);
                    if l == 0.0 {
                        0.0
                    } else {
                        l * basis_eval(z, x) / denominator
                    }
                })
                .collect(),
        }
    }

    /// Coefficients `c_z` of the weight increment of particle `i`.
    pub fn weight_drift_coeffs(&self, i: usize, e: &ParticleEnsemble) -> Vec<f64> {
        let x = e.positions()[i];
        self.coeffs_at(x, self.mollified_density(e, x))
    }

    /// Upper bound `λ_z max|e_z| / m_ε` on `|c_z|`.
    pub fn coeff_bound(&self, z: i64) -> f64 {
        let floor = self.params.mollifier.lower_bound();
        match &self.forcing {
            WeightForcing::Profile => self.pot.q().sup_norm() / floor,
            WeightForcing::Modes(spec) => spec.lambda(z) * basis_sup(z) / floor,
        }
    }

    fn floor_tolerance(&self) -> f64 {
        let p = &self.params.mollifier;
        p.lower_bound() * (1.0 - 1e-9) - 64.0 * f64::EPSILON * p.upper_bound()
    }

    /// One explicit Euler–Maruyama step of the interacting system.
    pub fn em_step(
        &self,
        e: &ParticleEnsemble,
        dt: f64,
        dy: &[f64],
        dbeta: &[f64],
    ) -> Result<ParticleEnsemble> {
        self.step(e, dt, dy, dbeta, Closure::Empirical).map(|r| r.0)
    }

    /// One step under the given closure; `dbeta` holds standard increments of
    /// variance `dt`, `dy` one increment per driver.
    pub fn step(
        &self,
        e: &ParticleEnsemble,
        dt: f64,
        dy: &[f64],
        dbeta: &[f64],
        closure: Closure<'_>,
    ) -> Result<(ParticleEnsemble, StepDiagnostics)> {
        if !(dt > 0.0) {
            return Err(Error::InvalidParameter(format!("time step must be positive, got {dt}")));
        }
        if dbeta.len() != e.len() {
            return Err(Error::IncrementMismatch {
                expected: e.len(),
                got: dbeta.len(),
            });
        }
        if dy.len() != self.forcing.n_drivers() {
            return Err(Error::IncrementMismatch {
                expected: self.forcing.n_drivers(),
                got: dy.len(),
            });
        }
        if *e.params() != self.params {
            return Err(Error::InvalidParameter(
                "ensemble parameters differ from the system's".into(),
            ));
        }
        let xs = e.positions();
        let gamma: Vec<f64> = match closure {
            Closure::External { interaction, .. } => {
                xs.par_iter().map(|&x| interaction.eval(x)).collect()
            }
            _ => self.interaction_all(e),
        };
        let forced = dy.iter().any(|&d| d != 0.0);
        let (den, diag) = match closure {
            Closure::Empirical => {
                let den = if forced || self.options.check_floor {
                    self.density_all(e)
                } else {
                    Vec::new()
                };
                let floor = self.params.mollifier.lower_bound();
                let tol = self.floor_tolerance();
                let mut min_ratio = f64::INFINITY;
                let mut hits = 0;
                for &d in &den {
                    min_ratio = min_ratio.min(d / floor);
                    if d < tol {
                        hits += 1;
                    }
                }
                if hits > 0 && self.options.check_floor {
                    let worst = den.iter().cloned().fold(f64::INFINITY, f64::min);
                    return Err(Error::DenominatorFloor {
                        value: worst,
                        floor,
                    });
                }
                (den, StepDiagnostics { min_denominator_ratio: min_ratio, floor_hits: hits })
            }
            Closure::ExternalDensity(d) | Closure::External { density: d, .. } => {
                let den: Vec<f64> = xs.par_iter().map(|&x| d.eval(x)).collect();
                let min = den.iter().cloned().fold(f64::INFINITY, f64::min);
                if !(min > 0.0) {
                    return Err(Error::DenominatorFloor { value: min, floor: 0.0 });
                }
                (den, StepDiagnostics { min_denominator_ratio: min, floor_hits: 0 })
            }
        };
        let sq = SQRT_2;
        let (pos, wts): (Vec<f64>, Vec<f64>) = (0..e.len())
            .into_par_iter()
            .map(|i| {
                let x = xs[i];
                let drift = -self.pot.dv_at(x) - gamma[i];
                let nx = wrap(x + drift * dt + sq * dbeta[i]);
                let mut a = e.weights()[i];
                if forced {
                    let c = self.coeffs_at(x, den[i]);
                    for (cz, dz) in c.iter().zip(dy) {
                        a += cz * dz;
                    }
                }
                (nx, a)
            })
            .unzip();
        Ok((e.advanced(pos, wts, dt)?, diag))
    }
}

/// Idiosyncratic Brownian increments, one independent stream per particle.
#[derive(Clone, Debug)]
pub struct IdiosyncraticNoise {
    rngs: Vec<NormalRng>,
}

impl IdiosyncraticNoise {
    pub fn new(n: usize, streams: &RngStreams) -> Self {
        let fam = streams.derive(BETA_TAG);
        Self {
            rngs: (0..n)
                .map(|i| fam.substream(StreamKind::Particle(i as u64)).rng())
                .collect(),
        }
    }

    /// Next increments, each `N(0, dt)`.
    pub fn next(&mut self, dt: f64) -> Vec<f64> {
        let s = dt.sqrt();
        self.rngs.par_iter_mut().map(|r| s * r.normal()).collect()
    }
}

/// Common driving paths, one per forcing driver.
#[derive(Clone, Debug)]
pub struct CommonDriver {
    paths: Vec<SampledPath>,
}

impl CommonDriver {
    pub fn new(paths: Vec<SampledPath>) -> Result<Self> {
        if paths.is_empty() {
            return Err(Error::InvalidPath("no driving path".into()));
        }
        let t = paths[0].horizon();
        for p in &paths {
            if (p.horizon() - t).abs() > 1e-12 * t {
                return Err(Error::DomainMismatch {
                    left: t,
                    right: p.horizon(),
                });
            }
        }
        Ok(Self { paths })
    }

    pub fn single(path: SampledPath) -> Self {
        Self { paths: vec![path] }
    }

    pub fn paths(&self) -> &[SampledPath] {
        &self.paths
    }

    pub fn len(&self) -> usize {
        self.paths.len()
    }

    pub fn is_empty(&self) -> bool {
        self.paths.is_empty()
    }

    pub fn horizon(&self) -> f64 {
        self.paths[0].horizon()
    }

    pub fn increments(&self, s: f64, t: f64) -> Vec<f64> {
        self.paths.iter().map(|p| p.increment(s, t)).collect()
    }

    /// Each path replaced by its `κ`-segment linear interpolant.
    pub fn approximate(&self, kappa: usize) -> Result<CommonDriver> {
        Ok(Self {
            paths: self
                .paths
                .iter()
                .map(|p| p.piecewise_linear_approx(kappa))
                .collect::<Result<_>>()?,
        })
    }
}

/// Time stepping and output choices of one simulation.
#[derive(Clone, Debug, PartialEq)]
pub struct SimulationPlan {
    pub dt: f64,
    pub horizon: f64,
    pub test_functions: Vec<TestFunction>,
    pub snapshot_times: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ParticleDiagnostics {
    pub min_denominator_ratio: f64,
    pub floor_hits: usize,
    pub steps: usize,
}

/// Pairing trajectories and snapshots of one particle run.
#[derive(Clone, Debug)]
pub struct RunOutput {
    pub times: Vec<f64>,
    pub test_functions: Vec<TestFunction>,
    /// `observables[k][n]` is `⟨f_k, ρ^N_{t_n}⟩`.
    pub observables: Vec<Vec<f64>>,
    pub snapshots: Vec<ParticleEnsemble>,
    pub final_state: ParticleEnsemble,
    pub diagnostics: ParticleDiagnostics,
}

impl RunOutput {
    pub fn pairing_path(&self, k: usize) -> Result<SampledPath> {
        SampledPath::new(self.times.clone(), self.observables[k].clone())
    }
}

/// `t ↦ (1/N) Σ A^i_t f(X^i_t)` on the step mesh.
pub fn weighted_pairing_trajectory(run: &RunOutput, f: &TestFunction) -> Result<SampledPath> {
    let k = run
        .test_functions
        .iter()
        .position(|g| g == f)
        .ok_or_else(|| Error::MissingReference(format!("test function {f} was not recorded")))?;
    run.pairing_path(k)
}

fn record(e: &ParticleEnsemble, fs: &[TestFunction], obs: &mut [Vec<f64>]) {
    for (f, o) in fs.iter().zip(obs.iter_mut()) {
        o.push(e.pairing(|x| f.eval(x)));
    }
}

/// Callback that supplies the closure at each step.
pub trait ClosureSource {
    /// Called before the step starting at mesh index `k`.
    fn prepare(&mut self, k: usize, e: &ParticleEnsemble) -> Result<()>;
    fn closure(&self) -> Closure<'_>;
}

struct EmpiricalSource;

impl ClosureSource for EmpiricalSource {
    fn prepare(&mut self, _: usize, _: &ParticleEnsemble) -> Result<()> {
        Ok(())
    }
    fn closure(&self) -> Closure<'_> {
        Closure::Empirical
    }
}

impl ParticleSystem {
    /// Interacting system driven by `driver` and per-particle Brownian motions
    /// drawn from `streams`.
    pub fn simulate(
        &self,
        e0: &ParticleEnsemble,
        driver: &CommonDriver,
        plan: &SimulationPlan,
        streams: &RngStreams,
    ) -> Result<RunOutput> {
        let mut noise = IdiosyncraticNoise::new(e0.len(), streams);
        self.simulate_with(e0, driver, plan, &mut noise, &mut EmpiricalSource)
    }

    pub fn simulate_with(
        &self,
        e0: &ParticleEnsemble,
        driver: &CommonDriver,
        plan: &SimulationPlan,
        noise: &mut IdiosyncraticNoise,
        source: &mut dyn ClosureSource,
    ) -> Result<RunOutput> {
        if driver.len() != self.forcing.n_drivers() {
            return Err(Error::IncrementMismatch {
                expected: self.forcing.n_drivers(),
                got: driver.len(),
            });
        }
        if (driver.horizon() - plan.horizon).abs() > 1e-12 * plan.horizon {
            return Err(Error::DomainMismatch {
                left: plan.horizon,
                right: driver.horizon(),
            });
        }
        let times = uniform_mesh(plan.horizon, plan.dt)?;
        let mut obs = vec![Vec::with_capacity(times.len()); plan.test_functions.len()];
        let mut snaps = Vec::new();
        let mut snap_iter = plan.snapshot_times.iter().peekable();
        let mut e = e0.clone();
        record(&e, &plan.test_functions, &mut obs);
        let mut diag = ParticleDiagnostics {
            min_denominator_ratio: f64::INFINITY,
            floor_hits: 0,
            steps: 0,
        };
        let tol = 1e-12 * plan.horizon;
        while let Some(&&ts) = snap_iter.peek() {
            if ts <= tol {
                snaps.push(e.clone());
                snap_iter.next();
            } else {
                break;
            }
        }
        for k in 0..times.len() - 1 {
            let (t0, t1) = (times[k], times[k + 1]);
            let dt = t1 - t0;
            let dy = driver.increments(t0, t1);
            let db = noise.next(dt);
            source.prepare(k, &e)?;
            let (next, d) = self.step(&e, dt, &dy, &db, source.closure())?;
            e = next;
            diag.min_denominator_ratio = diag.min_denominator_ratio.min(d.min_denominator_ratio);
            diag.floor_hits += d.floor_hits;
            diag.steps += 1;
            record(&e, &plan.test_functions, &mut obs);
            while let Some(&&ts) = snap_iter.peek() {
                if ts <= t1 + tol {
                    snaps.push(e.clone());
                    snap_iter.next();
                } else {
                    break;
                }
            }
        }
        Ok(RunOutput {
            times,
            test_functions: plan.test_functions.clone(),
            observables: obs,
            snapshots: snaps,
            final_state: e,
            diagnostics: diag,
        })
    }
}
