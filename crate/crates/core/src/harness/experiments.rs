use std::collections::BTreeMap;

use rayon::prelude::*;

use crate::error::Result;
use crate::metrics::sup_pairing_gap;
use crate::particles::{
    init_ensemble, CommonDriver, EngineOptions, ParticleSystem, SimulationPlan, SystemParams,
    TestFunction, WeightForcing, WeightLaw,
};
use crate::paths::{sample_brownian, RngStreams, SampledPath, StreamKind};
use crate::pde::{
    solve_intermediate_rho, solve_mkv, GammaSource, IntermediateInputs, Level, PdeForcing, PdeRun,
    Trajectory,
};
use crate::torus::Field;

use super::config::{Axis, ExperimentConfig, GammaChoice, NoiseKind, Setup};

const PATH_TAG: u64 = 0x9A7;
const GAMMA_TAG: u64 = 0x6A3;
const PARTICLE_TAG: u64 = 0x7A1;

/// Column label of the `sup_t ‖·‖_{L²}` gap between two fields.
pub const L2_LABEL: &str = "l2";

#[derive(Clone, Debug, PartialEq)]
pub struct GapRow {
    pub axis_value: String,
    pub test_fn: String,
    pub mean_gap: f64,
    pub stderr: f64,
    pub replications: usize,
}

/// Mean gaps over replications, one row per (axis value, test function).
#[derive(Clone, Debug, PartialEq)]
pub struct GapTable {
    pub axis: String,
    pub rows: Vec<GapRow>,
}

impl GapTable {
    pub const HEADER: &'static str = "axis_value,test_fn,mean_gap,stderr,replications";

    pub fn to_csv(&self) -> String {
        let mut s = format!("{}\n", Self::HEADER);
        for r in &self.rows {
            s.push_str(&format!(
                "{},{},{:.12e},{:.12e},{}\n",
                r.axis_value, r.test_fn, r.mean_gap, r.stderr, r.replications
            ));
        }
        s
    }

    /// Mean gaps of one test function, in axis order.
    pub fn series(&self, test_fn: &str) -> Vec<f64> {
        self.rows
            .iter()
            .filter(|r| r.test_fn == test_fn)
            .map(|r| r.mean_gap)
            .collect()
    }

    pub fn test_fns(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        for r in &self.rows {
            if !out.contains(&r.test_fn) {
                out.push(r.test_fn.clone());
            }
        }
        out
    }
}

/// Several tables in one CSV with a leading `axis` column.
pub fn combined_csv(tables: &[GapTable]) -> String {
    let mut s = format!("axis,{}\n", GapTable::HEADER);
    for t in tables {
        for line in t.to_csv().lines().skip(1) {
            s.push_str(&format!("{},{}\n", t.axis, line));
        }
    }
    s
}

/// Named diagnostics folded over runs with a fixed combine rule per key.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct RunLog {
    entries: BTreeMap<String, f64>,
}

impl RunLog {
    pub fn max(&mut self, key: &str, v: f64) {
        let e = self.entries.entry(key.to_string()).or_insert(f64::NEG_INFINITY);
        *e = e.max(v);
    }

    pub fn min(&mut self, key: &str, v: f64) {
        let e = self.entries.entry(key.to_string()).or_insert(f64::INFINITY);
        *e = e.min(v);
    }

    pub fn add(&mut self, key: &str, v: f64) {
        *self.entries.entry(key.to_string()).or_insert(0.0) += v;
    }

    pub fn get(&self, key: &str) -> Option<f64> {
        self.entries.get(key).copied()
    }

    pub fn entries(&self) -> &BTreeMap<String, f64> {
        &self.entries
    }

    fn merge(&mut self, other: &RunLog) {
        for (k, &v) in &other.entries {
            if k.ends_with(".min_margin") || k.ends_with(".min_value") || k.ends_with(".min_denominator_ratio") {
                self.min(k, v);
            } else if k.ends_with(".floor_hits") || k.ends_with(".runs") {
                self.add(k, v);
            } else {
                self.max(k, v);
            }
        }
    }

    fn pde(&mut self, label: &str, t: &Trajectory) {
        let d = &t.diagnostics;
        self.max(&format!("pde.{label}.mass_residual"), d.mass_residual);
        self.min(&format!("pde.{label}.min_value"), d.min_value);
        self.max(&format!("pde.{label}.sup_h2"), d.sup_h2);
        self.max(&format!("pde.{label}.energy"), d.energy());
        self.max(&format!("pde.{label}.max_cfl"), d.max_cfl);
        self.add(&format!("pde.{label}.runs"), 1.0);
    }
}

/// Output of a single-axis sweep.
#[derive(Clone, Debug)]
pub struct SweepResult {
    pub table: GapTable,
    pub log: RunLog,
    /// `(file name, CSV text)` of the first replication's trajectories.
    pub observables: Vec<(String, String)>,
}

/// Output of the full ladder.
#[derive(Clone, Debug)]
pub struct LadderResult {
    pub axes: Vec<GapTable>,
    /// Every level at the fixed parameters against the target, plus the
    /// consecutive-level gaps, with `axis_value` naming the comparison.
    pub overall: GapTable,
    /// `sup_t ‖ρ_dt - ρ_{dt/2}‖_{L²}` of the target solve, averaged.
    pub self_tolerance: f64,
    /// Triangle-inequality violations across the overall chain.
    pub coherence_violations: usize,
    pub log: RunLog,
    pub observables: Vec<(String, String)>,
}

impl LadderResult {
    pub fn axis(&self, axis: Axis) -> Option<&GapTable> {
        let name = axis.to_string();
        self.axes.iter().find(|t| t.axis == name)
    }
}

/// Forcing shared by the particles and every PDE level of one replication.
struct Drivers {
    forcing: WeightForcing,
    profiles: Vec<Field>,
    raw: CommonDriver,
}

struct Replication<'a> {
    cfg: &'a ExperimentConfig,
    setup: &'a Setup,
    streams: RngStreams,
    path_streams: RngStreams,
}

impl<'a> Replication<'a> {
    fn new(cfg: &'a ExperimentConfig, setup: &'a Setup, r: usize) -> Self {
        let base = RngStreams::new(cfg.sweep.seed);
        let streams = base.replication(r as u64);
        let path_streams = if cfg.sweep.fixed_path { base } else { streams };
        Self {
            cfg,
            setup,
            streams,
            path_streams,
        }
    }

    fn horizon(&self) -> f64 {
        self.cfg.time.horizon
    }

    fn profile_path(&self) -> Result<SampledPath> {
        sample_brownian(
            self.horizon(),
            self.cfg.path_dt(),
            &self.path_streams.substream(StreamKind::Other(PATH_TAG)),
        )
    }

    fn mode_paths(&self, m: usize) -> Result<Vec<SampledPath>> {
        let m = m as i64;
        (-m..=m)
            .map(|z| {
                sample_brownian(
                    self.horizon(),
                    self.cfg.path_dt(),
                    &self.path_streams.substream(StreamKind::Mode(z)),
                )
            })
            .collect()
    }

    fn mode_drivers(&self, m: usize) -> Result<Drivers> {
        let spec = self.cfg.noise_spec(m)?;
        let forcing = WeightForcing::Modes(spec.clone());
        let profiles = forcing
            .driver_modes()
            .into_iter()
            .map(|z| Field::basis(&self.setup.grid, z).scale(spec.lambda(z)))
            .collect();
        Ok(Drivers {
            forcing,
            profiles,
            raw: CommonDriver::new(self.mode_paths(m)?)?,
        })
    }

    /// Forcing of the N, ε, M and κ levels.
    fn drivers(&self) -> Result<Drivers> {
        match self.cfg.noise.kind {
            NoiseKind::Profile => Ok(Drivers {
                forcing: WeightForcing::Profile,
                profiles: vec![self.setup.potentials.q().clone()],
                raw: CommonDriver::single(self.profile_path()?),
            }),
            NoiseKind::Modes => self.mode_drivers(self.cfg.sweep.modes),
        }
    }

    /// The uncut convolution is exact, not an approximation, when weights
    /// are frozen inside `[-M, M]`.
    fn gamma(&self, choice: GammaChoice, d: &Drivers, cutoff: f64) -> GammaSource {
        let frozen = d.profiles.iter().all(|p| p.sup_norm() == 0.0);
        let bounded = matches!(self.setup.law.weight_law(), WeightLaw::Constant { value } if value.abs() <= cutoff);
        match choice {
            _ if frozen && bounded => GammaSource::Uncut,
            GammaChoice::Uncut => GammaSource::Uncut,
            GammaChoice::Ensemble => GammaSource::Ensemble {
                n_ref: self.cfg.sweep.n_ref,
                seed: self.streams.derive(GAMMA_TAG).master_seed(),
            },
        }
    }

    fn mkv(&self, d: &Drivers, driver: CommonDriver, dt: f64) -> Result<Trajectory> {
        let run = PdeRun::new(
            self.setup.law.rho0(),
            self.setup.potentials.clone(),
            dt,
            self.horizon(),
        )
        .with_forcing(PdeForcing::new(d.profiles.clone(), driver)?);
        solve_mkv(&run)
    }

    fn target(&self, d: &Drivers) -> Result<Trajectory> {
        self.mkv(d, d.raw.clone(), self.cfg.time.dt)
    }

    fn kappa_level(&self, d: &Drivers, kappa: usize) -> Result<Trajectory> {
        self.mkv(d, d.raw.approximate(kappa)?, self.cfg.time.dt)
    }

    fn intermediate(
        &self,
        d: &Drivers,
        level: Level,
        cutoff: f64,
        kappa: usize,
        gamma: GammaSource,
        log: &mut RunLog,
    ) -> Result<Trajectory> {
        let inputs = IntermediateInputs {
            potentials: self.setup.potentials.clone(),
            law: self.setup.law.clone(),
            cutoff,
            forcing: d.forcing.clone(),
            driver: d.raw.approximate(kappa)?,
            dt: self.cfg.time.dt,
            horizon: self.horizon(),
            record_every: 1,
            gamma,
        };
        let run = solve_intermediate_rho(level, &inputs)?;
        let c = run.certificate;
        let margin = run
            .zeta
            .times
            .iter()
            .zip(&run.zeta.fields)
            .map(|(&t, z)| z.min().0 - c.floor(t))
            .fold(f64::INFINITY, f64::min);
        log.min("pde.zeta.min_margin", margin);
        log.pde("zeta", &run.zeta);
        Ok(run.rho)
    }

    /// Pairing paths of one particle run.
    fn particles(
        &self,
        d: &Drivers,
        n: usize,
        params: SystemParams,
        log: &mut RunLog,
    ) -> Result<Vec<SampledPath>> {
        let system = ParticleSystem::new(
            self.setup.potentials.clone(),
            params,
            d.forcing.clone(),
            EngineOptions::default(),
        )?;
        let streams = self.streams.derive(PARTICLE_TAG).derive(n as u64);
        let e0 = init_ensemble(&self.setup.law, n, &streams, params)?;
        let plan = SimulationPlan {
            dt: self.cfg.time.dt,
            horizon: self.horizon(),
            test_functions: self.setup.test_functions.clone(),
            snapshot_times: Vec::new(),
        };
        let out = system.simulate(&e0, &d.raw.approximate(params.kappa)?, &plan, &streams)?;
        let dg = &out.diagnostics;
        log.add("particles.floor_hits", dg.floor_hits as f64);
        log.min("particles.min_denominator_ratio", dg.min_denominator_ratio);
        let amax = out.final_state.weights().iter().fold(0.0f64, |m, a| m.max(a.abs()));
        log.max("particles.final_max_abs_weight", amax);
        (0..plan.test_functions.len()).map(|k| out.pairing_path(k)).collect()
    }
}

/// Per-replication gaps of one comparison: pairings first, then `l2`.
fn field_gaps(a: &Trajectory, b: &Trajectory, fs: &[TestFunction]) -> Result<Vec<f64>> {
    let mut g = pairing_gaps_vs(&pairings(a, fs)?, b, fs)?;
    g.push(a.sup_l2_distance(b)?);
    Ok(g)
}

fn pairings(t: &Trajectory, fs: &[TestFunction]) -> Result<Vec<SampledPath>> {
    fs.iter().map(|f| t.pairing_path(f)).collect()
}

fn pairing_gaps_vs(p: &[SampledPath], reference: &Trajectory, fs: &[TestFunction]) -> Result<Vec<f64>> {
    p.iter()
        .zip(fs)
        .map(|(path, f)| sup_pairing_gap(path, &reference.pairing_path(f)?))
        .collect()
}

/// `(axis value label, per-column gaps)` for one replication.
type PointGaps = Vec<(String, Vec<f64>)>;

fn summarize(axis: &str, columns: &[String], reps: &[PointGaps]) -> GapTable {
    let r = reps.len();
    let mut rows = Vec::new();
    for (p, (label, _)) in reps[0].iter().enumerate() {
        for (c, name) in columns.iter().enumerate() {
            let xs: Vec<f64> = reps.iter().map(|g| g[p].1[c]).collect();
            let mean = xs.iter().sum::<f64>() / r as f64;
            let stderr = if r > 1 {
                let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (r - 1) as f64;
                (var / r as f64).sqrt()
            } else {
                0.0
            };
            rows.push(GapRow {
                axis_value: label.clone(),
                test_fn: name.clone(),
                mean_gap: mean,
                stderr,
                replications: r,
            });
        }
    }
    GapTable {
        axis: axis.to_string(),
        rows,
    }
}

fn fmt_value(v: f64) -> String {
    format!("{v}")
}

fn columns(setup: &Setup, with_l2: bool) -> Vec<String> {
    let mut c: Vec<String> = setup.test_functions.iter().map(|f| f.to_string()).collect();
    if with_l2 {
        c.push(L2_LABEL.to_string());
    }
    c
}

struct RepOut {
    gaps: PointGaps,
    log: RunLog,
    files: Vec<(String, String)>,
    extra: f64,
}

/// Gaps, merged log, files and per-replication extras, in replication order.
type Merged = (Vec<PointGaps>, RunLog, Vec<(String, String)>, Vec<f64>);

fn run_reps(
    cfg: &ExperimentConfig,
    setup: &Setup,
    f: impl Fn(&Replication<'_>, bool) -> Result<RepOut> + Sync,
) -> Result<Merged> {
    let outs: Vec<RepOut> = (0..cfg.sweep.replications)
        .into_par_iter()
        .map(|r| f(&Replication::new(cfg, setup, r), r == 0))
        .collect::<Result<_>>()?;
    let mut log = RunLog::default();
    let mut files = Vec::new();
    let mut gaps = Vec::with_capacity(outs.len());
    let mut extra = Vec::with_capacity(outs.len());
    for o in outs {
        log.merge(&o.log);
        files.extend(o.files);
        gaps.push(o.gaps);
        extra.push(o.extra);
    }
    Ok((gaps, log, files, extra))
}

fn particle_csv(paths: &[SampledPath], fs: &[TestFunction]) -> String {
    let mut s = String::from("t");
    for f in fs {
        s.push_str(&format!(",pairing_{f}"));
    }
    s.push('\n');
    for (k, t) in paths[0].times().iter().enumerate() {
        s.push_str(&format!("{t:.12e}"));
        for p in paths {
            s.push_str(&format!(",{:.12e}", p.values()[k]));
        }
        s.push('\n');
    }
    s
}

fn as_count(v: f64) -> usize {
    v.round() as usize
}

/// Sweep one axis with the other parameters at their fixed values.
fn sweep_axis(cfg: &ExperimentConfig, setup: &Setup, axis: Axis, values: &[f64]) -> Result<SweepResult> {
    let s = &cfg.sweep;
    let fs = &setup.test_functions;
    let with_l2 = axis != Axis::N;
    let (reps, log, files, _) = run_reps(cfg, setup, |rep, first| {
        let mut log = RunLog::default();
        let mut files = Vec::new();
        let mut gaps = PointGaps::new();
        match axis {
            Axis::N => {
                let d = rep.drivers()?;
                let gamma = rep.gamma(s.gamma_source, &d, s.cutoff);
                let reference = rep.intermediate(
                    &d,
                    Level::EpsMKappa { epsilon: s.epsilon },
                    s.cutoff,
                    s.kappa,
                    gamma,
                    &mut log,
                )?;
                log.pde("reference", &reference);
                if first {
                    files.push(("observables_reference.csv".into(), reference.observables_csv(fs)));
                }
                for &v in values {
                    let n = as_count(v);
                    let params = SystemParams::new(s.epsilon, s.cutoff, s.kappa, modes_of(&d))?;
                    let p = rep.particles(&d, n, params, &mut log)?;
                    if first {
                        files.push((format!("observables_N{n}.csv"), particle_csv(&p, fs)));
                    }
                    gaps.push((fmt_value(v), pairing_gaps_vs(&p, &reference, fs)?));
                }
            }
            Axis::Eps => {
                let d = rep.drivers()?;
                let gamma = rep.gamma(s.gamma_source, &d, s.cutoff);
                let next = rep.intermediate(&d, Level::MKappa, s.cutoff, s.kappa, gamma, &mut log)?;
                log.pde("mkappa", &next);
                for &v in values {
                    let lvl = rep.intermediate(
                        &d,
                        Level::EpsMKappa { epsilon: v },
                        s.cutoff,
                        s.kappa,
                        gamma,
                        &mut log,
                    )?;
                    log.pde("eps_mkappa", &lvl);
                    if first {
                        files.push((format!("observables_eps{v}.csv"), lvl.observables_csv(fs)));
                    }
                    gaps.push((fmt_value(v), field_gaps(&lvl, &next, fs)?));
                }
            }
            Axis::M => {
                let d = rep.drivers()?;
                let next = rep.kappa_level(&d, s.kappa)?;
                log.pde("kappa", &next);
                for &v in values {
                    let lvl = rep.intermediate(
                        &d,
                        Level::MKappa,
                        v,
                        s.kappa,
                        rep.gamma(GammaChoice::Ensemble, &d, v),
                        &mut log,
                    )?;
                    log.pde("mkappa", &lvl);
                    if first {
                        files.push((format!("observables_M{v}.csv"), lvl.observables_csv(fs)));
                    }
                    gaps.push((fmt_value(v), field_gaps(&lvl, &next, fs)?));
                }
            }
            Axis::Kappa => {
                let d = rep.drivers()?;
                let target = rep.target(&d)?;
                log.pde("target", &target);
                if first {
                    files.push(("observables_target.csv".into(), target.observables_csv(fs)));
                }
                for &v in values {
                    let k = as_count(v);
                    let lvl = rep.kappa_level(&d, k)?;
                    log.pde("kappa", &lvl);
                    gaps.push((fmt_value(v), field_gaps(&lvl, &target, fs)?));
                }
            }
            Axis::Modes => {
                let d = rep.mode_drivers(cfg.noise.m_ref)?;
                let target = rep.target(&d)?;
                log.pde("modes_ref", &target);
                for &v in values {
                    let m = as_count(v);
                    let dm = rep.mode_drivers(m)?;
                    let lvl = rep.target(&dm)?;
                    log.pde("modes", &lvl);
                    gaps.push((fmt_value(v), field_gaps(&lvl, &target, fs)?));
                }
            }
        }
        Ok(RepOut {
            gaps,
            log,
            files,
            extra: 0.0,
        })
    })?;
    Ok(SweepResult {
        table: summarize(&axis.to_string(), &columns(setup, with_l2), &reps),
        log,
        observables: files,
    })
}

fn modes_of(d: &Drivers) -> usize {
    match &d.forcing {
        WeightForcing::Profile => 0,
        WeightForcing::Modes(s) => s.m(),
    }
}

/// Particle gaps against the `(ε, M, κ)` weighted-marginal PDE over the
/// configured particle counts.
pub fn run_n_sweep(cfg: &ExperimentConfig) -> Result<SweepResult> {
    let setup = cfg.validate()?;
    let values = if cfg.sweep.axis == Axis::N {
        cfg.sweep.values.clone()
    } else {
        cfg.sweep.ladder.n.iter().map(|&n| n as f64).collect()
    };
    sweep_axis(cfg, &setup, Axis::N, &values)
}

/// The axis and values named in `[sweep]`.
pub fn run_sweep(cfg: &ExperimentConfig) -> Result<SweepResult> {
    let setup = cfg.validate()?;
    sweep_axis(cfg, &setup, cfg.sweep.axis, &cfg.sweep.values)
}

fn ladder_values(cfg: &ExperimentConfig, axis: Axis) -> Vec<f64> {
    let l = &cfg.sweep.ladder;
    match axis {
        Axis::N => l.n.iter().map(|&v| v as f64).collect(),
        Axis::Eps => l.epsilon.clone(),
        Axis::M => l.cutoff.clone(),
        Axis::Kappa => l.kappa.iter().map(|&v| v as f64).collect(),
        Axis::Modes => l.modes.clone().into_iter().map(|v| v as f64).collect(),
    }
}

/// Every non-empty ladder axis, the overall chain against the target and the
/// target's time-step self-convergence.
pub fn run_limit_ladder(cfg: &ExperimentConfig) -> Result<LadderResult> {
    let setup = cfg.validate()?;
    let mut axes = Vec::new();
    let mut log = RunLog::default();
    let mut observables = Vec::new();
    for axis in Axis::ALL {
        let values = ladder_values(cfg, axis);
        if values.is_empty() {
            continue;
        }
        let r = sweep_axis(cfg, &setup, axis, &values)?;
        log.merge(&r.log);
        for (name, text) in r.observables {
            observables.push((format!("{axis}_{name}"), text));
        }
        axes.push(r.table);
    }

    let s = &cfg.sweep;
    let fs = &setup.test_functions;
    let labels = ["N", "eps", "M", "kappa"];
    let (reps, chain_log, _, taus) = run_reps(cfg, &setup, |rep, _| {
        let mut log = RunLog::default();
        let d = rep.drivers()?;
        let target = rep.target(&d)?;
        let half = rep.mkv(&d, d.raw.clone(), cfg.time.dt / 2.0)?;
        let tau = target.sup_l2_distance(&half)?;
        let gamma = rep.gamma(s.gamma_source, &d, s.cutoff);
        let emk = rep.intermediate(&d, Level::EpsMKappa { epsilon: s.epsilon }, s.cutoff, s.kappa, gamma, &mut log)?;
        let mk = rep.intermediate(
            &d,
            Level::MKappa,
            s.cutoff,
            s.kappa,
            rep.gamma(GammaChoice::Ensemble, &d, s.cutoff),
            &mut log,
        )?;
        let kap = rep.kappa_level(&d, s.kappa)?;
        let params = SystemParams::new(s.epsilon, s.cutoff, s.kappa, modes_of(&d))?;
        let p = rep.particles(&d, s.n, params, &mut log)?;
        log.pde("target", &target);
        let levels = [&emk, &mk, &kap];
        let mut gaps = PointGaps::new();
        // each level against the target
        gaps.push((format!("{}_vs_target", labels[0]), pairing_gaps_vs(&p, &target, fs)?));
        for (i, lvl) in levels.iter().enumerate() {
            gaps.push((format!("{}_vs_target", labels[i + 1]), pairing_gaps_vs(&pairings(lvl, fs)?, &target, fs)?));
        }
        // consecutive levels
        gaps.push((format!("{}_vs_{}", labels[0], labels[1]), pairing_gaps_vs(&p, &emk, fs)?));
        for i in 0..2 {
            gaps.push((
                format!("{}_vs_{}", labels[i + 1], labels[i + 2]),
                pairing_gaps_vs(&pairings(levels[i], fs)?, levels[i + 1], fs)?,
            ));
        }
        Ok(RepOut {
            gaps,
            log,
            files: Vec::new(),
            extra: tau,
        })
    })?;
    log.merge(&chain_log);
    let overall = summarize("overall", &columns(&setup, false), &reps);

    // gap(L, target) ≤ gap(L, L+1) + gap(L+1, target), per replication
    let mut violations = 0;
    for g in &reps {
        for l in 0..3 {
            for c in 0..fs.len() {
                let direct = g[l].1[c];
                let via = g[4 + l].1[c] + g[l + 1].1[c];
                if direct > via * (1.0 + 1e-9) + 1e-12 {
                    violations += 1;
                }
            }
        }
    }
    let self_tolerance = taus.iter().sum::<f64>() / taus.len() as f64;
    log.max("ladder.self_tolerance", self_tolerance);
    log.max("ladder.coherence_violations", violations as f64);
    Ok(LadderResult {
        axes,
        overall,
        self_tolerance,
        coherence_violations: violations,
        log,
        observables,
    })
}

