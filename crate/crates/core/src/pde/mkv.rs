use std::io::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::paths::{uniform_mesh, SampledPath};
use crate::particles::{Potentials, TestFunction};
use crate::torus::{Field, TorusGrid};

use super::etd::{Etd, EtdCache, PdeForcing};

/// Drift closure of a forced Fokker–Planck solve.
#[derive(Clone, Debug)]
pub enum PdeDrift {
    /// `V' + F' * ρ` from the current solution.
    SelfConsistent,
    /// `V' + g` with `g` fixed in time.
    Frozen(Field),
}

/// Cauchy problem `∂_t ρ = ∂_xx ρ + ∂_x[b ρ] + Σ g_k ∂_t Y^k`.
#[derive(Clone, Debug)]
pub struct PdeRun {
    pub dt: f64,
    pub horizon: f64,
    pub initial: Field,
    pub potentials: Potentials,
    pub forcing: PdeForcing,
    pub drift: PdeDrift,
    /// Keep every `record_every`-th step (the last step is always kept).
    pub record_every: usize,
}

impl PdeRun {
    pub fn new(initial: Field, potentials: Potentials, dt: f64, horizon: f64) -> Self {
        Self {
            dt,
            horizon,
            initial,
            potentials,
            forcing: PdeForcing::none(),
            drift: PdeDrift::SelfConsistent,
            record_every: 1,
        }
    }

    pub fn with_forcing(mut self, forcing: PdeForcing) -> Self {
        self.forcing = forcing;
        self
    }

    pub fn with_drift(mut self, drift: PdeDrift) -> Self {
        self.drift = drift;
        self
    }

    pub fn recording_every(mut self, k: usize) -> Self {
        self.record_every = k.max(1);
        self
    }

    pub fn grid(&self) -> &TorusGrid {
        self.initial.grid()
    }

    fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0) || !(self.horizon > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "need dt > 0 and T > 0, got dt = {}, T = {}",
                self.dt, self.horizon
            )));
        }
        if self.potentials.grid() != self.grid() {
            return Err(Error::GridMismatch {
                left: self.grid().n_points(),
                right: self.potentials.grid().n_points(),
            });
        }
        for g in self.forcing.profiles() {
            if g.grid() != self.grid() {
                return Err(Error::GridMismatch {
                    left: self.grid().n_points(),
                    right: g.grid().n_points(),
                });
            }
        }
        if let Some(d) = self.forcing.driver() {
            if d.horizon() + 1e-12 * self.horizon < self.horizon {
                return Err(Error::DomainMismatch {
                    left: self.horizon,
                    right: d.horizon(),
                });
            }
        }
        Ok(())
    }
}

/// Running bookkeeping of a PDE solve.
#[derive(Clone, Debug, PartialEq)]
pub struct PdeDiagnostics {
    pub steps: usize,
    /// `sup_t ‖ρ_t‖_{L²}`.
    pub sup_l2: f64,
    /// `∫_0^T ‖∂_x ρ_t‖²_{L²} dt`, left-point rule.
    pub dissipation: f64,
    /// `sup_t |⟨1,ρ_t⟩ - ⟨1,ρ_0⟩ - Σ ⟨1,g_k⟩(Y^k_t - Y^k_0)|`.
    pub mass_residual: f64,
    /// Smallest nodal value seen.
    pub min_value: f64,
    /// `sup_t ‖ρ_t‖_{H²}`.
    pub sup_h2: f64,
    /// Largest `dt · max|b| / h` seen.
    pub max_cfl: f64,
}

impl PdeDiagnostics {
    fn start(u: &Field) -> Self {
        Self {
            steps: 0,
            sup_l2: u.l2_norm(),
            dissipation: 0.0,
            mass_residual: 0.0,
            min_value: u.min().0,
            sup_h2: h2(u),
            max_cfl: 0.0,
        }
    }

    /// `sup_t ‖ρ_t‖_{L²} + ∫ ‖∂_x ρ‖²`.
    pub fn energy(&self) -> f64 {
        self.sup_l2 + self.dissipation
    }
}

fn h2(u: &Field) -> f64 {
    u.sobolev_norm(2).unwrap_or(f64::INFINITY)
}

/// Solution fields at the recorded times.
#[derive(Clone, Debug)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub fields: Vec<Field>,
    pub diagnostics: PdeDiagnostics,
}

impl Trajectory {
    pub fn last(&self) -> &Field {
        self.fields.last().expect("trajectory is never empty")
    }

    pub fn grid(&self) -> &TorusGrid {
        self.fields[0].grid()
    }

    /// Index of the recorded time equal to `t` up to `1e-9`.
    pub fn index_of(&self, t: f64) -> Option<usize> {
        let tol = 1e-9 * self.times.last().copied().unwrap_or(1.0).max(1.0);
        let k = self.times.partition_point(|&s| s < t - tol);
        (k < self.times.len() && (self.times[k] - t).abs() <= tol).then_some(k)
    }

    pub fn field_at(&self, t: f64) -> Result<&Field> {
        self.index_of(t)
            .map(|k| &self.fields[k])
            .ok_or_else(|| Error::MissingReference(format!("no field recorded at t = {t}")))
    }

    /// `t ↦ ⟨f, ρ_t⟩` at the recorded times.
    pub fn pairing_path(&self, f: &TestFunction) -> Result<SampledPath> {
        SampledPath::new(
            self.times.clone(),
            self.fields.iter().map(|u| f.pair_field(u)).collect(),
        )
    }

    /// `sup_t ‖ρ_t - ρ'_t‖_{L²}` over the times of `self` that `other` also
    /// recorded. Fields on different grids are compared on the coarser one.
    pub fn sup_l2_distance(&self, other: &Trajectory) -> Result<f64> {
        let mut best = 0.0f64;
        let mut matched = 0;
        for (t, u) in self.times.iter().zip(&self.fields) {
            if let Some(k) = other.index_of(*t) {
                best = best.max(l2_gap(u, &other.fields[k]));
                matched += 1;
            }
        }
        if matched == 0 {
            return Err(Error::MissingReference("trajectories share no output time".into()));
        }
        Ok(best)
    }

    /// Same as [`Self::sup_l2_distance`] in the sup norm.
    pub fn sup_distance(&self, other: &Trajectory) -> Result<f64> {
        let mut best = 0.0f64;
        let mut matched = 0;
        for (t, u) in self.times.iter().zip(&self.fields) {
            if let Some(k) = other.index_of(*t) {
                let (a, b) = common_grid(u, &other.fields[k]);
                best = best.max(a.sub(&b).expect("common grid").sup_norm());
                matched += 1;
            }
        }
        if matched == 0 {
            return Err(Error::MissingReference("trajectories share no output time".into()));
        }
        Ok(best)
    }

    /// `t, mass, min, l2norm, h1norm, pairing_<f>...` as CSV text.
    pub fn observables_csv(&self, fs: &[TestFunction]) -> String {
        let mut out = String::from("t,mass,min,l2norm,h1norm");
        for f in fs {
            out.push_str(&format!(",pairing_{f}"));
        }
        out.push('\n');
        for (t, u) in self.times.iter().zip(&self.fields) {
            out.push_str(&format!(
                "{t:.12e},{:.12e},{:.12e},{:.12e},{:.12e}",
                u.integral(),
                u.min().0,
                u.l2_norm(),
                u.sobolev_norm(1).unwrap_or(f64::NAN)
            ));
            for f in fs {
                out.push_str(&format!(",{:.12e}", f.pair_field(u)));
            }
            out.push('\n');
        }
        out
    }

    pub fn write_observables_csv(&self, path: impl AsRef<Path>, fs: &[TestFunction]) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.observables_csv(fs)).map_err(|e| Error::io(path, e))
    }

    /// `t` then one column per grid node.
    pub fn write_fields_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = std::io::BufWriter::new(file);
        let grid = self.grid();
        let mut head = String::from("t");
        for x in grid.nodes() {
            head.push_str(&format!(",{x:.12e}"));
        }
        writeln!(w, "{head}").map_err(|e| Error::io(path, e))?;
        for (t, u) in self.times.iter().zip(&self.fields) {
            let mut line = format!("{t:.12e}");
            for v in u.values() {
                line.push_str(&format!(",{v:.12e}"));
            }
            writeln!(w, "{line}").map_err(|e| Error::io(path, e))?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }
}

fn common_grid(a: &Field, b: &Field) -> (Field, Field) {
    if a.grid() == b.grid() {
        (a.clone(), b.clone())
    } else if a.grid().n_points() < b.grid().n_points() {
        (a.clone(), resample(b, a.grid()))
    } else {
        (resample(a, b.grid()), b.clone())
    }
}

fn l2_gap(a: &Field, b: &Field) -> f64 {
    let (a, b) = common_grid(a, b);
    a.sub(&b).expect("common grid").l2_norm()
}

/// Interpolate through the trigonometric band onto another grid.
pub fn resample(u: &Field, grid: &TorusGrid) -> Field {
    let ev = u.evaluator();
    Field::from_fn(grid, |x| ev.eval(x))
}

/// Drift `V' + F' * ρ`.
pub fn mkv_drift(rho: &Field, pot: &Potentials) -> Result<Field> {
    pot.dv().add(&pot.df().convolve(rho)?)
}

/// One exponential Euler step of the forced McKean–Vlasov equation.
/// `forcing_increment` is `Σ_k g_k ΔY^k` over the step.
pub fn step_mkv(
    rho: &Field,
    pot: &Potentials,
    dt: f64,
    forcing_increment: Option<&Field>,
) -> Result<Field> {
    if !(dt > 0.0) {
        return Err(Error::InvalidParameter(format!("time step must be positive, got {dt}")));
    }
    let b = mkv_drift(rho, pot)?;
    Etd::new(rho.grid(), dt).step(rho, Some(&b), forcing_increment, 0.0, true)
}

/// Diagnostics and output buffer of one stepping loop.
pub(crate) struct Recorder {
    mass0: f64,
    input: f64,
    diag: PdeDiagnostics,
    times: Vec<f64>,
    fields: Vec<Field>,
    every: usize,
    last: usize,
    h: f64,
}

impl Recorder {
    pub(crate) fn new(u0: &Field, record_every: usize, n_steps: usize) -> Self {
        Self {
            mass0: u0.mass(),
            input: 0.0,
            diag: PdeDiagnostics::start(u0),
            times: vec![0.0],
            fields: vec![u0.clone()],
            every: record_every.max(1),
            last: n_steps,
            h: u0.grid().spacing(),
        }
    }

    /// Before stepping `u` by `dt` with drift `b`.
    pub(crate) fn before(&mut self, u: &Field, b: Option<&Field>, dt: f64) {
        if let Some(b) = b {
            self.diag.max_cfl = self.diag.max_cfl.max(dt * b.sup_norm() / self.h);
        }
        let ux = u.derivative(1).l2_norm();
        self.diag.dissipation += ux * ux * dt;
    }

    /// After step `k` landed on `u` at `t`; `input_mass` is `⟨1, increment⟩`.
    pub(crate) fn after(&mut self, k: usize, t: f64, u: &Field, input_mass: f64) {
        let d = &mut self.diag;
        d.steps += 1;
        d.sup_l2 = d.sup_l2.max(u.l2_norm());
        d.min_value = d.min_value.min(u.min().0);
        d.sup_h2 = d.sup_h2.max(h2(u));
        self.input += input_mass;
        let resid = u.mass() - self.mass0 - self.input;
        d.mass_residual = d.mass_residual.max(resid.abs());
        if (k + 1).is_multiple_of(self.every) || k + 1 == self.last {
            self.times.push(t);
            self.fields.push(u.clone());
        }
    }

    pub(crate) fn finish(self) -> Trajectory {
        Trajectory {
            times: self.times,
            fields: self.fields,
            diagnostics: self.diag,
        }
    }
}

/// Shared stepping loop: `drift(k, t, u)` gives `b` at the start of each step.
pub(crate) fn integrate(
    initial: &Field,
    dt: f64,
    horizon: f64,
    forcing: &PdeForcing,
    record_every: usize,
    mut drift: impl FnMut(usize, f64, &Field) -> Result<Option<Field>>,
) -> Result<Trajectory> {
    let times = uniform_mesh(horizon, dt)?;
    let mut cache = EtdCache::new(initial.grid());
    let mut u = initial.clone();
    let mut rec = Recorder::new(&u, record_every, times.len() - 1);
    for k in 0..times.len() - 1 {
        let (t0, t1) = (times[k], times[k + 1]);
        let b = drift(k, t0, &u)?;
        rec.before(&u, b.as_ref(), t1 - t0);
        let inc = forcing.increment(t0, t1);
        u = cache.get(t1 - t0).step(&u, b.as_ref(), inc.as_ref(), t0, true)?;
        rec.after(k, t1, &u, inc.as_ref().map_or(0.0, Field::mass));
    }
    Ok(rec.finish())
}

/// Solve a [`PdeRun`] to its horizon.
pub fn solve_mkv(run: &PdeRun) -> Result<Trajectory> {
    run.validate()?;
    let pot = &run.potentials;
    let frozen = match &run.drift {
        PdeDrift::SelfConsistent => None,
        PdeDrift::Frozen(g) => Some(pot.dv().add(g)?),
    };
    integrate(
        &run.initial,
        run.dt,
        run.horizon,
        &run.forcing,
        run.record_every,
        |_, _, u| match &frozen {
            Some(b) => Ok(Some(b.clone())),
            None => mkv_drift(u, pot).map(Some),
        },
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::paths::SampledPath;
    use std::f64::consts::TAU;

    fn g(n: usize) -> TorusGrid {
        TorusGrid::new(n).unwrap()
    }

    fn cos_pot(grid: &TorusGrid, q: f64) -> Potentials {
        Potentials::new(
            Field::from_fn(grid, f64::cos),
            Field::from_fn(grid, f64::cos),
            Field::from_fn(grid, |x| q * x.sin() + 0.3 * q),
        )
        .unwrap()
    }

    fn smooth_rho(grid: &TorusGrid) -> Field {
        Field::from_fn(grid, |x| (1.0 + 0.5 * x.cos() + 0.2 * (2.0 * x).sin()) / TAU)
    }

    #[test]
    fn pure_heat_step() {
        let grid = g(32);
        let pot = Potentials::zero(&grid);
        let u = Field::basis(&grid, 3).add(&Field::constant(&grid, 0.1)).unwrap();
        let dt = 0.01;
        let v = step_mkv(&u, &pot, dt, None).unwrap();
        let ratio = v.coefficient(3).norm() / u.coefficient(3).norm();
        assert!((ratio - (-9.0 * dt).exp()).abs() < 1e-14);
        assert!((v.coefficient(0) - u.coefficient(0)).norm() < 1e-16);
    }

    #[test]
    fn mode_zero_balance() {
        let grid = g(64);
        let pot = cos_pot(&grid, 1.0);
        let rho = smooth_rho(&grid);
        let dy = 0.037;
        let inc = pot.q().scale(dy);
        let next = step_mkv(&rho, &pot, 1e-3, Some(&inc)).unwrap();
        let expect = rho.integral() + pot.q().integral() * dy;
        assert!((next.integral() - expect).abs() < 1e-12);
    }

    #[test]
    fn stability_and_nan() {
        let grid = g(64);
        let pot = Potentials::new(
            Field::from_fn(&grid, |x| 50.0 * x.cos()),
            Field::zeros(&grid),
            Field::zeros(&grid),
        )
        .unwrap();
        let rho = smooth_rho(&grid);
        assert!(matches!(step_mkv(&rho, &pot, 0.01, None), Err(Error::Stability { .. })));
        let bad = Field::from_values(&grid, vec![f64::NAN; 64]);
        if let Ok(bad) = bad {
            assert!(step_mkv(&bad, &Potentials::zero(&grid), 0.01, None).is_err());
        }
    }

    #[test]
    fn zero_stays_zero() {
        let grid = g(32);
        let run = PdeRun::new(Field::zeros(&grid), cos_pot(&grid, 0.0), 0.01, 0.5);
        let tr = solve_mkv(&run).unwrap();
        assert_eq!(tr.times.len(), 51);
        assert!(tr.fields.iter().all(|u| u.sup_norm() == 0.0));
    }

    #[test]
    fn mass_identity_with_forcing() {
        let grid = g(64);
        let pot = cos_pot(&grid, 1.0);
        let times = uniform_mesh(1.0, 0.01).unwrap();
        let y = SampledPath::from_fn(times, |t| (3.0 * t).sin() + t * t).unwrap();
        let run = PdeRun::new(smooth_rho(&grid), pot.clone(), 5e-3, 1.0)
            .with_forcing(PdeForcing::profile(pot.q().clone(), y.clone()));
        let tr = solve_mkv(&run).unwrap();
        assert!(tr.diagnostics.mass_residual < 1e-10);
        for (t, u) in tr.times.iter().zip(&tr.fields) {
            let want = 1.0 + pot.q().integral() * (y.eval(*t) - y.eval(0.0));
            assert!((u.integral() - want).abs() < 1e-10);
        }
        assert!(tr.diagnostics.energy().is_finite());
    }

    #[test]
    fn stationary_density() {
        let grid = g(64);
        let pot = Potentials::new(Field::from_fn(&grid, f64::cos), Field::zeros(&grid), Field::zeros(&grid)).unwrap();
        let run = PdeRun::new(Field::constant(&grid, 1.0 / TAU), pot, 0.01, 20.0).recording_every(2000);
        let tr = solve_mkv(&run).unwrap();
        // Z = 2π I0(1)
        let n = 20_000;
        let z: f64 = (0..n).map(|j| (-(TAU * j as f64 / n as f64).cos()).exp()).sum::<f64>() * TAU / n as f64;
        let gap = tr
            .last()
            .values()
            .iter()
            .zip(grid.nodes())
            .map(|(v, x)| (v - (-x.cos()).exp() / z).abs())
            .fold(0.0, f64::max);
        assert!(gap < 1e-6, "gap {gap}");
    }

    #[test]
    fn grid_refinement() {
        let run = |n: usize| {
            let grid = g(n);
            let pot = cos_pot(&grid, 0.0);
            solve_mkv(&PdeRun::new(smooth_rho(&grid), pot, 1e-3, 0.2).recording_every(50)).unwrap()
        };
        let (a, b, c) = (run(16), run(32), run(64));
        let d1 = b.sup_distance(&a).unwrap();
        let d2 = c.sup_distance(&b).unwrap();
        assert!(d2 * 4.0 <= d1 || d2 < 1e-13, "{d1} {d2}");
    }

    #[test]
    fn first_order_in_time() {
        let grid = g(32);
        let pot = cos_pot(&grid, 0.0);
        let run = |dt: f64| {
            solve_mkv(&PdeRun::new(smooth_rho(&grid), pot.clone(), dt, 1.0)).unwrap()
        };
        let fine = run(1.25e-3);
        let gaps: Vec<f64> = [1e-2, 5e-3, 2.5e-3]
            .iter()
            .map(|&dt| run(dt).sup_distance(&fine).unwrap())
            .collect();
        assert!(gaps[0] > gaps[1] && gaps[1] > gaps[2]);
        let r = gaps[0] / gaps[1];
        assert!(r > 1.6 && r < 2.6, "ratio {r}");
    }

    #[test]
    fn frozen_drift_matches_explicit() {
        let grid = g(32);
        let pot = Potentials::zero(&grid);
        let u0 = Field::constant(&grid, 1.0 / TAU);
        let run = PdeRun::new(u0.clone(), pot, 0.01, 0.5).with_drift(PdeDrift::Frozen(Field::constant(&grid, 0.7)));
        let tr = solve_mkv(&run).unwrap();
        assert!(tr.last().sub(&u0).unwrap().sup_norm() < 1e-14);
    }

    #[test]
    fn observables_csv() {
        let grid = g(16);
        let tr = solve_mkv(&PdeRun::new(smooth_rho(&grid), cos_pot(&grid, 0.0), 0.1, 0.3)).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("obs.csv");
        tr.write_observables_csv(&p, &[TestFunction::Basis(1), TestFunction::One]).unwrap();
        let s = std::fs::read_to_string(&p).unwrap();
        assert!(s.starts_with("t,mass,min,l2norm,h1norm,pairing_e1,pairing_one\n"));
        assert_eq!(s.lines().count(), 5);
        let f = dir.path().join("fields.csv");
        tr.write_fields_csv(&f).unwrap();
        let s = std::fs::read_to_string(&f).unwrap();
        assert_eq!(s.lines().next().unwrap().split(',').count(), 17);
    }
}
