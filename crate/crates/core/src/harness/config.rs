use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::particles::{InitialLaw, Potentials, SystemParams, TestFunction, WeightLaw};
use crate::paths::{eigenvalue_decay_check, NoiseSpec};
use crate::torus::{basis_eval, Field, MollifierParam, TorusGrid};

/// A real function on the circle: a named preset or a trigonometric series
/// `constant + Σ_k cos[k-1] cos(kx) + Σ_k sin[k-1] sin(kx)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum FunctionSpec {
    Named(String),
    Series {
        #[serde(default)]
        constant: f64,
        #[serde(default)]
        cos: Vec<f64>,
        #[serde(default)]
        sin: Vec<f64>,
    },
}

impl FunctionSpec {
    pub fn named(s: &str) -> Self {
        FunctionSpec::Named(s.to_string())
    }

    /// Presets: `zero`, `one` (alias `uniform`), `cos`, `sin`, `expcos`,
    /// and basis elements `e<z>`.
    pub fn field(&self, grid: &TorusGrid) -> Result<Field> {
        match self {
            FunctionSpec::Named(name) => {
                let f: fn(f64) -> f64 = match name.as_str() {
                    "zero" => |_| 0.0,
                    "one" | "uniform" => |_| 1.0,
                    "cos" => f64::cos,
                    "sin" => f64::sin,
                    "expcos" => |x| x.cos().exp(),
                    other => {
                        let z = other
                            .strip_prefix('e')
                            .and_then(|z| z.parse::<i64>().ok())
                            .ok_or_else(|| Error::Config(format!("unknown function preset {other:?}")))?;
                        return Ok(Field::from_fn(grid, |x| basis_eval(z, x)));
                    }
                };
                Ok(Field::from_fn(grid, f))
            }
            FunctionSpec::Series { constant, cos, sin } => {
                if 2 * cos.len().max(sin.len()) >= grid.n_points() {
                    return Err(Error::Config("series has more modes than the grid resolves".into()));
                }
                Ok(Field::from_fn(grid, |x| {
                    let mut v = *constant;
                    for (k, a) in cos.iter().enumerate() {
                        v += a * ((k + 1) as f64 * x).cos();
                    }
                    for (k, b) in sin.iter().enumerate() {
                        v += b * ((k + 1) as f64 * x).sin();
                    }
                    v
                }))
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Axis {
    #[serde(rename = "N")]
    N,
    #[serde(rename = "eps")]
    Eps,
    #[serde(rename = "M")]
    M,
    #[serde(rename = "kappa")]
    Kappa,
    #[serde(rename = "m")]
    Modes,
}

impl Axis {
    pub const ALL: [Axis; 5] = [Axis::N, Axis::Eps, Axis::M, Axis::Kappa, Axis::Modes];
}

impl fmt::Display for Axis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Axis::N => "N",
            Axis::Eps => "eps",
            Axis::M => "M",
            Axis::Kappa => "kappa",
            Axis::Modes => "m",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseKind {
    /// `q(x) dY`.
    Profile,
    /// `Σ_{|z|≤m} λ_z e_z dY^z` with `λ_0 = c`, `λ_z = c|z|^{-p}`.
    Modes,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GammaChoice {
    /// `Γ_M` against a mean-field reference ensemble.
    Ensemble,
    /// `F' * ρ`; valid while the cutoff never acts.
    Uncut,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridSection {
    pub n: usize,
}

impl Default for GridSection {
    fn default() -> Self {
        Self { n: 256 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TimeSection {
    pub horizon: f64,
    /// Step of particle and PDE solves.
    pub dt: f64,
    /// Sampling step of the Brownian driving paths; defaults to `dt`.
    pub path_dt: Option<f64>,
}

impl Default for TimeSection {
    fn default() -> Self {
        Self {
            horizon: 1.0,
            dt: 2.5e-4,
            path_dt: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PotentialSection {
    pub v: FunctionSpec,
    pub f: FunctionSpec,
    pub q: FunctionSpec,
}

impl Default for PotentialSection {
    fn default() -> Self {
        Self {
            v: FunctionSpec::named("cos"),
            f: FunctionSpec::named("cos"),
            // sin x / √π
            q: FunctionSpec::named("e1"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InitialSection {
    /// Position density, normalized to unit mass.
    pub zeta0: FunctionSpec,
    pub weights: WeightLaw,
}

impl Default for InitialSection {
    fn default() -> Self {
        Self {
            zeta0: FunctionSpec::named("uniform"),
            weights: WeightLaw::Normal { mean: 1.0, std: 0.5 },
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NoiseSection {
    pub kind: NoiseKind,
    pub c: f64,
    pub p: f64,
    /// Truncation standing in for infinitely many modes.
    pub m_ref: usize,
    /// Exponent in the decay condition `Σ λ_z² |z|^{4δ} < ∞`.
    pub delta: f64,
}

impl Default for NoiseSection {
    fn default() -> Self {
        Self {
            kind: NoiseKind::Profile,
            c: 1.0,
            p: 2.0,
            m_ref: 48,
            delta: 0.25,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LadderSection {
    pub n: Vec<usize>,
    pub epsilon: Vec<f64>,
    pub cutoff: Vec<f64>,
    pub kappa: Vec<usize>,
    pub modes: Vec<usize>,
}

impl Default for LadderSection {
    fn default() -> Self {
        Self {
            n: vec![250, 1000, 4000],
            epsilon: vec![0.4, 0.2, 0.1],
            cutoff: vec![1.0, 2.0, 4.0],
            kappa: vec![8, 32, 128],
            modes: vec![2, 8, 32],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepSection {
    /// Axis swept by `simulate`.
    pub axis: Axis,
    pub values: Vec<f64>,
    pub replications: usize,
    pub seed: u64,
    pub test_functions: Vec<String>,
    /// Use one driving path for every replication.
    pub fixed_path: bool,
    pub gamma_source: GammaChoice,
    pub n_ref: usize,
    /// Values of the parameters that are not swept.
    pub n: usize,
    pub epsilon: f64,
    pub cutoff: f64,
    pub kappa: usize,
    pub modes: usize,
    pub ladder: LadderSection,
}

impl Default for SweepSection {
    fn default() -> Self {
        Self {
            axis: Axis::N,
            values: vec![250.0, 1000.0, 4000.0],
            replications: 16,
            seed: 1,
            test_functions: vec!["e-1".into(), "e1".into(), "one".into()],
            fixed_path: false,
            gamma_source: GammaChoice::Ensemble,
            n_ref: 10_000,
            n: 1000,
            epsilon: 0.2,
            cutoff: 10.0,
            kappa: 64,
            modes: 8,
            ladder: LadderSection::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    /// Used when the command line gives no output directory.
    pub dir: String,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self {
            dir: "out".into(),
        }
    }
}

/// Everything that determines an experiment's output.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub grid: GridSection,
    pub time: TimeSection,
    pub potentials: PotentialSection,
    pub initial: InitialSection,
    pub noise: NoiseSection,
    pub sweep: SweepSection,
    pub output: OutputSection,
}

/// Validated, ready-to-run inputs shared by all experiments.
#[derive(Clone, Debug)]
pub struct Setup {
    pub grid: TorusGrid,
    pub potentials: Potentials,
    pub law: InitialLaw,
    pub test_functions: Vec<TestFunction>,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text)
    }

    /// Canonical serialization; parses back to an equal config.
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// SHA-256 of the canonical serialization, hex encoded.
    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.to_toml().as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn path_dt(&self) -> f64 {
        self.time.path_dt.unwrap_or(self.time.dt)
    }

    pub fn test_functions(&self) -> Result<Vec<TestFunction>> {
        self.sweep.test_functions.iter().map(|s| s.parse()).collect()
    }

    pub fn setup(&self) -> Result<Setup> {
        let grid = TorusGrid::new(self.grid.n)?;
        let p = &self.potentials;
        let potentials = Potentials::new(p.v.field(&grid)?, p.f.field(&grid)?, p.q.field(&grid)?)?;
        let law = InitialLaw::new(self.initial.zeta0.field(&grid)?, self.initial.weights)?;
        Ok(Setup {
            grid,
            potentials,
            law,
            test_functions: self.test_functions()?,
        })
    }

    /// `λ_z` law used for the mode family.
    pub fn noise_spec(&self, m: usize) -> Result<NoiseSpec> {
        NoiseSpec::parametric(self.noise.c, self.noise.p, m)
    }

    /// Check every constraint the runs rely on, without running anything.
    pub fn validate(&self) -> Result<Setup> {
        let bad = |msg: String| Err(Error::Config(msg));
        let t = &self.time;
        if !(t.horizon > 0.0 && t.horizon.is_finite()) {
            return bad(format!("horizon must be positive, got {}", t.horizon));
        }
        if !(t.dt > 0.0 && t.dt <= t.horizon) {
            return bad(format!("dt must lie in (0, T], got {}", t.dt));
        }
        if !(self.path_dt() > 0.0 && self.path_dt() <= t.horizon) {
            return bad(format!("path_dt must lie in (0, T], got {}", self.path_dt()));
        }
        let s = &self.sweep;
        if s.replications == 0 {
            return bad("replications must be at least 1".into());
        }
        if s.test_functions.is_empty() {
            return bad("no test functions".into());
        }
        if s.n == 0 || s.kappa == 0 || s.n_ref == 0 {
            return bad("n, kappa and n_ref must be positive".into());
        }
        if s.values.is_empty() {
            return bad("sweep values are empty".into());
        }
        let setup = self.setup()?;
        let h = setup.grid.spacing();
        let l = &s.ladder;
        let eps_all: Vec<f64> = std::iter::once(s.epsilon)
            .chain(l.epsilon.iter().copied())
            .chain(self.axis_values_f64(Axis::Eps, s.axis))
            .collect();
        for &e in &eps_all {
            let m = MollifierParam::new(e)?;
            // the kernel must be resolved by the grid
            let phi = m.field(&setup.grid);
            let tail = phi.coefficient((setup.grid.n_points() / 2 - 1) as i64).norm();
            if tail > 1e-10 * phi.coefficient(0).norm() {
                return bad(format!("epsilon = {e} is not resolved on {} points", setup.grid.n_points()));
            }
        }
        let cut_all: Vec<f64> = std::iter::once(s.cutoff)
            .chain(l.cutoff.iter().copied())
            .chain(self.axis_values_f64(Axis::M, s.axis))
            .collect();
        let pot = &setup.potentials;
        for &m in &cut_all {
            SystemParams::new(1.0, m, 1, 0)?;
            let drift = pot.dv().sup_norm() + 2.0 * m * pot.df().sup_norm();
            if t.dt * drift > h {
                return bad(format!("dt = {} violates the drift CFL bound at M = {m}", t.dt));
            }
        }
        for v in self.axis_values_f64(Axis::N, s.axis).chain(l.n.iter().map(|&n| n as f64)) {
            if !(v >= 1.0 && v.fract() == 0.0) {
                return bad(format!("particle count {v} is not a positive integer"));
            }
        }
        for v in self
            .axis_values_f64(Axis::Kappa, s.axis)
            .chain(l.kappa.iter().map(|&k| k as f64))
        {
            if !(v >= 1.0 && v.fract() == 0.0) {
                return bad(format!("kappa {v} is not a positive integer"));
            }
        }
        let modes: Vec<f64> = self
            .axis_values_f64(Axis::Modes, s.axis)
            .chain(l.modes.iter().map(|&m| m as f64))
            .chain([s.modes as f64, self.noise.m_ref as f64])
            .collect();
        for &m in &modes {
            if m.fract() != 0.0 || m < 0.0 || 2.0 * m >= setup.grid.n_points() as f64 {
                return bad(format!("{m} noise modes do not fit the grid"));
            }
        }
        if self.noise.kind == NoiseKind::Modes || !l.modes.is_empty() || s.axis == Axis::Modes {
            let spec = self.noise_spec(self.noise.m_ref)?;
            if !eigenvalue_decay_check(&spec, self.noise.delta)?.accepted {
                return bad(format!(
                    "noise eigenvalues with p = {} fail the decay condition at delta = {}",
                    self.noise.p, self.noise.delta
                ));
            }
            if l.modes.iter().chain(&[s.modes]).any(|&m| m > self.noise.m_ref) {
                return bad("m_ref must be at least every swept mode count".into());
            }
        }
        Ok(setup)
    }

    fn axis_values_f64(&self, axis: Axis, swept: Axis) -> impl Iterator<Item = f64> + '_ {
        let v: &[f64] = if axis == swept { &self.sweep.values } else { &[] };
        v.iter().copied()
    }
}
