use crate::error::{Error, Result};
use crate::paths::SampledPath;
use crate::particles::CommonDriver;
use crate::torus::{Field, TorusGrid};

/// First-order exponential time differencing for
/// `∂_t u = ∂_xx u + ∂_x[b u] + g`, with the Laplacian integrated exactly.
#[derive(Clone, Debug)]
pub(crate) struct Etd {
    dt: f64,
    decay: Vec<f64>,
    phi1: Vec<f64>,
}

impl Etd {
    pub(crate) fn new(grid: &TorusGrid, dt: f64) -> Self {
        let n = grid.n_points();
        let mut decay = Vec::with_capacity(n);
        let mut phi1 = Vec::with_capacity(n);
        for k in 0..n {
            let z2 = (grid.wavenumber(k) as f64).powi(2);
            decay.push((-z2 * dt).exp());
            phi1.push(if z2 == 0.0 { dt } else { -(-z2 * dt).exp_m1() / z2 });
        }
        Self { dt, decay, phi1 }
    }

    pub(crate) fn dt(&self) -> f64 {
        self.dt
    }

    /// Advance `u` by one step. `drift` is `b`; `increment` is the forcing
    /// accumulated over the step, spread at constant rate.
    pub(crate) fn step(
        &self,
        u: &Field,
        drift: Option<&Field>,
        increment: Option<&Field>,
        t: f64,
        check_cfl: bool,
    ) -> Result<Field> {
        let grid = u.grid();
        let nonlinear = match drift {
            Some(b) => {
                if check_cfl {
                    let bmax = b.sup_norm();
                    if bmax > 0.0 {
                        let limit = grid.spacing() / bmax;
                        if self.dt > limit {
                            return Err(Error::Stability { t, dt: self.dt, limit });
                        }
                    }
                }
                Some(b.product(u)?.derivative(1))
            }
            None => None,
        };
        let inv_dt = 1.0 / self.dt;
        let mut spec = u.spectral().to_vec();
        for (k, s) in spec.iter_mut().enumerate() {
            let mut rhs = num_complex::Complex64::new(0.0, 0.0);
            if let Some(nl) = &nonlinear {
                rhs += nl.spectral()[k];
            }
            if let Some(g) = increment {
                rhs += g.spectral()[k] * inv_dt;
            }
            *s = *s * self.decay[k] + rhs * self.phi1[k];
        }
        let out = Field::from_spectral(grid, spec)?;
        if out.values().iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite(t + self.dt));
        }
        Ok(out)
    }
}

/// Steppers for a uniform mesh whose last step may be shorter.
#[derive(Clone, Debug)]
pub(crate) struct EtdCache {
    grid: TorusGrid,
    cache: Vec<Etd>,
}

impl EtdCache {
    pub(crate) fn new(grid: &TorusGrid) -> Self {
        Self {
            grid: grid.clone(),
            cache: Vec::new(),
        }
    }

    pub(crate) fn get(&mut self, dt: f64) -> &Etd {
        let pos = self
            .cache
            .iter()
            .position(|e| (e.dt() - dt).abs() <= 1e-14 * dt);
        match pos {
            Some(p) => &self.cache[p],
            None => {
                self.cache.push(Etd::new(&self.grid, dt));
                self.cache.last().unwrap()
            }
        }
    }
}

/// Additive forcing `Σ_k g_k(x) ∂_t Y^k_t`.
#[derive(Clone, Debug)]
pub struct PdeForcing {
    profiles: Vec<Field>,
    driver: Option<CommonDriver>,
}

impl PdeForcing {
    pub fn none() -> Self {
        Self {
            profiles: Vec::new(),
            driver: None,
        }
    }

    /// `q ∂_t Y`.
    pub fn profile(q: Field, path: SampledPath) -> Self {
        Self {
            profiles: vec![q],
            driver: Some(CommonDriver::single(path)),
        }
    }

    /// One spatial profile per driving path.
    pub fn new(profiles: Vec<Field>, driver: CommonDriver) -> Result<Self> {
        if profiles.len() != driver.len() {
            return Err(Error::IncrementMismatch {
                expected: profiles.len(),
                got: driver.len(),
            });
        }
        Ok(Self {
            profiles,
            driver: Some(driver),
        })
    }

    /// `Σ_{|z|≤m} λ_z e_z ∂_t Y^z`, paths ordered `z = -m..=m`.
    pub fn modes(grid: &TorusGrid, spec: &crate::paths::NoiseSpec, driver: CommonDriver) -> Result<Self> {
        let m = spec.m() as i64;
        if 2 * spec.m() >= grid.n_points() {
            return Err(Error::InvalidParameter(format!(
                "{} noise modes do not fit on a grid of {} points",
                spec.m(),
                grid.n_points()
            )));
        }
        let profiles = (-m..=m)
            .map(|z| Field::basis(grid, z).scale(spec.lambda(z)))
            .collect();
        Self::new(profiles, driver)
    }

    pub fn is_none(&self) -> bool {
        self.driver.is_none() || self.profiles.iter().all(|p| p.sup_norm() == 0.0)
    }

    pub fn profiles(&self) -> &[Field] {
        &self.profiles
    }

    pub fn driver(&self) -> Option<&CommonDriver> {
        self.driver.as_ref()
    }

    /// `Σ_k g_k (Y^k_t1 - Y^k_t0)`, or `None` without forcing.
    pub fn increment(&self, t0: f64, t1: f64) -> Option<Field> {
        let driver = self.driver.as_ref()?;
        let dy = driver.increments(t0, t1);
        let mut acc: Option<Field> = None;
        for (g, d) in self.profiles.iter().zip(dy) {
            acc = Some(match acc {
                None => g.scale(d),
                Some(a) => a.axpy(d, g).expect("same grid"),
            });
        }
        acc
    }

    /// `Σ_k ⟨1, g_k⟩ (Y^k_t - Y^k_0)`.
    pub fn mass_input(&self, t: f64) -> f64 {
        match &self.driver {
            None => 0.0,
            Some(d) => self
                .profiles
                .iter()
                .zip(d.paths())
                .map(|(g, p)| g.mass() * (p.eval(t) - p.eval(0.0)))
                .sum(),
        }
    }
}
