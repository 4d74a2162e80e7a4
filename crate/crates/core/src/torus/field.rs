use std::f64::consts::PI;
use std::fs;
use std::io::Write as _;
use std::path::Path;

use num_complex::Complex64;

use super::grid::TorusGrid;
use crate::error::{Error, Result};

const TWO_PI: f64 = 2.0 * PI;

/// Real function sampled on a [`TorusGrid`] with its Fourier coefficients.
///
/// `spectral[k]` is the coefficient of `e^{i z x}` where `z = grid.wavenumber(k)`,
/// normalized so that `values[j] = Σ_k spectral[k] e^{i z x_j}`.
#[derive(Clone, Debug)]
pub struct Field {
    grid: TorusGrid,
    values: Vec<f64>,
    spectral: Vec<Complex64>,
}

impl Field {
    pub fn from_values(grid: &TorusGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.n_points() {
            return Err(Error::GridMismatch {
                left: grid.n_points(),
                right: values.len(),
            });
        }
        let spectral = grid.forward(&values);
        Ok(Self {
            grid: grid.clone(),
            values,
            spectral,
        })
    }

    pub fn from_fn(grid: &TorusGrid, f: impl Fn(f64) -> f64) -> Self {
        let values = grid.nodes().into_iter().map(f).collect();
        Self::from_values(grid, values).expect("length matches grid")
    }

    /// Build from coefficients, enforcing conjugate symmetry so the field is real.
    pub fn from_spectral(grid: &TorusGrid, mut spectral: Vec<Complex64>) -> Result<Self> {
        let n = grid.n_points();
        if spectral.len() != n {
            return Err(Error::GridMismatch {
                left: n,
                right: spectral.len(),
            });
        }
        spectral[0].im = 0.0;
        spectral[n / 2].im = 0.0;
        for k in 1..n / 2 {
            let avg = 0.5 * (spectral[k] + spectral[n - k].conj());
            spectral[k] = avg;
            spectral[n - k] = avg.conj();
        }
        let values = grid.inverse(&spectral);
        Ok(Self {
            grid: grid.clone(),
            values,
            spectral,
        })
    }

    pub fn zeros(grid: &TorusGrid) -> Self {
        Self::constant(grid, 0.0)
    }

    pub fn constant(grid: &TorusGrid, c: f64) -> Self {
        let n = grid.n_points();
        let mut spectral = vec![Complex64::new(0.0, 0.0); n];
        spectral[0] = Complex64::new(c, 0.0);
        Self {
            grid: grid.clone(),
            values: vec![c; n],
            spectral,
        }
    }

    /// The orthonormal basis element `e_z` sampled on the grid.
    pub fn basis(grid: &TorusGrid, z: i64) -> Self {
        Self::from_fn(grid, |x| super::kernels::basis_eval(z, x))
    }

    pub fn grid(&self) -> &TorusGrid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn spectral(&self) -> &[Complex64] {
        &self.spectral
    }

    /// Coefficient of `e^{i z x}`; zero for unresolved modes.
    pub fn coefficient(&self, z: i64) -> Complex64 {
        self.grid
            .index_of(z)
            .map(|k| self.spectral[k])
            .unwrap_or_default()
    }

    fn check_grid(&self, other: &Field) -> Result<()> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch {
                left: self.grid.n_points(),
                right: other.grid.n_points(),
            });
        }
        Ok(())
    }

    fn map_spectral(&self, f: impl Fn(i64, Complex64) -> Complex64) -> Field {
        let spectral: Vec<Complex64> = self
            .spectral
            .iter()
            .enumerate()
            .map(|(k, &c)| f(self.grid.wavenumber(k), c))
            .collect();
        let values = self.grid.inverse(&spectral);
        Field {
            grid: self.grid.clone(),
            values,
            spectral,
        }
    }

    /// Heat semigroup `e^{tΔ}`: mode `z` is damped by `e^{-t z²}`.
    pub fn heat_propagate(&self, t: f64) -> Result<Field> {
        if t < 0.0 || t.is_nan() {
            return Err(Error::NegativeTime(t));
        }
        Ok(self.map_spectral(|z, c| c * (-t * (z * z) as f64).exp()))
    }

    /// Spectral derivative of the given order. The Nyquist mode is dropped
    /// for odd orders.
    pub fn derivative(&self, order: u32) -> Field {
        let nyq = self.grid.nyquist() as i64;
        self.map_spectral(|z, c| {
            if order % 2 == 1 && z == nyq {
                return Complex64::new(0.0, 0.0);
            }
            c * Complex64::new(0.0, z as f64).powu(order)
        })
    }

    /// Periodic convolution `∫ f(x - y) g(y) dy`.
    pub fn convolve(&self, other: &Field) -> Result<Field> {
        self.check_grid(other)?;
        let spectral: Vec<Complex64> = self
            .spectral
            .iter()
            .zip(&other.spectral)
            .map(|(a, b)| a * b * TWO_PI)
            .collect();
        Field::from_spectral(&self.grid, spectral)
    }

    /// Pointwise product with 3/2-rule dealiasing.
    pub fn product(&self, other: &Field) -> Result<Field> {
        self.check_grid(other)?;
        let spectral = self.grid.dealiased_product(&self.spectral, &other.spectral);
        Field::from_spectral(&self.grid, spectral)
    }

    /// Pointwise product on the nodes, no dealiasing.
    pub fn pointwise(&self, other: &Field) -> Result<Field> {
        self.check_grid(other)?;
        let v = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a * b)
            .collect();
        Field::from_values(&self.grid, v)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Field {
        let v = self.values.iter().map(|&x| f(x)).collect();
        Field::from_values(&self.grid, v).expect("same grid")
    }

    pub fn scale(&self, c: f64) -> Field {
        Field {
            grid: self.grid.clone(),
            values: self.values.iter().map(|v| v * c).collect(),
            spectral: self.spectral.iter().map(|v| v * c).collect(),
        }
    }

    pub fn add(&self, other: &Field) -> Result<Field> {
        self.axpy(1.0, other)
    }

    pub fn sub(&self, other: &Field) -> Result<Field> {
        self.axpy(-1.0, other)
    }

    /// `self + a * other`.
    pub fn axpy(&self, a: f64, other: &Field) -> Result<Field> {
        self.check_grid(other)?;
        Ok(Field {
            grid: self.grid.clone(),
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(x, y)| x + a * y)
                .collect(),
            spectral: self
                .spectral
                .iter()
                .zip(&other.spectral)
                .map(|(x, y)| x + a * y)
                .collect(),
        })
    }

    /// `∫ f` by the trapezoid rule.
    pub fn integral(&self) -> f64 {
        self.grid.spacing() * self.values.iter().sum::<f64>()
    }

    /// `∫ f` read off the zero mode; agrees with [`Field::integral`] up to rounding.
    pub fn mass(&self) -> f64 {
        TWO_PI * self.spectral[0].re
    }

    /// `∫ f g` by the trapezoid rule.
    pub fn pair(&self, other: &Field) -> Result<f64> {
        self.check_grid(other)?;
        let s: f64 = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a * b)
            .sum();
        Ok(self.grid.spacing() * s)
    }

    /// `∫ f(x) g(x) dx` for a plain function `g`.
    pub fn pair_fn(&self, g: impl Fn(f64) -> f64) -> f64 {
        let h = self.grid.spacing();
        h * self
            .values
            .iter()
            .enumerate()
            .map(|(j, v)| v * g(j as f64 * h))
            .sum::<f64>()
    }

    pub fn l2_norm(&self) -> f64 {
        let s: f64 = self.values.iter().map(|v| v * v).sum();
        (self.grid.spacing() * s).sqrt()
    }

    /// `L²` norm computed from the coefficients (Parseval).
    pub fn spectral_l2_norm(&self) -> f64 {
        (TWO_PI * self.spectral.iter().map(|c| c.norm_sqr()).sum::<f64>()).sqrt()
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Minimum nodal value and the node where it is attained.
    pub fn min(&self) -> (f64, f64) {
        let (j, v) = self
            .values
            .iter()
            .enumerate()
            .fold((0, f64::INFINITY), |(bj, bv), (j, &v)| {
                if v < bv {
                    (j, v)
                } else {
                    (bj, bv)
                }
            });
        (v, self.grid.node(j))
    }

    pub fn max(&self) -> f64 {
        self.values.iter().fold(f64::NEG_INFINITY, |m, &v| m.max(v))
    }

    /// `(Σ_{i≤k} ‖∂^i f‖²)^{1/2}` for `k ≤ 4`.
    pub fn sobolev_norm(&self, k: usize) -> Result<f64> {
        if k > 4 {
            return Err(Error::SobolevOrder(k));
        }
        let nyq = self.grid.nyquist();
        let mut total = 0.0;
        let mut top = 0.0;
        for (idx, c) in self.spectral.iter().enumerate() {
            let z2 = (self.grid.wavenumber(idx) as f64).powi(2);
            let weight: f64 = (0..=k).map(|i| z2.powi(i as i32)).sum();
            let e = c.norm_sqr() * weight;
            total += e;
            let z = self.grid.wavenumber(idx).unsigned_abs() as usize;
            if 4 * z >= 3 * nyq {
                top += e;
            }
        }
        if k > 0 && total > 0.0 && top / total > 1e-3 {
            log::warn!(
                "H^{k} norm dominated by under-resolved modes: top-quarter energy fraction {:.3e}",
                top / total
            );
        }
        Ok((TWO_PI * total).sqrt())
    }

    /// Trigonometric interpolant evaluated at an arbitrary point.
    pub fn eval(&self, x: f64) -> f64 {
        self.evaluator().eval(x)
    }

    pub fn evaluator(&self) -> BandEvaluator {
        BandEvaluator::new(self)
    }

    /// Write `x,value` rows.
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut out = String::from("x,value\n");
        for (j, v) in self.values.iter().enumerate() {
            out.push_str(&format!("{},{}\n", self.grid.node(j), v));
        }
        let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
        f.write_all(out.as_bytes()).map_err(|e| Error::io(path, e))
    }

    /// Read a field written by [`Field::write_csv`]; the grid size is the row count.
    pub fn read_csv(path: impl AsRef<Path>) -> Result<Field> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut lines = text.lines();
        match lines.next() {
            Some(h) if h.trim() == "x,value" => {}
            other => {
                return Err(Error::Parse(format!(
                    "expected header `x,value`, found {:?}",
                    other
                )))
            }
        }
        let mut values = Vec::new();
        for (i, line) in lines.enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let v = line
                .split(',')
                .nth(1)
                .and_then(|s| s.trim().parse::<f64>().ok())
                .ok_or_else(|| Error::Parse(format!("bad row {}: {line:?}", i + 2)))?;
            values.push(v);
        }
        let grid = TorusGrid::new(values.len())?;
        Field::from_values(&grid, values)
    }
}

/// Fast off-grid evaluation of a real field's trigonometric interpolant.
///
/// Modes whose coefficients are below `1e-14` of the largest are dropped, so
/// smooth fields cost only a handful of complex multiplies per point.
#[derive(Clone, Debug)]
pub struct BandEvaluator {
    c0: f64,
    // modes[z - 1] multiplies e^{i z x}; real part is taken
    modes: Vec<Complex64>,
}

impl BandEvaluator {
    pub fn new(field: &Field) -> Self {
        let spec = field.spectral();
        let n = spec.len();
        let nyq = n / 2;
        let scale = spec.iter().fold(0.0f64, |m, c| m.max(c.norm()));
        let tol = 1e-14 * scale;
        let band = (1..=nyq).rev().find(|&z| spec[z].norm() > tol).unwrap_or(0);
        let modes = (1..=band)
            .map(|z| if z == nyq { spec[z] } else { spec[z] * 2.0 })
            .collect();
        Self {
            c0: spec[0].re,
            modes,
        }
    }

    /// Real function `Σ_{|z|≤K} c_z e^{izx}` given `c_0..c_K`; negative
    /// modes are the conjugates.
    pub fn from_half_spectrum(coeffs: &[Complex64]) -> Self {
        Self {
            c0: coeffs.first().map(|c| c.re).unwrap_or(0.0),
            modes: coeffs.iter().skip(1).map(|c| c * 2.0).collect(),
        }
    }

    pub fn band(&self) -> usize {
        self.modes.len()
    }

    pub fn eval(&self, x: f64) -> f64 {
        let w = Complex64::new(x.cos(), x.sin());
        let mut p = w;
        let mut acc = self.c0;
        for (i, c) in self.modes.iter().enumerate() {
            if i > 0 {
                p *= w;
            }
            acc += c.re * p.re - c.im * p.im;
        }
        acc
    }

    /// Value and derivative at `x`.
    pub fn eval_with_derivative(&self, x: f64) -> (f64, f64) {
        let w = Complex64::new(x.cos(), x.sin());
        let mut p = w;
        let mut v = self.c0;
        let mut d = 0.0;
        for (i, c) in self.modes.iter().enumerate() {
            if i > 0 {
                p *= w;
            }
            let z = (i + 1) as f64;
            v += c.re * p.re - c.im * p.im;
            // Re(i z c p)
            d -= z * (c.re * p.im + c.im * p.re);
        }
        (v, d)
    }
}
