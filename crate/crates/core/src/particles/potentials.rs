use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::torus::{BandEvaluator, Field, TorusGrid};

/// Environmental potential `V`, interaction potential `F` and forcing
/// profile `q`, with the derivatives the dynamics and bounds need.
#[derive(Clone, Debug)]
pub struct Potentials {
    v: Field,
    f: Field,
    q: Field,
    dv: Field,
    d2v: Field,
    df: Field,
    d2f: Field,
    d3f: Field,
    dq: Field,
    dv_eval: BandEvaluator,
    df_eval: BandEvaluator,
    q_eval: BandEvaluator,
}

impl Potentials {
    pub fn new(v: Field, f: Field, q: Field) -> Result<Self> {
        for other in [&f, &q] {
            if other.grid() != v.grid() {
                return Err(Error::GridMismatch {
                    left: v.grid().n_points(),
                    right: other.grid().n_points(),
                });
            }
        }
        let dv = v.derivative(1);
        let df = f.derivative(1);
        Ok(Self {
            d2v: v.derivative(2),
            d2f: f.derivative(2),
            d3f: f.derivative(3),
            dq: q.derivative(1),
            dv_eval: dv.evaluator(),
            df_eval: df.evaluator(),
            q_eval: q.evaluator(),
            v,
            f,
            q,
            dv,
            df,
        })
    }

    pub fn zero(grid: &TorusGrid) -> Self {
        let z = Field::zeros(grid);
        Self::new(z.clone(), z.clone(), z).expect("same grid")
    }

    /// Same `V` and `F`, different forcing profile.
    pub fn with_forcing(&self, q: Field) -> Result<Self> {
        Self::new(self.v.clone(), self.f.clone(), q)
    }

    pub fn grid(&self) -> &TorusGrid {
        self.v.grid()
    }

    pub fn v(&self) -> &Field {
        &self.v
    }
    pub fn f(&self) -> &Field {
        &self.f
    }
    pub fn q(&self) -> &Field {
        &self.q
    }
    pub fn dv(&self) -> &Field {
        &self.dv
    }
    pub fn d2v(&self) -> &Field {
        &self.d2v
    }
    pub fn df(&self) -> &Field {
        &self.df
    }
    pub fn d2f(&self) -> &Field {
        &self.d2f
    }
    pub fn d3f(&self) -> &Field {
        &self.d3f
    }
    pub fn dq(&self) -> &Field {
        &self.dq
    }

    /// `V'(x)` off the grid.
    pub fn dv_at(&self, x: f64) -> f64 {
        self.dv_eval.eval(x)
    }

    /// `F'(x)` off the grid.
    pub fn df_at(&self, x: f64) -> f64 {
        self.df_eval.eval(x)
    }

    pub fn q_at(&self, x: f64) -> f64 {
        self.q_eval.eval(x)
    }

    pub fn forcing_is_zero(&self) -> bool {
        self.q.values().iter().all(|&v| v == 0.0)
    }

    /// Coefficients `c_0..c_K` of `F'` with `|c_k|` above `1e-14` of the largest.
    pub fn df_half_spectrum(&self) -> Vec<Complex64> {
        half_spectrum(&self.df, 1e-14)
    }
}

/// Leading non-negligible coefficients `c_0..c_K` of a real field.
pub(crate) fn half_spectrum(field: &Field, rel_tol: f64) -> Vec<Complex64> {
    let spec = field.spectral();
    let nyq = field.grid().nyquist();
    let scale = spec.iter().fold(0.0f64, |m, c| m.max(c.norm()));
    let mut band = 0;
    for (z, c) in spec.iter().enumerate().take(nyq) {
        if c.norm() > rel_tol * scale {
            band = z;
        }
    }
    if scale == 0.0 {
        return vec![Complex64::new(0.0, 0.0)];
    }
    spec[..=band].to_vec()
}
