use crate::particles::Potentials;
use crate::torus::Field;

/// Which exponential rate to use in the positivity floor.
#[derive(Clone, Copy, Debug)]
pub enum RateMode<'a> {
    /// `a(f) = ½ sup|f|² + sup|∂_x f|` for a given drift `f`.
    Drift(&'a Field),
    /// `𝒜(M) = |V'|² + M²|F'|² + |V''| + M|F''|` for the cutoff level `M`.
    Cutoff { m: f64 },
    /// `|V'|² + |F'|² R² + |V''| + |F''| R` with `R = sup_t ‖ρ_t‖_{L²}`.
    L2Bound { rho_l2_sup: f64 },
}

/// `½ sup|f|² + sup|∂_x f|` on the grid.
pub fn drift_rate(f: &Field) -> f64 {
    let s = f.sup_norm();
    0.5 * s * s + f.derivative(1).sup_norm()
}

pub fn lower_bound_rate(pot: &Potentials, mode: RateMode<'_>) -> f64 {
    let dv = pot.dv().sup_norm();
    let d2v = pot.d2v().sup_norm();
    let df = pot.df().sup_norm();
    let d2f = pot.d2f().sup_norm();
    match mode {
        RateMode::Drift(f) => drift_rate(f),
        RateMode::Cutoff { m } => {
            let m = m.abs();
            dv * dv + m * m * df * df + d2v + m * d2f
        }
        RateMode::L2Bound { rho_l2_sup: r } => {
            let r = r.abs();
            dv * dv + df * df * r * r + d2v + d2f * r
        }
    }
}

/// `floor(t) = η e^{-t·rate}` with `η = min ζ_0`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LowerBoundCertificate {
    pub eta: f64,
    pub rate: f64,
}

impl LowerBoundCertificate {
    pub fn new(zeta0: &Field, rate: f64) -> Self {
        Self {
            eta: zeta0.min().0,
            rate,
        }
    }

    pub fn floor(&self, t: f64) -> f64 {
        self.eta * (-t * self.rate).exp()
    }
}
