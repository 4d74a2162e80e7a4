use crate::error::{Error, Result};
use crate::torus::Field;

use super::bounds::{drift_rate, LowerBoundCertificate};
use super::etd::PdeForcing;
use super::mkv::{integrate, Trajectory};

/// Time-dependent drift `b(t, ·)` of a linear Fokker–Planck solve.
#[derive(Clone, Copy, Debug)]
pub enum FpDrift<'a> {
    Zero,
    Constant(&'a Field),
    /// One field per time step.
    PerStep(&'a [Field]),
}

/// Linear solve with its positivity certificate.
#[derive(Clone, Debug)]
pub struct FpSolution {
    pub trajectory: Trajectory,
    /// `η` and the largest `a(b)` used.
    pub certificate: LowerBoundCertificate,
    /// `min_t (min_x ζ_t - floor(t))`.
    pub min_margin: f64,
}

/// Tracks `min ζ_t ≥ η e^{-t a}` with `a` the running sup of `a(b_s)`.
pub(crate) struct FloorWatch {
    eta: f64,
    rate: f64,
    pub(crate) min_margin: f64,
}

impl FloorWatch {
    pub(crate) fn new(zeta0: &Field) -> Result<Self> {
        let (eta, x) = zeta0.min();
        if !(eta > 0.0) {
            return Err(Error::NonPositiveDensity { min: eta, x });
        }
        Ok(Self {
            eta,
            rate: 0.0,
            min_margin: 0.0,
        })
    }

    pub(crate) fn see_drift(&mut self, b: &Field) {
        self.rate = self.rate.max(drift_rate(b));
    }

    /// Check `ζ_t` against the floor. Round-off is tolerated at `1e-12·η`.
    pub(crate) fn check(&mut self, t: f64, zeta: &Field) -> Result<()> {
        let floor = self.eta * (-t * self.rate).exp();
        let (value, x) = zeta.min();
        let margin = value - floor;
        self.min_margin = self.min_margin.min(margin);
        if margin < -1e-12 * self.eta {
            return Err(Error::PositivityFloor {
                t,
                x,
                value,
                floor,
                margin,
            });
        }
        Ok(())
    }

    pub(crate) fn certificate(&self) -> LowerBoundCertificate {
        LowerBoundCertificate {
            eta: self.eta,
            rate: self.rate,
        }
    }
}

/// `∂_t ζ = ∂_xx ζ + ∂_x[b ζ]` from a strictly positive `ζ_0`.
pub fn solve_linear_fp(zeta0: &Field, drift: FpDrift<'_>, dt: f64, horizon: f64) -> Result<FpSolution> {
    let zero = Field::zeros(zeta0.grid());
    solve_linear_fp_with(zeta0, dt, horizon, 1, |k, _, _| match drift {
        FpDrift::Zero => Ok(zero.clone()),
        FpDrift::Constant(b) => Ok(b.clone()),
        FpDrift::PerStep(bs) => bs
            .get(k)
            .cloned()
            .ok_or_else(|| Error::MissingReference(format!("no drift for step {k}"))),
    })
}

/// As [`solve_linear_fp`] with the drift produced on demand from the step
/// index, the step start time and the current solution.
pub fn solve_linear_fp_with(
    zeta0: &Field,
    dt: f64,
    horizon: f64,
    record_every: usize,
    mut drift: impl FnMut(usize, f64, &Field) -> Result<Field>,
) -> Result<FpSolution> {
    let mut watch = FloorWatch::new(zeta0)?;
    let trajectory = integrate(zeta0, dt, horizon, &PdeForcing::none(), record_every.max(1), |k, t, u| {
        if k > 0 {
            // `u` was reached with the drifts seen so far
            watch.check(t, u)?;
        }
        let b = drift(k, t, u)?;
        watch.see_drift(&b);
        Ok(Some(b))
    })?;
    watch.check(horizon, trajectory.last())?;
    Ok(FpSolution {
        trajectory,
        certificate: watch.certificate(),
        min_margin: watch.min_margin,
    })
}
