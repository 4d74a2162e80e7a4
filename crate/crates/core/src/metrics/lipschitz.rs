use crate::particles::Potentials;
use crate::torus::{CutoffParam, Field, MollifierParam, TorusGrid};

use super::distance::ProductPoint;

/// `Γ_M(x, μ) = ∫ χ_M(a) F'(x - y) μ(dy, da)` for an equal-weight
/// empirical `μ`.
pub fn gamma_m(pot: &Potentials, cutoff: &CutoffParam, x: f64, mu: &[ProductPoint]) -> f64 {
    let s: f64 = mu.iter().map(|p| cutoff.apply(p.a) * pot.df_at(x - p.x)).sum();
    s / mu.len() as f64
}

/// `Ξ_ε(x, μ) = q(x) / ∫ Φ_ε(x - y) μ(dy, da)`.
pub fn xi_eps(pot: &Potentials, mollifier: &MollifierParam, x: f64, mu: &[ProductPoint]) -> f64 {
    let den: f64 = mu.iter().map(|p| mollifier.eval(x - p.x)).sum::<f64>() / mu.len() as f64;
    pot.q_at(x) / den
}

/// Lipschitz constants of `Γ_M` and `Ξ_ε` in the form
/// `|G(x, μ) - G(y, ν)|² ≤ K (d(x, y)² + 𝒲₂²(μ, ν))`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LipschitzConstants {
    /// `max{M, 1} |F''|`.
    pub gamma_literal: f64,
    /// `2M²|F''|² + |F'|²`, from
    /// `|ΔΓ| ≤ M|F''| d + (M²|F''|² + |F'|²)^{1/2} 𝒲₂` and Cauchy–Schwarz.
    pub gamma_squared: f64,
    /// `K̃ = (|q| D_ε + |q'| M_ε) / m_ε²`.
    pub xi_literal: f64,
    /// `2 K̃²`, from `|ΔΞ| ≤ K̃ (d + 𝒲₂)`.
    pub xi_squared: f64,
}

/// Sup norm sampled on a grid eight times finer than the field's own.
fn fine_sup(f: &Field) -> f64 {
    let ev = f.evaluator();
    let n = 8 * f.grid().n_points();
    let g = TorusGrid::new(n).expect("even size");
    g.nodes()
        .iter()
        .map(|&x| ev.eval(x).abs())
        .fold(0.0, f64::max)
}

impl LipschitzConstants {
    pub fn new(pot: &Potentials, cutoff: &CutoffParam, mollifier: &MollifierParam) -> Self {
        let m = cutoff.level();
        let df = fine_sup(pot.df());
        let d2f = fine_sup(pot.d2f());
        let q = fine_sup(pot.q());
        let dq = fine_sup(pot.dq());
        let k_tilde = (q * mollifier.derivative_bound() + dq * mollifier.upper_bound())
            / mollifier.lower_bound().powi(2);
        Self {
            gamma_literal: m.max(1.0) * d2f,
            gamma_squared: 2.0 * m * m * d2f * d2f + df * df,
            xi_literal: k_tilde,
            xi_squared: 2.0 * k_tilde * k_tilde,
        }
    }
}
