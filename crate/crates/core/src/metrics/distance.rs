use std::f64::consts::TAU;

use crate::torus::wrap;

/// Geodesic distance on the circle of length `2π`.
pub fn torus_distance(x: f64, y: f64) -> f64 {
    let d = (wrap(x) - wrap(y)).abs();
    d.min(TAU - d)
}

/// A position on the circle with a real weight.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ProductPoint {
    pub x: f64,
    pub a: f64,
}

impl ProductPoint {
    pub fn new(x: f64, a: f64) -> Self {
        Self { x: wrap(x), a }
    }
}

/// `√(d_𝕋(x, y)² + |a - b|²)`.
pub fn product_distance(p: ProductPoint, q: ProductPoint) -> f64 {
    torus_distance(p.x, q.x).hypot(p.a - q.a)
}
