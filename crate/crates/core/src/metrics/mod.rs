mod distance;
mod gap;
mod lipschitz;
mod wasserstein;

pub use distance::{product_distance, torus_distance, ProductPoint};
pub use gap::{sup_pairing_gap, sup_pairing_gaps};
pub use lipschitz::{gamma_m, xi_eps, LipschitzConstants};
pub use wasserstein::{assignment, wasserstein2_exact, W2_MAX_SAMPLES};
