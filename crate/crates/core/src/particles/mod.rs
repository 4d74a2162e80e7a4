//! Weighted interacting particles with common-noise weights.

mod ensemble;
mod law;
mod mean_field;
mod observables;
mod potentials;
mod system;

pub use ensemble::{init_ensemble, ParticleEnsemble, SystemParams};
pub use law::{InitialLaw, WeightLaw};
pub use mean_field::mean_field_ensemble_step;
pub use observables::TestFunction;
pub use potentials::Potentials;
pub use system::{
    mode_sums, weighted_pairing_trajectory, Closure, ClosureSource, CommonDriver, CutoffIndex,
    EngineOptions, IdiosyncraticNoise, Method, ParticleDiagnostics, ParticleSystem, RunOutput,
    SimulationPlan, StepDiagnostics, WeightForcing,
};
