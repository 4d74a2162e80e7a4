mod bounds;
mod etd;
mod intermediate;
mod linear;
mod mkv;

pub use bounds::{lower_bound_rate, drift_rate, LowerBoundCertificate, RateMode};
pub use etd::PdeForcing;
pub use intermediate::{solve_intermediate_rho, GammaSource, IntermediateInputs, IntermediateRun, Level};
pub use linear::{solve_linear_fp, solve_linear_fp_with, FpDrift, FpSolution};
pub use mkv::{mkv_drift, resample, solve_mkv, step_mkv, PdeDiagnostics, PdeDrift, PdeRun, Trajectory};
