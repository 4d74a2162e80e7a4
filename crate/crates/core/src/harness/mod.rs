mod config;
mod experiments;
mod manifest;
mod output;

pub use config::{
    Axis, ExperimentConfig, FunctionSpec, GammaChoice, GridSection, InitialSection, LadderSection,
    NoiseKind, NoiseSection, OutputSection, PotentialSection, Setup, SweepSection, TimeSection,
};
pub use experiments::{
    combined_csv, run_limit_ladder, run_n_sweep, run_sweep, GapRow, GapTable, LadderResult, RunLog,
    SweepResult, L2_LABEL,
};
pub use manifest::{emit_manifest, sha256_hex, Manifest, RUNTIME_PREFIX};
pub use output::{verify_outputs, write_ladder, write_sweep, RuntimeInfo};
