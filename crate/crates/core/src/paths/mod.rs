//! Driving paths: Brownian samples, piecewise-linear approximants, noise
//! eigenvalues and the path integrals built on them.

mod noise;
mod path;
mod rng;

pub use noise::{eigenvalue_decay_check, tail_remainder, DecayLaw, DecayReport, NoiseSpec};
pub use path::{
    heat_convolution_mode, heat_convolution_trajectory, rs_integral, uniform_mesh, SampledPath,
};
pub use rng::{sample_brownian, NormalRng, RngStreams, StreamKind, Substream};
