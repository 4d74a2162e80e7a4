use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::path::{uniform_mesh, SampledPath};
use crate::error::Result;

/// Named substream families derived from one master seed.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum StreamKind {
    /// Idiosyncratic Brownian motion of particle `i`.
    Particle(u64),
    /// Common Brownian motion driving noise mode `z`.
    Mode(i64),
    /// Draws of initial positions and weights.
    Initial,
    /// Anything else, keyed by an arbitrary tag.
    Other(u64),
}

impl StreamKind {
    fn key(self) -> (u64, u64) {
        match self {
            StreamKind::Particle(i) => (1, i),
            StreamKind::Mode(z) => (2, z as u64),
            StreamKind::Initial => (3, 0),
            StreamKind::Other(t) => (4, t),
        }
    }
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Master seed plus a replication index; every substream is a pure
/// function of `(seed, replication, kind)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RngStreams {
    master: u64,
}

impl RngStreams {
    pub fn new(master_seed: u64) -> Self {
        Self {
            master: master_seed,
        }
    }

    pub fn master_seed(&self) -> u64 {
        self.master
    }

    /// Independent family for replication `r`.
    pub fn replication(&self, r: u64) -> RngStreams {
        RngStreams {
            master: splitmix64(self.master ^ splitmix64(r.wrapping_add(0x5EED))),
        }
    }

    /// A separate family of substreams, keyed by `tag`.
    pub fn derive(&self, tag: u64) -> RngStreams {
        RngStreams {
            master: splitmix64(splitmix64(self.master ^ 0xD1B5_4A32_D192_ED03) ^ splitmix64(tag)),
        }
    }

    pub fn substream(&self, kind: StreamKind) -> Substream {
        let (tag, idx) = kind.key();
        let seed = splitmix64(self.master ^ splitmix64(tag.wrapping_mul(0xA24B_AED4_963E_E407) ^ splitmix64(idx)));
        Substream { seed }
    }
}

/// One deterministic stream of standard normals.
///
/// Each normal consumes exactly two 64-bit words, so draw `k` can be
/// produced either sequentially or directly with [`Substream::normal_at`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Substream {
    seed: u64,
}

impl Substream {
    pub fn rng(&self) -> NormalRng {
        NormalRng {
            inner: ChaCha8Rng::seed_from_u64(self.seed),
        }
    }

    /// The `k`-th standard normal of this stream.
    pub fn normal_at(&self, k: u64) -> f64 {
        let mut r = self.rng();
        r.inner.set_word_pos(4 * k as u128);
        r.normal()
    }

    pub fn normals(&self, count: usize) -> Vec<f64> {
        let mut r = self.rng();
        (0..count).map(|_| r.normal()).collect()
    }
}

/// Sequential generator over a [`Substream`].
#[derive(Clone, Debug)]
pub struct NormalRng {
    inner: ChaCha8Rng,
}

impl NormalRng {
    /// Uniform on `(0, 1]`.
    pub fn uniform(&mut self) -> f64 {
        ((self.inner.next_u64() >> 11) + 1) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Box–Muller, keeping only the cosine branch.
    pub fn normal(&mut self) -> f64 {
        let u1 = self.uniform();
        let u2 = self.uniform();
        (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    }
}

/// Standard Brownian motion on the uniform mesh of step `dt` over `[0, T]`.
pub fn sample_brownian(horizon: f64, dt: f64, stream: &Substream) -> Result<SampledPath> {
    let times = uniform_mesh(horizon, dt)?;
    let mut rng = stream.rng();
    let mut values = Vec::with_capacity(times.len());
    values.push(0.0);
    let mut acc = 0.0;
    for w in times.windows(2) {
        acc += (w[1] - w[0]).sqrt() * rng.normal();
        values.push(acc);
    }
    SampledPath::new(times, values)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn counter_access_matches_sequential() {
        let s = RngStreams::new(42).substream(StreamKind::Particle(3));
        let seq = s.normals(50);
        for k in [0u64, 1, 7, 31, 49] {
            assert_eq!(s.normal_at(k), seq[k as usize]);
        }
    }

    #[test]
    fn same_seed_same_stream() {
        let a = RngStreams::new(9).substream(StreamKind::Mode(-2)).normals(10);
        let b = RngStreams::new(9).substream(StreamKind::Mode(-2)).normals(10);
        assert_eq!(a, b);
        let c = RngStreams::new(9).substream(StreamKind::Mode(2)).normals(10);
        assert_ne!(a, c);
        let d = RngStreams::new(9).replication(1).substream(StreamKind::Mode(-2)).normals(10);
        assert_ne!(a, d);
    }

    #[test]
    fn brownian_statistics() {
        let s = RngStreams::new(1).substream(StreamKind::Other(0));
        let n = 100_000;
        let dt = 0.01;
        let p = sample_brownian(n as f64 * dt, dt, &s).unwrap();
        assert_eq!(p.values()[0], 0.0);
        let inc: Vec<f64> = p.values().windows(2).map(|w| w[1] - w[0]).collect();
        assert_eq!(inc.len(), n);
        let mean = inc.iter().sum::<f64>() / n as f64;
        let var = inc.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        let sigma = (dt / n as f64).sqrt();
        assert!(mean.abs() < 4.0 * sigma, "mean {mean}");
        assert!((var / dt - 1.0).abs() < 0.05, "var {var}");
        assert!(sample_brownian(1.0, 0.0, &s).is_err());
    }

    #[test]
    fn substreams_uncorrelated() {
        let st = RngStreams::new(5);
        let a = st.substream(StreamKind::Particle(0)).normals(100_000);
        let b = st.substream(StreamKind::Particle(1)).normals(100_000);
        let corr = a.iter().zip(&b).map(|(x, y)| x * y).sum::<f64>()
            / (a.iter().map(|x| x * x).sum::<f64>() * b.iter().map(|y| y * y).sum::<f64>()).sqrt();
        assert!(corr.abs() < 0.02, "corr {corr}");
    }
}
