use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

/// Real path on `[0, T]`, piecewise linear between its sample times.
#[derive(Clone, Debug, PartialEq)]
pub struct SampledPath {
    times: Vec<f64>,
    values: Vec<f64>,
}

const HOLDER_NODE_CAP: usize = 2000;

impl SampledPath {
    pub fn new(times: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if times.len() != values.len() {
            return Err(Error::InvalidPath(format!(
                "{} times but {} values",
                times.len(),
                values.len()
            )));
        }
        if times.len() < 2 {
            return Err(Error::InvalidPath("need at least two samples".into()));
        }
        if times[0] != 0.0 {
            return Err(Error::InvalidPath(format!("first time is {}, not 0", times[0])));
        }
        if let Some(w) = times.windows(2).find(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidPath(format!(
                "times not strictly increasing at {} -> {}",
                w[0], w[1]
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidPath("non-finite value".into()));
        }
        Ok(Self { times, values })
    }

    pub fn from_fn(times: Vec<f64>, f: impl Fn(f64) -> f64) -> Result<Self> {
        let values = times.iter().map(|&t| f(t)).collect();
        Self::new(times, values)
    }

    /// Constant path on a two-point mesh.
    pub fn constant(horizon: f64, c: f64) -> Result<Self> {
        Self::new(vec![0.0, horizon], vec![c, c])
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn horizon(&self) -> f64 {
        *self.times.last().unwrap()
    }

    pub fn start(&self) -> f64 {
        self.values[0]
    }

    pub fn end(&self) -> f64 {
        *self.values.last().unwrap()
    }

    /// Linear interpolant at `t`, clamped to `[0, T]`.
    pub fn eval(&self, t: f64) -> f64 {
        let n = self.times.len();
        if t <= 0.0 {
            return self.values[0];
        }
        if t >= self.times[n - 1] {
            return self.values[n - 1];
        }
        // first index with times[i] > t
        let i = self.times.partition_point(|&s| s <= t);
        let (t0, t1) = (self.times[i - 1], self.times[i]);
        let (v0, v1) = (self.values[i - 1], self.values[i]);
        if t == t0 {
            return v0;
        }
        v0 + (v1 - v0) * (t - t0) / (t1 - t0)
    }

    pub fn increment(&self, s: f64, t: f64) -> f64 {
        self.eval(t) - self.eval(s)
    }

    fn check_horizon(&self, other: &SampledPath) -> Result<()> {
        let (a, b) = (self.horizon(), other.horizon());
        if (a - b).abs() > 1e-12 * a.abs().max(b.abs()) {
            return Err(Error::DomainMismatch { left: a, right: b });
        }
        Ok(())
    }

    /// Sorted union of both meshes; times closer than `1e-14·T` are merged.
    pub fn union_mesh(&self, other: &SampledPath) -> Result<Vec<f64>> {
        self.check_horizon(other)?;
        Ok(merge_meshes(&self.times, &other.times))
    }

    /// Piecewise-linear interpolation at the uniform mesh `{jT/κ}`.
    pub fn piecewise_linear_approx(&self, kappa: usize) -> Result<SampledPath> {
        if kappa == 0 {
            return Err(Error::InvalidParameter("kappa must be at least 1".into()));
        }
        let t_end = self.horizon();
        let times: Vec<f64> = (0..=kappa)
            .map(|j| if j == kappa { t_end } else { t_end * j as f64 / kappa as f64 })
            .collect();
        let values = times.iter().map(|&t| self.eval(t)).collect();
        SampledPath::new(times, values)
    }

    /// Resample on a different mesh over the same horizon.
    pub fn resample(&self, times: Vec<f64>) -> Result<SampledPath> {
        SampledPath::from_fn(times, |t| self.eval(t))
    }

    /// `max |p(t) - p(s)| / |t - s|^γ` over sample pairs.
    ///
    /// Paths with more than 2000 samples are thinned to every k-th node
    /// (endpoints kept).
    pub fn holder_seminorm(&self, gamma: f64) -> Result<f64> {
        if !(gamma > 0.0 && gamma <= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "Hölder exponent must lie in (0, 1], got {gamma}"
            )));
        }
        let n = self.times.len();
        let idx: Vec<usize> = if n <= HOLDER_NODE_CAP {
            (0..n).collect()
        } else {
            let stride = n.div_ceil(HOLDER_NODE_CAP - 1);
            let mut v: Vec<usize> = (0..n).step_by(stride).collect();
            if *v.last().unwrap() != n - 1 {
                v.push(n - 1);
            }
            v
        };
        let mut best: f64 = 0.0;
        for (a, &i) in idx.iter().enumerate() {
            for &j in &idx[a + 1..] {
                let r = (self.values[j] - self.values[i]).abs()
                    / (self.times[j] - self.times[i]).powf(gamma);
                best = best.max(r);
            }
        }
        Ok(best)
    }

    /// Pointwise combination `a·self + b·other` on the union mesh.
    pub fn combine(&self, a: f64, other: &SampledPath, b: f64) -> Result<SampledPath> {
        let mesh = self.union_mesh(other)?;
        let values = mesh
            .iter()
            .map(|&t| a * self.eval(t) + b * other.eval(t))
            .collect();
        SampledPath::new(mesh, values)
    }

    pub fn scale(&self, c: f64) -> SampledPath {
        SampledPath {
            times: self.times.clone(),
            values: self.values.iter().map(|v| v * c).collect(),
        }
    }

    /// `sup_t |self(t) - other(t)|` over the union mesh.
    pub fn sup_distance(&self, other: &SampledPath) -> Result<f64> {
        let mesh = self.union_mesh(other)?;
        Ok(mesh
            .iter()
            .map(|&t| (self.eval(t) - other.eval(t)).abs())
            .fold(0.0, f64::max))
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut out = String::from("t,value\n");
        for (t, v) in self.times.iter().zip(&self.values) {
            out.push_str(&format!("{t},{v}\n"));
        }
        fs::write(path, out).map_err(|e| Error::io(path, e))
    }

    pub fn read_csv(path: impl AsRef<Path>) -> Result<SampledPath> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut lines = text.lines();
        if lines.next().map(str::trim) != Some("t,value") {
            return Err(Error::Parse("expected header `t,value`".into()));
        }
        let mut times = Vec::new();
        let mut values = Vec::new();
        for line in lines.filter(|l| !l.trim().is_empty()) {
            let mut it = line.split(',').map(|s| s.trim().parse::<f64>());
            match (it.next(), it.next()) {
                (Some(Ok(t)), Some(Ok(v))) => {
                    times.push(t);
                    values.push(v);
                }
                _ => return Err(Error::Parse(format!("bad row {line:?}"))),
            }
        }
        SampledPath::new(times, values)
    }
}

pub(crate) fn merge_meshes(a: &[f64], b: &[f64]) -> Vec<f64> {
    let horizon = a.last().copied().unwrap_or(0.0).max(b.last().copied().unwrap_or(0.0));
    let tol = 1e-14 * horizon.max(1.0);
    let mut out = Vec::with_capacity(a.len() + b.len());
    let (mut i, mut j) = (0, 0);
    while i < a.len() || j < b.len() {
        let next = if j >= b.len() || (i < a.len() && a[i] <= b[j]) {
            i += 1;
            a[i - 1]
        } else {
            j += 1;
            b[j - 1]
        };
        match out.last() {
            Some(&last) if next - last <= tol => {}
            _ => out.push(next),
        }
    }
    out
}

/// Uniform mesh with step `dt` ending exactly at `horizon`.
///
/// When `horizon/dt` is within `1e-9` of an integer the nodes are `jT/n`;
/// otherwise the final step is shortened.
pub fn uniform_mesh(horizon: f64, dt: f64) -> Result<Vec<f64>> {
    if !(dt > 0.0) {
        return Err(Error::InvalidParameter(format!("time step must be positive, got {dt}")));
    }
    if !(horizon > 0.0) || !horizon.is_finite() {
        return Err(Error::InvalidParameter(format!("horizon must be positive, got {horizon}")));
    }
    if dt > horizon * (1.0 + 1e-12) {
        return Err(Error::InvalidParameter(format!(
            "time step {dt} exceeds the horizon {horizon}"
        )));
    }
    let ratio = horizon / dt;
    let n = ratio.round();
    if (ratio - n).abs() <= 1e-9 * ratio.max(1.0) {
        let n = n as usize;
        Ok((0..=n)
            .map(|j| if j == n { horizon } else { horizon * j as f64 / n as f64 })
            .collect())
    } else {
        let n = ratio.floor() as usize;
        let mut v: Vec<f64> = (0..=n).map(|j| j as f64 * dt).collect();
        v.push(horizon);
        Ok(v)
    }
}

/// Left-point Riemann–Stieltjes sum `Σ f(t_i)(Y(t_{i+1}) - Y(t_i))` on the
/// union mesh of both paths.
pub fn rs_integral(f: &SampledPath, y: &SampledPath) -> Result<f64> {
    let mesh = f.union_mesh(y)?;
    let mut acc = 0.0;
    let mut y_prev = y.eval(mesh[0]);
    for w in mesh.windows(2) {
        let y_next = y.eval(w[1]);
        acc += f.eval(w[0]) * (y_next - y_prev);
        y_prev = y_next;
    }
    Ok(acc)
}

fn heat_step(z: i64, acc: f64, dy: f64, dt: f64) -> f64 {
    if z == 0 {
        return acc + dy;
    }
    let z2 = (z * z) as f64;
    let decay = (-z2 * dt).exp();
    // (1 - e^{-z²dt}) / z² without cancellation for small z²dt
    let phi = -(-z2 * dt).exp_m1() / z2;
    decay * acc + (dy / dt) * phi
}

/// `∫₀ᵗ e^{-(t-s)z²} dY_s` with `dY` spread at constant rate over each step.
pub fn heat_convolution_mode(z: i64, y: &SampledPath, t: f64) -> f64 {
    let times = y.times();
    let mut acc = 0.0;
    for w in times.windows(2) {
        if w[0] >= t {
            break;
        }
        let t1 = w[1].min(t);
        let dt = t1 - w[0];
        if dt <= 0.0 {
            continue;
        }
        acc = heat_step(z, acc, y.eval(t1) - y.eval(w[0]), dt);
    }
    acc
}

/// [`heat_convolution_mode`] at every time of an increasing output grid,
/// in a single pass.
pub fn heat_convolution_trajectory(z: i64, y: &SampledPath, out_times: &[f64]) -> Vec<f64> {
    let mesh = merge_meshes(y.times(), out_times);
    let mut out = Vec::with_capacity(out_times.len());
    let mut acc = 0.0;
    let mut k = 0;
    let mut t_prev = 0.0;
    let tol = 1e-14 * y.horizon().max(1.0);
    for &t in &mesh {
        if t > t_prev {
            acc = heat_step(z, acc, y.eval(t) - y.eval(t_prev), t - t_prev);
            t_prev = t;
        }
        while k < out_times.len() && out_times[k] <= t + tol {
            out.push(acc);
            k += 1;
        }
    }
    while out.len() < out_times.len() {
        out.push(acc);
    }
    out
}
