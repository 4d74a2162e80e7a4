use std::path::Path;

use crate::error::{Error, Result};

use super::config::ExperimentConfig;
use super::experiments::{combined_csv, LadderResult, SweepResult};
use super::manifest::{emit_manifest, sha256_hex, Manifest, RUNTIME_PREFIX};

/// Facts about the process that do not affect results.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct RuntimeInfo {
    pub threads: usize,
    pub wall_seconds: f64,
}

fn write(dir: &Path, name: &str, text: &str, m: &mut Manifest) -> Result<()> {
    let path = dir.join(name);
    std::fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
    m.push(&format!("output.{name}"), &sha256_hex(text.as_bytes()));
    Ok(())
}

fn finish(dir: &Path, name: &str, mut m: Manifest, cfg: &ExperimentConfig, rt: &RuntimeInfo) -> Result<Manifest> {
    m.push(&format!("{RUNTIME_PREFIX}threads"), &rt.threads.to_string());
    m.push(&format!("{RUNTIME_PREFIX}wall_seconds"), &format!("{:.3}", rt.wall_seconds));
    m.push_config(cfg);
    emit_manifest(dir.join(name), &m)?;
    Ok(m)
}

fn prepare(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

/// `gaps.csv`, `observables_<run>.csv` and `manifest_simulate.txt`.
pub fn write_sweep(dir: impl AsRef<Path>, cfg: &ExperimentConfig, r: &SweepResult, rt: &RuntimeInfo) -> Result<Manifest> {
    let dir = dir.as_ref();
    prepare(dir)?;
    let mut m = Manifest::new("simulate", cfg);
    m.push("axis", &cfg.sweep.axis.to_string());
    m.push_log(&r.log);
    write(dir, "gaps.csv", &r.table.to_csv(), &mut m)?;
    for (name, text) in &r.observables {
        write(dir, name, text, &mut m)?;
    }
    finish(dir, "manifest_simulate.txt", m, cfg, rt)
}

/// `gaps.csv` (all axes), `gaps_<axis>.csv`, `overall.csv`, observables and
/// `manifest_ladder.txt`.
pub fn write_ladder(dir: impl AsRef<Path>, cfg: &ExperimentConfig, r: &LadderResult, rt: &RuntimeInfo) -> Result<Manifest> {
    let dir = dir.as_ref();
    prepare(dir)?;
    let mut m = Manifest::new("ladder", cfg);
    m.push("self_tolerance", &format!("{:e}", r.self_tolerance));
    m.push("coherence_violations", &r.coherence_violations.to_string());
    m.push_log(&r.log);
    write(dir, "gaps.csv", &combined_csv(&r.axes), &mut m)?;
    for t in &r.axes {
        write(dir, &format!("gaps_{}.csv", t.axis), &t.to_csv(), &mut m)?;
    }
    write(dir, "overall.csv", &r.overall.to_csv(), &mut m)?;
    for (name, text) in &r.observables {
        write(dir, name, text, &mut m)?;
    }
    finish(dir, "manifest_ladder.txt", m, cfg, rt)
}

/// Compare files in `dir` against the digests recorded in `m`; returns the
/// names that differ or are missing.
pub fn verify_outputs(dir: impl AsRef<Path>, m: &Manifest) -> Vec<String> {
    let dir = dir.as_ref();
    m.outputs()
        .into_iter()
        .filter(|(name, digest)| match std::fs::read(dir.join(name)) {
            Ok(bytes) => &sha256_hex(&bytes) != digest,
            Err(_) => true,
        })
        .map(|(name, _)| name)
        .collect()
}
