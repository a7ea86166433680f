//! Cached execution of experiment configs with atomic output writes.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::ExperimentConfig;
use crate::ops::{execute, Artifact, Outcome};

const RESULT_FILE: &str = "result.json";
pub const MANIFEST_FILE: &str = "manifest.json";

/// Stored next to the cached artifacts.
#[derive(Debug, Serialize, Deserialize)]
struct CachedResult {
    files: Vec<String>,
    summary: serde_json::Value,
    substitutions: Vec<String>,
    compute_seconds: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FileRecord {
    pub name: String,
    pub sha256: String,
    pub bytes: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub config_hash: String,
    pub operation: String,
    pub config: serde_json::Value,
    pub cache_hit: bool,
    pub wall_time_s: f64,
    pub compute_time_s: f64,
    pub files: Vec<FileRecord>,
    pub substitutions: Vec<String>,
    pub summary: serde_json::Value,
}

/// Writes `bytes` to `path` through a temporary file in the same directory.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

fn load_cached(entry: &Path) -> Result<Option<(Outcome, f64)>> {
    let result = entry.join(RESULT_FILE);
    if !result.is_file() {
        return Ok(None);
    }
    let cached: CachedResult = serde_json::from_slice(&std::fs::read(&result)?)?;
    let mut artifacts = Vec::with_capacity(cached.files.len());
    for name in cached.files {
        let bytes = std::fs::read(entry.join(&name)).with_context(|| format!("reading cached {name}"))?;
        artifacts.push(Artifact { name, bytes });
    }
    let outcome = Outcome { artifacts, summary: cached.summary, substitutions: cached.substitutions };
    Ok(Some((outcome, cached.compute_seconds)))
}

fn store_cached(cache_dir: &Path, entry: &Path, outcome: &Outcome, compute_seconds: f64) -> Result<()> {
    std::fs::create_dir_all(cache_dir).with_context(|| format!("creating cache {}", cache_dir.display()))?;
    let staging = tempfile::Builder::new().prefix(".staging-").tempdir_in(cache_dir)?;
    for a in &outcome.artifacts {
        std::fs::write(staging.path().join(&a.name), &a.bytes)?;
    }
    let record = CachedResult {
        files: outcome.artifacts.iter().map(|a| a.name.clone()).collect(),
        summary: outcome.summary.clone(),
        substitutions: outcome.substitutions.clone(),
        compute_seconds,
    };
    std::fs::write(staging.path().join(RESULT_FILE), serde_json::to_vec_pretty(&record)?)?;
    let staged = staging.keep();
    if let Err(e) = std::fs::rename(&staged, entry) {
        // A concurrent run may have filled the entry first.
        let _ = std::fs::remove_dir_all(&staged);
        if !entry.join(RESULT_FILE).is_file() {
            return Err(e).with_context(|| format!("storing cache entry {}", entry.display()));
        }
    }
    Ok(())
}

/// Runs `cfg` (already resolved), reusing a cached result when one exists, and writes
/// the artifacts plus a manifest into `out_dir`.
pub fn run(cfg: &ExperimentConfig, out_dir: &Path, cache_dir: &Path) -> Result<Manifest> {
    let start = Instant::now();
    let hash = cfg.hash()?;
    let entry: PathBuf = cache_dir.join(&hash);
    let (outcome, compute_seconds, cache_hit) = match load_cached(&entry)? {
        Some((outcome, secs)) => {
            log::info!("cache hit {hash}");
            (outcome, secs, true)
        }
        None => {
            log::info!("computing {} ({hash})", cfg.operation.name());
            let t = Instant::now();
            let outcome = execute(cfg)?;
            let secs = t.elapsed().as_secs_f64();
            store_cached(cache_dir, &entry, &outcome, secs)?;
            (outcome, secs, false)
        }
    };
    let mut files = Vec::with_capacity(outcome.artifacts.len());
    for a in &outcome.artifacts {
        write_atomic(&out_dir.join(&a.name), &a.bytes)?;
        files.push(FileRecord {
            name: a.name.clone(),
            sha256: hex::encode(Sha256::digest(&a.bytes)),
            bytes: a.bytes.len(),
        });
    }
    let manifest = Manifest {
        tool: env!("CARGO_PKG_NAME").into(),
        version: env!("CARGO_PKG_VERSION").into(),
        config_hash: hash,
        operation: cfg.operation.name().into(),
        config: serde_json::from_str(&cfg.semantic_json()?)?,
        cache_hit,
        wall_time_s: start.elapsed().as_secs_f64(),
        compute_time_s: compute_seconds,
        files,
        substitutions: outcome.substitutions,
        summary: outcome.summary,
    };
    let mut bytes = serde_json::to_vec_pretty(&manifest)?;
    bytes.push(b'\n');
    write_atomic(&out_dir.join(MANIFEST_FILE), &bytes)?;
    Ok(manifest)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{GraphRecipe, Operation};

    #[test]
    fn second_run_hits_cache_with_identical_bytes() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = ExperimentConfig::new(None, Operation::GraphBuild { graph: GraphRecipe::Path { n: 5 } });
        let cache = dir.path().join("cache");
        let a = run(&cfg, &dir.path().join("a"), &cache).unwrap();
        let b = run(&cfg, &dir.path().join("b"), &cache).unwrap();
        assert!(!a.cache_hit && b.cache_hit);
        let read = |d: &str| std::fs::read(dir.path().join(d).join("graph.json")).unwrap();
        assert_eq!(read("a"), read("b"));
        assert_eq!(a.summary, b.summary);
        assert_eq!(a.summary["mis_size"], 3);
        let leftovers = std::fs::read_dir(&cache)
            .unwrap()
            .filter(|e| e.as_ref().unwrap().file_name().to_string_lossy().starts_with(".staging"));
        assert_eq!(leftovers.count(), 0);
    }
}
