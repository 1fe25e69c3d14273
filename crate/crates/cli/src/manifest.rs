//! Run manifest: config snapshot, file formats, stage wall times and output
//! digests.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use tripcohort::{Error, Result};

pub const MANIFEST_FILE: &str = "manifest.json";

/// Files whose last CSV column is wall-clock time. Their digest covers every
/// other column so reruns compare equal.
pub const TIMED_LOG_PREFIX: &str = "train/log_";

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub config: String,
    pub formats: BTreeMap<String, String>,
    /// Wall seconds of the latest run of each stage.
    pub stage_seconds: BTreeMap<String, f64>,
    /// Output path relative to the run directory -> SHA-256 hex.
    pub outputs: BTreeMap<String, String>,
    pub digest_note: String,
}

fn default_formats() -> BTreeMap<String, String> {
    [
        ("checkpoint", tripcohort::numerics::CHECKPOINT_MAGIC),
        ("quantiles", tripcohort::cohort_data::QUANTILE_MAGIC),
        ("cohort", "csv: id,sex,age,visit_index,elapsed_years,condition_code,<features>"),
        ("triplets", "csv without header: anchor,positive,negative ids"),
        ("manifest", "json v1"),
    ]
    .into_iter()
    .map(|(k, v)| (k.to_string(), v.to_string()))
    .collect()
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// SHA-256 of a file; timed training logs have their last column blanked.
pub fn file_digest(path: &Path, relative: &str) -> Result<String> {
    let bytes = std::fs::read(path)?;
    let mut h = Sha256::new();
    if relative.starts_with(TIMED_LOG_PREFIX) {
        let text = String::from_utf8_lossy(&bytes);
        for line in text.lines() {
            let kept = line.rsplit_once(',').map_or(line, |(head, _)| head);
            h.update(kept.as_bytes());
            h.update(b"\n");
        }
    } else {
        h.update(&bytes);
    }
    Ok(hex(&h.finalize()))
}

fn walk(dir: &Path, root: &Path, out: &mut Vec<PathBuf>) -> Result<()> {
    let mut entries: Vec<_> = std::fs::read_dir(dir)?.collect::<std::io::Result<_>>()?;
    entries.sort_by_key(|e| e.file_name());
    for e in entries {
        let p = e.path();
        if p.is_dir() {
            walk(&p, root, out)?;
        } else if p.strip_prefix(root).map_or(true, |r| r != Path::new(MANIFEST_FILE)) {
            out.push(p);
        }
    }
    Ok(())
}

impl RunManifest {
    pub fn load_or_default(run_dir: &Path) -> Result<Self> {
        let path = run_dir.join(MANIFEST_FILE);
        if !path.exists() {
            return Ok(Self::default());
        }
        let text = std::fs::read_to_string(&path)?;
        serde_json::from_str(&text).map_err(|e| Error::Format {
            line: e.line(),
            message: format!("manifest: {e}"),
        })
    }

    /// Rehashes every file under `run_dir` and records the stage.
    pub fn record(run_dir: &Path, config_text: &str, stage: &str, seconds: f64) -> Result<Self> {
        let mut m = Self::load_or_default(run_dir)?;
        m.config = config_text.to_string();
        m.formats = default_formats();
        m.stage_seconds.insert(stage.to_string(), seconds);
        m.digest_note = format!("{TIMED_LOG_PREFIX}* digests exclude the wall-clock seconds column");
        m.outputs.clear();
        let mut files = Vec::new();
        walk(run_dir, run_dir, &mut files)?;
        for f in files {
            let rel = f
                .strip_prefix(run_dir)
                .expect("walked under root")
                .to_string_lossy()
                .replace('\\', "/");
            let digest = file_digest(&f, &rel)?;
            m.outputs.insert(rel, digest);
        }
        let text = serde_json::to_string_pretty(&m).expect("manifest serializes");
        std::fs::write(run_dir.join(MANIFEST_FILE), text + "\n")?;
        Ok(m)
    }

    /// Checks every recorded digest against the files on disk.
    pub fn verify(&self, run_dir: &Path) -> Result<()> {
        for (rel, digest) in &self.outputs {
            let actual = file_digest(&run_dir.join(rel), rel)?;
            if &actual != digest {
                return Err(Error::State(format!("digest mismatch for {rel}")));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn known_digest() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.txt");
        std::fs::write(&p, "abc").unwrap();
        assert_eq!(
            file_digest(&p, "a.txt").unwrap(),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }

    #[test]
    fn timed_logs_ignore_seconds() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::create_dir(dir.path().join("train")).unwrap();
        let p = dir.path().join("train/log_female.csv");
        std::fs::write(&p, "epoch,train_loss,val_loss,lr,seconds\n0,1.5,,0.001,0.25\n").unwrap();
        let a = file_digest(&p, "train/log_female.csv").unwrap();
        std::fs::write(&p, "epoch,train_loss,val_loss,lr,seconds\n0,1.5,,0.001,0.31\n").unwrap();
        assert_eq!(a, file_digest(&p, "train/log_female.csv").unwrap());
        std::fs::write(&p, "epoch,train_loss,val_loss,lr,seconds\n0,1.6,,0.001,0.31\n").unwrap();
        assert_ne!(a, file_digest(&p, "train/log_female.csv").unwrap());
    }

    #[test]
    fn record_and_verify() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::create_dir(dir.path().join("gen")).unwrap();
        std::fs::write(dir.path().join("gen/x.csv"), "1\n").unwrap();
        let m = RunManifest::record(dir.path(), "[run]\nseed = 1\n", "gen", 0.5).unwrap();
        assert_eq!(m.outputs.len(), 1);
        m.verify(dir.path()).unwrap();
        let again = RunManifest::load_or_default(dir.path()).unwrap();
        assert_eq!(again, m);
        std::fs::write(dir.path().join("gen/x.csv"), "2\n").unwrap();
        assert!(m.verify(dir.path()).is_err());
    }
}
