use std::path::{Component, Path, PathBuf};

use serde_json::Value;

use super::MeasureError;
use crate::hashcore::{hash_file_once, Decimal6, Digest, TrustedManifest};
use crate::ml::{Dataset, MlError, Model, TrainingConfig};

/// Reads measurer inputs from disk, hashing each file exactly once. With a
/// manifest, a file whose path or digest is not listed aborts the read.
#[derive(Debug, Clone, Default)]
pub struct InputReader {
    manifest: Option<(TrustedManifest, PathBuf)>,
}

impl InputReader {
    pub fn unchecked() -> Self {
        Self::default()
    }

    /// Manifest paths are resolved relative to `root`.
    pub fn with_manifest(manifest: TrustedManifest, root: impl Into<PathBuf>) -> Self {
        Self { manifest: Some((manifest, root.into())) }
    }

    pub fn read(&self, path: impl AsRef<Path>) -> Result<(Vec<u8>, Digest), MeasureError> {
        let path = path.as_ref();
        let (bytes, digest) = hash_file_once(path)?;
        if let Some((manifest, root)) = &self.manifest {
            let miss = || MeasureError::ManifestMiss(path.display().to_string());
            let rel = relative(path, root).ok_or_else(miss)?;
            if manifest.get(&rel) != Some(&digest) {
                return Err(miss());
            }
        }
        Ok((bytes, digest))
    }

    pub fn dataset(&self, path: impl AsRef<Path>) -> Result<Dataset, MeasureError> {
        Ok(Dataset::from_csv(&self.read(path)?.0)?)
    }

    pub fn config(&self, path: impl AsRef<Path>) -> Result<TrainingConfig, MeasureError> {
        Ok(TrainingConfig::from_json(&self.read(path)?.0)?)
    }

    pub fn model(&self, path: impl AsRef<Path>) -> Result<Model, MeasureError> {
        Ok(Model::from_json(&self.read(path)?.0)?)
    }

    pub fn features(&self, path: impl AsRef<Path>) -> Result<Vec<Decimal6>, MeasureError> {
        Ok(parse_features(&self.read(path)?.0)?)
    }
}

fn relative(path: &Path, root: &Path) -> Option<String> {
    let path = std::fs::canonicalize(path).ok()?;
    let root = std::fs::canonicalize(root).ok()?;
    let rel = path.strip_prefix(root).ok()?;
    let parts: Option<Vec<&str>> = rel
        .components()
        .map(|c| match c {
            Component::Normal(s) => s.to_str(),
            _ => None,
        })
        .collect();
    Some(parts?.join("/"))
}

/// Parses `{"features": [...]}` where each entry is a decimal string or an
/// integer. Floats are refused.
pub fn parse_features(bytes: &[u8]) -> Result<Vec<Decimal6>, MlError> {
    let bad = |m: &str| MlError::Config(format!("input: {m}"));
    let v: Value = serde_json::from_slice(bytes).map_err(|e| bad(&e.to_string()))?;
    let arr = v.get("features").and_then(Value::as_array).ok_or_else(|| bad("expected {\"features\": [...]}"))?;
    if v.as_object().map(|o| o.len()) != Some(1) {
        return Err(bad("unexpected keys"));
    }
    arr.iter()
        .map(|x| match x {
            Value::String(s) => Decimal6::parse_any(s).map_err(|e| bad(&e.to_string())),
            Value::Number(n) if n.is_i64() => Decimal6::parse_any(&n.to_string()).map_err(|e| bad(&e.to_string())),
            _ => Err(bad("features must be decimal strings or integers")),
        })
        .collect()
}
