use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::canonical::{canonical_bytes, CanonicalJson};
use super::digest::{hash_bytes, hash_file_once, Digest, HashError};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub path: String,
    pub sha256: Digest,
}

/// Sorted, duplicate-free list of `(relative path, digest)` pairs.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TrustedManifest {
    entries: Vec<ManifestEntry>,
}

#[derive(Debug, thiserror::Error)]
pub enum ManifestError {
    #[error(transparent)]
    Hash(#[from] HashError),
    #[error("walking {path}: {message}")]
    Walk { path: PathBuf, message: String },
    #[error("{0}: path is not valid UTF-8")]
    NonUtf8Path(PathBuf),
    #[error("duplicate manifest path {0:?}")]
    Duplicate(String),
    #[error("malformed manifest: {0}")]
    Malformed(String),
}

impl TrustedManifest {
    pub fn from_entries(entries: impl IntoIterator<Item = ManifestEntry>) -> Result<Self, ManifestError> {
        let mut entries: Vec<ManifestEntry> = entries.into_iter().collect();
        entries.sort_by(|a, b| a.path.as_bytes().cmp(b.path.as_bytes()));
        if let Some(w) = entries.windows(2).find(|w| w[0].path == w[1].path) {
            return Err(ManifestError::Duplicate(w[0].path.clone()));
        }
        Ok(Self { entries })
    }

    /// Builds a manifest from in-memory file contents.
    pub fn from_contents<'a>(
        files: impl IntoIterator<Item = (&'a str, &'a [u8])>,
    ) -> Result<Self, ManifestError> {
        Self::from_entries(files.into_iter().map(|(path, bytes)| ManifestEntry {
            path: path.to_string(),
            sha256: hash_bytes(bytes),
        }))
    }

    pub fn entries(&self) -> &[ManifestEntry] {
        &self.entries
    }

    pub fn get(&self, path: &str) -> Option<&Digest> {
        self.entries
            .binary_search_by(|e| e.path.as_bytes().cmp(path.as_bytes()))
            .ok()
            .map(|i| &self.entries[i].sha256)
    }

    pub fn to_canonical(&self) -> CanonicalJson {
        canonical_bytes(&self.entries).expect("manifest entries contain no floats")
    }

    pub fn digest(&self) -> Digest {
        self.to_canonical().digest()
    }

    pub fn from_json(bytes: &[u8]) -> Result<Self, ManifestError> {
        let entries: Vec<ManifestEntry> =
            serde_json::from_slice(bytes).map_err(|e| ManifestError::Malformed(e.to_string()))?;
        Self::from_entries(entries)
    }

    /// Accepts iff `(path, hash(content))` is an entry.
    pub fn verify(&self, path: &str, content: &[u8]) -> bool {
        self.get(path) == Some(&hash_bytes(content))
    }
}

/// Manifest of every regular file under `root`, recursively. Symlinks and
/// directories contribute nothing.
pub fn build_manifest(root: impl AsRef<Path>) -> Result<TrustedManifest, ManifestError> {
    let root = root.as_ref();
    let mut entries = Vec::new();
    for item in walkdir::WalkDir::new(root).follow_links(false) {
        let item = item.map_err(|e| ManifestError::Walk {
            path: e.path().unwrap_or(root).to_path_buf(),
            message: e.to_string(),
        })?;
        if !item.file_type().is_file() {
            continue;
        }
        let rel = item.path().strip_prefix(root).expect("walkdir yields paths under root");
        let mut parts = Vec::new();
        for c in rel.components() {
            parts.push(c.as_os_str().to_str().ok_or_else(|| ManifestError::NonUtf8Path(item.path().to_path_buf()))?);
        }
        let (_, sha256) = hash_file_once(item.path())?;
        entries.push(ManifestEntry { path: parts.join("/"), sha256 });
    }
    TrustedManifest::from_entries(entries)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn empty_directory() {
        let dir = tempfile::tempdir().unwrap();
        let m = build_manifest(dir.path()).unwrap();
        assert!(m.entries().is_empty());
        assert_eq!(m.to_canonical().as_str(), "[]");
        assert_eq!(m.digest(), hash_bytes(b"[]"));
    }

    #[test]
    fn two_files_sorted_and_swap_sensitive() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("b"), "y").unwrap();
        std::fs::write(dir.path().join("a"), "x").unwrap();
        let m = build_manifest(dir.path()).unwrap();
        let paths: Vec<_> = m.entries().iter().map(|e| e.path.as_str()).collect();
        assert_eq!(paths, ["a", "b"]);
        // frozen from sha256sum over the same bytes
        assert_eq!(
            m.entries()[0].sha256.to_hex(),
            "2d711642b726b04401627ca9fbac32f5c8530fb1903cc4db02258717921a4881"
        );
        assert_eq!(
            m.entries()[1].sha256.to_hex(),
            "a1fce4363854ff888cff4b8e7875d600c2682390412a8cf79b37d0b11148b0fa"
        );
        assert_eq!(
            m.digest().to_hex(),
            "4ea8e735b8f8a7fc8f900a20840c3377b1c724f9703fdb302836bba544c3f6b1"
        );
        std::fs::write(dir.path().join("a"), "y").unwrap();
        std::fs::write(dir.path().join("b"), "x").unwrap();
        let swapped = build_manifest(dir.path()).unwrap();
        assert_ne!(m.digest(), swapped.digest());
    }

    #[test]
    fn nested_paths_use_forward_slashes_and_copies_match() {
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        for root in [a.path(), b.path()] {
            std::fs::create_dir_all(root.join("sub/deeper")).unwrap();
            std::fs::create_dir_all(root.join("empty")).unwrap();
            std::fs::write(root.join("sub/deeper/f.txt"), "1").unwrap();
            std::fs::write(root.join("top"), "2").unwrap();
        }
        let ma = build_manifest(a.path()).unwrap();
        assert_eq!(ma.entries()[0].path, "sub/deeper/f.txt");
        assert_eq!(ma.digest(), build_manifest(b.path()).unwrap().digest());
    }

    #[cfg(unix)]
    #[test]
    fn symlinks_are_excluded() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("real"), "r").unwrap();
        std::os::unix::fs::symlink(dir.path().join("real"), dir.path().join("link")).unwrap();
        let m = build_manifest(dir.path()).unwrap();
        assert_eq!(m.entries().len(), 1);
    }

    #[test]
    fn verify_membership() {
        let m = TrustedManifest::from_contents([("a", b"x".as_slice())]).unwrap();
        assert!(m.verify("a", b"x"));
        assert!(!m.verify("a", b"z"));
        assert!(!m.verify("c", b"x"));
    }

    #[test]
    fn duplicates_rejected_and_json_round_trip() {
        let e = ManifestEntry { path: "a".into(), sha256: hash_bytes(b"x") };
        assert!(matches!(
            TrustedManifest::from_entries([e.clone(), e.clone()]),
            Err(ManifestError::Duplicate(_))
        ));
        let m = TrustedManifest::from_entries([e]).unwrap();
        assert_eq!(TrustedManifest::from_json(m.to_canonical().as_bytes()).unwrap(), m);
    }

    proptest! {
        #[test]
        fn insertion_order_does_not_matter(files in proptest::collection::btree_map("[a-z]{1,5}", proptest::collection::vec(any::<u8>(), 0..16), 0..10), seed in any::<u64>()) {
            let entries: Vec<ManifestEntry> = files.iter().map(|(p, c)| ManifestEntry { path: p.clone(), sha256: hash_bytes(c) }).collect();
            let mut shuffled = entries.clone();
            // simple deterministic permutation
            let n = shuffled.len();
            if n > 1 {
                for i in 0..n {
                    let j = ((seed >> (i % 32)) as usize + i * 7) % n;
                    shuffled.swap(i, j);
                }
            }
            let a = TrustedManifest::from_entries(entries).unwrap();
            let b = TrustedManifest::from_entries(shuffled).unwrap();
            prop_assert_eq!(a.digest(), b.digest());
        }
    }
}
