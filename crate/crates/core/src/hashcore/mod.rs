//! Canonical byte representations and SHA-256 digests for everything that
//! ends up inside an attestation, plus trusted-file manifests.

mod canonical;
mod decimal;
mod digest;
mod manifest;

pub use canonical::{canonicalize, canonical_bytes, CanonicalJson, CanonicalError};
pub use decimal::{Decimal6, DecimalError};
pub use digest::{hash_bytes, hash_file_once, Digest, DigestParseError, HashError};
pub use manifest::{build_manifest, ManifestEntry, ManifestError, TrustedManifest};
