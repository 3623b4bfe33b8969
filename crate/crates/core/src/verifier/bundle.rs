use serde::{Deserialize, Serialize};

use super::certs::ExternalCertificate;
use crate::hashcore::{canonical_bytes, CanonicalError, CanonicalJson};
use crate::measurers::AttestationEnvelope;

pub const BUNDLE_VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum BundleError {
    #[error("bundle json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("unsupported bundle version {0}")]
    Version(u32),
}

/// Envelopes and external certificates shipped from prover to verifier.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct AssertionBundle {
    pub envelopes: Vec<AttestationEnvelope>,
    pub external_certificates: Vec<ExternalCertificate>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Wire {
    version: u32,
    envelopes: Vec<AttestationEnvelope>,
    external_certificates: Vec<ExternalCertificate>,
}

impl AssertionBundle {
    pub fn to_canonical(&self) -> Result<CanonicalJson, CanonicalError> {
        canonical_bytes(&Wire {
            version: BUNDLE_VERSION,
            envelopes: self.envelopes.clone(),
            external_certificates: self.external_certificates.clone(),
        })
    }

    pub fn from_json(bytes: &[u8]) -> Result<Self, BundleError> {
        let w: Wire = serde_json::from_slice(bytes)?;
        if w.version != BUNDLE_VERSION {
            return Err(BundleError::Version(w.version));
        }
        Ok(Self { envelopes: w.envelopes, external_certificates: w.external_certificates })
    }
}
