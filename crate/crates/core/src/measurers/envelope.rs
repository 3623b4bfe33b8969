use base64::engine::general_purpose::STANDARD;
use base64::Engine;
use serde::{Deserialize, Serialize};

use crate::backend::Quote;
use crate::hashcore::{canonical_bytes, hash_bytes, CanonicalJson, Digest};

pub const ENVELOPE_VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum EnvelopeError {
    #[error("envelope json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("unsupported envelope version {0}")]
    Version(u32),
    #[error("payload_b64: {0}")]
    Base64(#[from] base64::DecodeError),
}

/// Payload bytes plus the quote that binds them to an enclave identity.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AttestationEnvelope {
    pub payload: Vec<u8>,
    pub quote: Quote,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Wire {
    version: u32,
    payload_b64: String,
    quote: Quote,
}

impl AttestationEnvelope {
    pub fn payload_digest(&self) -> Digest {
        hash_bytes(&self.payload)
    }

    pub fn to_canonical(&self) -> CanonicalJson {
        canonical_bytes(&Wire {
            version: ENVELOPE_VERSION,
            payload_b64: STANDARD.encode(&self.payload),
            quote: self.quote.clone(),
        })
        .expect("envelope has no floats")
    }

    pub fn from_json(bytes: &[u8]) -> Result<Self, EnvelopeError> {
        let w: Wire = serde_json::from_slice(bytes)?;
        Self::from_wire(w)
    }

    pub fn from_value(v: serde_json::Value) -> Result<Self, EnvelopeError> {
        Self::from_wire(serde_json::from_value(v)?)
    }

    fn from_wire(w: Wire) -> Result<Self, EnvelopeError> {
        if w.version != ENVELOPE_VERSION {
            return Err(EnvelopeError::Version(w.version));
        }
        Ok(Self { payload: STANDARD.decode(w.payload_b64)?, quote: w.quote })
    }
}

impl Serialize for AttestationEnvelope {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        Wire { version: ENVELOPE_VERSION, payload_b64: STANDARD.encode(&self.payload), quote: self.quote.clone() }
            .serialize(s)
    }
}

impl<'de> Deserialize<'de> for AttestationEnvelope {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        Self::from_wire(Wire::deserialize(d)?).map_err(serde::de::Error::custom)
    }
}
