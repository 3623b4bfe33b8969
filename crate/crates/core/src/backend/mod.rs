//! Simulated TEE: a manufacturer root that certifies per-platform
//! attestation keys, enclave measurements, and quotes over caller-chosen
//! report data.
//!
//! The [`AttestationBackend`] and [`QuoteVerifier`] traits are the seam for
//! a hardware backend. Quotes carry a `sig_alg` field so an ECDSA-based
//! quote format can slot in beside Ed25519. Quotes bind content only (no
//! nonce or timestamp): replaying a genuine quote re-asserts a true
//! statement. TCB and signer fields are not policed.

mod keys;

pub use keys::{KeyError, KeyPair, PublicKey, Signature};

use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::hashcore::{canonicalize, hash_bytes, CanonicalJson, Digest, TrustedManifest};

pub const SIG_ALG_ED25519: &str = "ed25519";

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum BackendError {
    #[error("root seed must not be empty")]
    EmptySeed,
}

/// Manufacturer root of trust.
#[derive(Debug, Clone)]
pub struct RootKey {
    key: KeyPair,
}

/// Self-signed statement of a root public key.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RootCertificate {
    pub pubkey: PublicKey,
    pub self_signature: Signature,
}

fn root_cert_message(pubkey: &PublicKey) -> CanonicalJson {
    canonicalize(&json!({"kind": "tee-root", "pubkey": pubkey.to_hex()})).expect("no floats")
}

impl RootCertificate {
    pub fn verify_self(&self) -> bool {
        self.pubkey.verify(root_cert_message(&self.pubkey).as_bytes(), &self.self_signature)
    }
}

/// Deterministic manufacturer root from `seed`.
pub fn create_root(seed: &[u8]) -> Result<RootKey, BackendError> {
    if seed.is_empty() {
        return Err(BackendError::EmptySeed);
    }
    Ok(RootKey { key: KeyPair::derive("lam/tee-root/v1", &[seed]) })
}

impl RootKey {
    pub fn from_keypair(key: KeyPair) -> Self {
        Self { key }
    }

    pub fn keypair(&self) -> &KeyPair {
        &self.key
    }

    pub fn public(&self) -> PublicKey {
        self.key.public()
    }

    pub fn certificate(&self) -> RootCertificate {
        let pubkey = self.public();
        RootCertificate { pubkey, self_signature: self.key.sign(root_cert_message(&pubkey).as_bytes()) }
    }
}

/// Root-signed binding of a platform id to its attestation key.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlatformCertificate {
    pub platform_id: String,
    pub pubkey: PublicKey,
    pub root_signature: Signature,
}

impl PlatformCertificate {
    fn message(platform_id: &str, pubkey: &PublicKey) -> CanonicalJson {
        canonicalize(&json!({"platform_id": platform_id, "pubkey": pubkey.to_hex()})).expect("no floats")
    }

    pub fn verify(&self, root: &PublicKey) -> bool {
        root.verify(Self::message(&self.platform_id, &self.pubkey).as_bytes(), &self.root_signature)
    }
}

/// A provisioned platform. Holds the attestation private key; issuance on
/// one identity must be serialized by the caller, distinct identities are
/// independent.
#[derive(Debug, Clone)]
pub struct PlatformIdentity {
    key: KeyPair,
    certificate: PlatformCertificate,
}

/// Provisions a platform under `root`. The attestation key is derived from
/// the root secret and `platform_id`, so provisioning is reproducible and
/// distinct ids get distinct keys.
pub fn provision_platform(root: &RootKey, platform_id: &str) -> PlatformIdentity {
    let key = KeyPair::derive(
        "lam/platform/v1",
        &[&root.key.secret_bytes(), platform_id.as_bytes()],
    );
    certify_platform(root, platform_id, key)
}

/// Certifies an existing attestation key (used when loading key files).
pub fn certify_platform(root: &RootKey, platform_id: &str, key: KeyPair) -> PlatformIdentity {
    let pubkey = key.public();
    let root_signature = root.key.sign(PlatformCertificate::message(platform_id, &pubkey).as_bytes());
    PlatformIdentity {
        key,
        certificate: PlatformCertificate { platform_id: platform_id.to_string(), pubkey, root_signature },
    }
}

impl PlatformIdentity {
    pub fn from_parts(key: KeyPair, certificate: PlatformCertificate) -> Self {
        Self { key, certificate }
    }

    pub fn certificate(&self) -> &PlatformCertificate {
        &self.certificate
    }

    pub fn keypair(&self) -> &KeyPair {
        &self.key
    }

    pub fn public(&self) -> PublicKey {
        self.key.public()
    }

    /// Issues a quote for an enclave launched in debug mode. Such quotes are
    /// genuine but are always refused by [`verify_quote`].
    pub fn issue_debug_quote(&self, measurement: EnclaveMeasurement, report_data: Digest) -> Quote {
        self.sign_quote(measurement, report_data, true)
    }

    fn sign_quote(&self, measurement: EnclaveMeasurement, report_data: Digest, debug: bool) -> Quote {
        let signature = self.key.sign(&quote_message(&measurement, &report_data, debug));
        Quote {
            enclave_measurement: measurement,
            report_data,
            debug,
            sig_alg: SIG_ALG_ED25519.to_string(),
            signature,
            attestation_pubkey: self.key.public(),
            platform_certificate: self.certificate.clone(),
        }
    }
}

/// MRENCLAVE analog: digest of measurer code, trusted files and config.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct EnclaveMeasurement(pub Digest);

impl std::fmt::Debug for EnclaveMeasurement {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "EnclaveMeasurement({})", self.0)
    }
}

impl std::fmt::Display for EnclaveMeasurement {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        self.0.fmt(f)
    }
}

/// Length-prefixed concatenation, in order, of the code digest, the trusted
/// manifest digest and the canonical config bytes.
pub fn measure_enclave(
    measurer_code: &[u8],
    manifest: &TrustedManifest,
    config: &CanonicalJson,
) -> EnclaveMeasurement {
    let mut buf = Vec::with_capacity(128 + config.as_bytes().len());
    buf.extend_from_slice(b"lam/enclave/v1");
    for part in [
        hash_bytes(measurer_code).as_bytes().as_slice(),
        manifest.digest().as_bytes().as_slice(),
        config.as_bytes(),
    ] {
        buf.extend_from_slice(&(part.len() as u64).to_le_bytes());
        buf.extend_from_slice(part);
    }
    EnclaveMeasurement(hash_bytes(&buf))
}

/// Signed statement by a platform attestation key over
/// `(measurement, report_data, debug)`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Quote {
    pub enclave_measurement: EnclaveMeasurement,
    pub report_data: Digest,
    pub debug: bool,
    pub sig_alg: String,
    pub signature: Signature,
    pub attestation_pubkey: PublicKey,
    pub platform_certificate: PlatformCertificate,
}

fn quote_message(m: &EnclaveMeasurement, report_data: &Digest, debug: bool) -> Vec<u8> {
    let mut msg = Vec::with_capacity(80);
    msg.extend_from_slice(b"lam/quote/v1\0");
    msg.extend_from_slice(m.0.as_bytes());
    msg.extend_from_slice(report_data.as_bytes());
    msg.push(debug as u8);
    msg
}

pub fn issue_quote(platform: &PlatformIdentity, measurement: EnclaveMeasurement, report_data: Digest) -> Quote {
    platform.sign_quote(measurement, report_data, false)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
pub enum QuoteReject {
    #[error("bad-chain")]
    BadChain,
    #[error("bad-signature")]
    BadSignature,
    #[error("debug-enclave")]
    DebugEnclave,
}

impl QuoteReject {
    pub fn code(self) -> &'static str {
        match self {
            QuoteReject::BadChain => "bad-chain",
            QuoteReject::BadSignature => "bad-signature",
            QuoteReject::DebugEnclave => "debug-enclave",
        }
    }
}

/// Fields of a quote that passed [`verify_quote`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AuthenticatedQuote {
    pub measurement: EnclaveMeasurement,
    pub report_data: Digest,
}

/// Chain, then signature, then debug policy.
pub fn verify_quote(quote: &Quote, trusted_roots: &[PublicKey]) -> Result<AuthenticatedQuote, QuoteReject> {
    let cert = &quote.platform_certificate;
    if cert.pubkey != quote.attestation_pubkey || !trusted_roots.iter().any(|r| cert.verify(r)) {
        return Err(QuoteReject::BadChain);
    }
    if quote.sig_alg != SIG_ALG_ED25519
        || !quote.attestation_pubkey.verify(
            &quote_message(&quote.enclave_measurement, &quote.report_data, quote.debug),
            &quote.signature,
        )
    {
        return Err(QuoteReject::BadSignature);
    }
    if quote.debug {
        return Err(QuoteReject::DebugEnclave);
    }
    Ok(AuthenticatedQuote { measurement: quote.enclave_measurement, report_data: quote.report_data })
}

/// Prover-side seam: anything that can produce quotes.
pub trait AttestationBackend {
    fn issue_quote(&self, measurement: EnclaveMeasurement, report_data: Digest) -> Quote;
}

impl AttestationBackend for PlatformIdentity {
    fn issue_quote(&self, measurement: EnclaveMeasurement, report_data: Digest) -> Quote {
        issue_quote(self, measurement, report_data)
    }
}

/// Verifier-side seam.
pub trait QuoteVerifier {
    fn verify(&self, quote: &Quote) -> Result<AuthenticatedQuote, QuoteReject>;
}

/// Verifies simulated quotes against a fixed set of manufacturer roots.
#[derive(Debug, Clone, Default)]
pub struct SimulatedVerifier {
    pub roots: Vec<PublicKey>,
}

impl QuoteVerifier for SimulatedVerifier {
    fn verify(&self, quote: &Quote) -> Result<AuthenticatedQuote, QuoteReject> {
        verify_quote(quote, &self.roots)
    }
}
