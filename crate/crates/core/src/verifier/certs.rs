use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::template::{validate_template, InvalidTemplate};
use crate::backend::{EnclaveMeasurement, KeyError, KeyPair, PublicKey, RootCertificate, Signature};
use crate::hashcore::{canonicalize, CanonicalError, CanonicalJson, Digest};
use crate::measurers::{AttType, TASK_TYPE};

#[derive(Debug, thiserror::Error)]
pub enum CertError {
    #[error(transparent)]
    InvalidTemplate(#[from] InvalidTemplate),
    #[error("claims: {0}")]
    Claims(#[from] CanonicalError),
    #[error("empty endorser id or seed")]
    Empty,
    #[error(transparent)]
    Key(#[from] KeyError),
    #[error("{0}: self-signature does not verify")]
    BadSelfSignature(String),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

/// An endorser's signing key.
pub struct EndorserKey {
    id: String,
    key: KeyPair,
}

/// Public half of an endorser key, as registered with verifiers.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EndorserRecord {
    pub endorser_id: String,
    pub pubkey: PublicKey,
    pub self_signature: Signature,
}

fn endorser_message(id: &str, pubkey: &PublicKey) -> CanonicalJson {
    canonicalize(&json!({ "endorser_id": id, "kind": "endorser", "pubkey": pubkey })).expect("no floats")
}

impl EndorserKey {
    /// Deterministic key for `id` from `seed`.
    pub fn derive(id: &str, seed: &[u8]) -> Result<Self, CertError> {
        if id.is_empty() || seed.is_empty() {
            return Err(CertError::Empty);
        }
        Ok(Self { id: id.to_string(), key: KeyPair::derive("lam/endorser/v1", &[id.as_bytes(), seed]) })
    }

    pub fn from_secret_hex(id: &str, secret: &str) -> Result<Self, CertError> {
        if id.is_empty() {
            return Err(CertError::Empty);
        }
        Ok(Self { id: id.to_string(), key: KeyPair::from_secret_hex(secret)? })
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn secret_hex(&self) -> String {
        self.key.secret_hex()
    }

    pub fn public(&self) -> PublicKey {
        self.key.public()
    }

    pub fn record(&self) -> EndorserRecord {
        let pubkey = self.key.public();
        let self_signature = self.key.sign(endorser_message(&self.id, &pubkey).as_bytes());
        EndorserRecord { endorser_id: self.id.clone(), pubkey, self_signature }
    }

    /// Authorizes the enclave `measurement` to emit payloads matching `template`.
    pub fn certify(&self, measurement: EnclaveMeasurement, template: Value) -> Result<Certification, CertError> {
        validate_template(&template)?;
        let content = certification_content(&measurement, &self.id, &template)?;
        let endorser_signature = self.key.sign(content.as_bytes());
        Ok(Certification { enclave_measurement: measurement, template, endorser_id: self.id.clone(), endorser_signature })
    }

    pub fn certify_subject(
        &self,
        subject_sha256: Digest,
        subject_kind: SubjectKind,
        name: &str,
        claims: Value,
    ) -> Result<ExternalCertificate, CertError> {
        let mut c = ExternalCertificate {
            subject_sha256,
            subject_kind,
            name: name.to_string(),
            claims,
            endorser_id: self.id.clone(),
            endorser_signature: Signature::from_bytes([0; 64]),
        };
        c.endorser_signature = self.key.sign(c.signed_content()?.as_bytes());
        Ok(c)
    }
}

impl EndorserRecord {
    pub fn verify_self(&self) -> bool {
        self.pubkey.verify(endorser_message(&self.endorser_id, &self.pubkey).as_bytes(), &self.self_signature)
    }
}

fn certification_content(m: &EnclaveMeasurement, endorser_id: &str, template: &Value) -> Result<CanonicalJson, CanonicalError> {
    canonicalize(&json!({ "enclave_measurement": m, "endorser_id": endorser_id, "template": template }))
}

/// Endorser-signed mapping from an enclave measurement to the payload
/// template that enclave may attest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Certification {
    pub enclave_measurement: EnclaveMeasurement,
    pub template: Value,
    pub endorser_id: String,
    pub endorser_signature: Signature,
}

impl Certification {
    /// Digest of the signed content. Fails on templates that cannot be
    /// canonicalized.
    pub fn id(&self) -> Result<Digest, InvalidTemplate> {
        validate_template(&self.template)?;
        Ok(certification_content(&self.enclave_measurement, &self.endorser_id, &self.template)
            .expect("validated template")
            .digest())
    }

    /// Checks the template and the endorser signature against `endorsers`.
    pub fn check(&self, endorsers: &BTreeMap<String, PublicKey>) -> Result<Digest, InvalidTemplate> {
        let id = self.id()?;
        let invalid = |reason: &str| InvalidTemplate { path: String::new(), reason: reason.into() };
        let key = endorsers.get(&self.endorser_id).ok_or_else(|| invalid("unknown endorser"))?;
        let content = certification_content(&self.enclave_measurement, &self.endorser_id, &self.template)
            .expect("validated template");
        if !key.verify(content.as_bytes(), &self.endorser_signature) {
            return Err(invalid("endorser signature does not verify"));
        }
        Ok(id)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SubjectKind {
    Dataset,
    Model,
}

/// Endorser statement naming (and optionally vouching for) a dataset or
/// model digest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExternalCertificate {
    pub subject_sha256: Digest,
    pub subject_kind: SubjectKind,
    pub name: String,
    pub claims: Value,
    pub endorser_id: String,
    pub endorser_signature: Signature,
}

impl ExternalCertificate {
    pub fn signed_content(&self) -> Result<CanonicalJson, CanonicalError> {
        canonicalize(&json!({
            "claims": self.claims,
            "endorser_id": self.endorser_id,
            "name": self.name,
            "subject_kind": self.subject_kind,
            "subject_sha256": self.subject_sha256,
        }))
    }

    pub fn id(&self) -> Result<Digest, CanonicalError> {
        Ok(self.signed_content()?.digest())
    }

    pub fn verify(&self, endorsers: &BTreeMap<String, PublicKey>) -> Result<Digest, String> {
        let content = self.signed_content().map_err(|e| e.to_string())?;
        let key = endorsers.get(&self.endorser_id).ok_or("unknown endorser")?;
        if !key.verify(content.as_bytes(), &self.endorser_signature) {
            return Err("endorser signature does not verify".into());
        }
        Ok(content.digest())
    }
}

/// Verifier trust configuration: manufacturer roots and registered endorsers.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrustAnchors {
    pub tee_roots: Vec<RootCertificate>,
    pub endorsers: Vec<EndorserRecord>,
}

impl TrustAnchors {
    pub fn from_json(bytes: &[u8]) -> Result<Self, CertError> {
        let t: Self = serde_json::from_slice(bytes)?;
        t.check()?;
        Ok(t)
    }

    pub fn check(&self) -> Result<(), CertError> {
        if let Some(r) = self.tee_roots.iter().find(|r| !r.verify_self()) {
            return Err(CertError::BadSelfSignature(format!("tee root {}", r.pubkey)));
        }
        if let Some(e) = self.endorsers.iter().find(|e| !e.verify_self()) {
            return Err(CertError::BadSelfSignature(format!("endorser {}", e.endorser_id)));
        }
        Ok(())
    }

    pub fn to_canonical(&self) -> CanonicalJson {
        crate::hashcore::canonical_bytes(self).expect("no floats")
    }

    pub fn root_keys(&self) -> Vec<PublicKey> {
        self.tee_roots.iter().map(|r| r.pubkey).collect()
    }

    pub fn endorser_keys(&self) -> BTreeMap<String, PublicKey> {
        self.endorsers.iter().map(|e| (e.endorser_id.clone(), e.pubkey)).collect()
    }

    /// Adds or replaces a root, keyed by public key.
    pub fn add_root(&mut self, r: RootCertificate) {
        self.tee_roots.retain(|x| x.pubkey != r.pubkey);
        self.tee_roots.push(r);
    }

    /// Adds or replaces an endorser, keyed by id.
    pub fn add_endorser(&mut self, e: EndorserRecord) {
        self.endorsers.retain(|x| x.endorser_id != e.endorser_id);
        self.endorsers.push(e);
    }
}

fn metric_template(metric: &str, with_args: bool) -> Value {
    let mut m = json!({ "type": metric, "value": null, "numerator": null, "denominator": null });
    if with_args {
        m["args"] = Value::Null;
    }
    json!({ "task": { "type": TASK_TYPE }, "metrics": m })
}

/// The template an endorser would normally certify for `t`: fixes the type
/// label, the digest field set and the result shape, and leaves values open.
pub fn default_template(t: AttType) -> Value {
    let digests: serde_json::Map<String, Value> =
        t.digest_fields().iter().map(|f| (f.to_string(), Value::Null)).collect();
    let (parameters, results) = match t {
        AttType::DistAtt => (Value::Null, json!({ "distribution": null })),
        AttType::PoT => (Value::Null, json!({ "training": null })),
        AttType::AccAtt => (Value::Null, metric_template("accuracy", false)),
        AttType::FairAtt => (Value::Null, metric_template("demographic_parity", true)),
        AttType::RobustAttA => (json!({ "attack": "fgsm", "epsilon": null }), json!({ "robust_dataset": null })),
        AttType::RobustAttB => (Value::Null, metric_template("robust_accuracy", false)),
        AttType::IOAtt => (Value::Null, json!({ "output": null })),
    };
    json!({ "att_type": t.name(), "digests": digests, "parameters": parameters, "results": results })
}

/// Loaded certification records, indexed by measurement. Records are kept
/// even when their signature or template is bad so that lookups can report
/// them as invalid rather than unknown.
#[derive(Debug, Clone, Default)]
pub struct CertStore {
    by_measurement: BTreeMap<EnclaveMeasurement, Vec<Certification>>,
}

impl CertStore {
    pub fn new(certs: impl IntoIterator<Item = Certification>) -> Self {
        let mut by_measurement: BTreeMap<_, Vec<_>> = BTreeMap::new();
        for c in certs {
            by_measurement.entry(c.enclave_measurement).or_default().push(c);
        }
        Self { by_measurement }
    }

    /// Parses a JSON list of certifications.
    pub fn from_json(bytes: &[u8]) -> Result<Self, CertError> {
        let certs: Vec<Certification> = serde_json::from_slice(bytes)?;
        Ok(Self::new(certs))
    }

    pub fn lookup(&self, m: &EnclaveMeasurement) -> &[Certification] {
        self.by_measurement.get(m).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn all(&self) -> impl Iterator<Item = &Certification> {
        self.by_measurement.values().flatten()
    }

    pub fn len(&self) -> usize {
        self.by_measurement.values().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Serialized as a JSON list. Invalid templates are written as loaded.
    pub fn to_json(&self) -> String {
        let list: Vec<&Certification> = self.all().collect();
        match crate::hashcore::canonical_bytes(&list) {
            Ok(c) => c.as_str().to_string(),
            Err(_) => serde_json::to_string(&list).expect("serializable"),
        }
    }
}
