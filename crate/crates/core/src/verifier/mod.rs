//! Verifier side: quote checks, certification lookup, template matching,
//! chain resolution and card assembly.

mod bundle;
mod cards;
mod certs;
mod chain;
mod template;

pub use bundle::{AssertionBundle, BundleError, BUNDLE_VERSION};
pub use cards::{assemble_cards, CardConflict, CardKind, Claim, PropertyCard, Provenance};
pub use certs::{
    default_template, CertError, CertStore, Certification, EndorserKey, EndorserRecord, ExternalCertificate,
    SubjectKind, TrustAnchors,
};
pub use chain::{resolve_chains, ChainReport, InferenceChain, Link, ModelChain};
pub use template::{match_template, validate_template, InvalidTemplate, MatchError, Mismatch};

use std::collections::BTreeMap;

use serde::Serialize;
use serde_json::{json, Value};

use crate::backend::{verify_quote, EnclaveMeasurement, PublicKey, QuoteReject};
use crate::hashcore::{canonicalize, hash_bytes, CanonicalJson, Digest};
use crate::measurers::{AttestationEnvelope, Fragment};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum RejectReason {
    #[error("bad-quote({0})")]
    BadQuote(QuoteReject),
    #[error("payload-binding-mismatch")]
    PayloadBindingMismatch,
    #[error("unknown-enclave")]
    UnknownEnclave,
    #[error("template-mismatch at {path:?}: {reason}")]
    TemplateMismatch { path: String, reason: String },
    #[error("invalid-certification: {0}")]
    InvalidCertification(String),
}

impl RejectReason {
    pub fn code(&self) -> &'static str {
        match self {
            RejectReason::BadQuote(_) => "bad-quote",
            RejectReason::PayloadBindingMismatch => "payload-binding-mismatch",
            RejectReason::UnknownEnclave => "unknown-enclave",
            RejectReason::TemplateMismatch { .. } => "template-mismatch",
            RejectReason::InvalidCertification(_) => "invalid-certification",
        }
    }
}

/// An envelope that passed every check, with the certification that admitted it.
#[derive(Debug, Clone, PartialEq)]
pub struct VerifiedFragment {
    pub fragment: Fragment,
    pub payload_sha256: Digest,
    pub measurement: EnclaveMeasurement,
    pub certification_id: Digest,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VerifiedExternal {
    pub certificate: ExternalCertificate,
    pub id: Digest,
}

/// Per-item result of bundle verification.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Verdict {
    pub item: String,
    pub verified: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub att_type: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub payload_sha256: Option<Digest>,
}

#[derive(Debug, Clone)]
pub struct VerificationOutcome {
    pub verdicts: Vec<Verdict>,
    pub fragments: Vec<VerifiedFragment>,
    pub externals: Vec<VerifiedExternal>,
    pub chains: ChainReport,
    pub cards: Result<Vec<PropertyCard>, CardConflict>,
}

impl VerificationOutcome {
    pub fn all_verified(&self) -> bool {
        self.verdicts.iter().all(|v| v.verified)
    }

    /// Verdicts, chain report and any card conflict as canonical JSON.
    pub fn report(&self) -> CanonicalJson {
        let mut v = json!({
            "all_verified": self.all_verified(),
            "verdicts": self.verdicts,
            "chains": self.chains,
        });
        if let Err(e) = &self.cards {
            v["card_conflict"] = json!(e.to_string());
        }
        canonicalize(&v).expect("report has no floats")
    }
}

/// Stateless verifier over fixed trust anchors and certifications.
#[derive(Debug, Clone)]
pub struct Verifier {
    roots: Vec<PublicKey>,
    endorsers: BTreeMap<String, PublicKey>,
    certs: CertStore,
}

impl Verifier {
    pub fn new(anchors: &TrustAnchors, certs: CertStore) -> Self {
        Self { roots: anchors.root_keys(), endorsers: anchors.endorser_keys(), certs }
    }

    pub fn certs(&self) -> &CertStore {
        &self.certs
    }

    /// Quote, then payload binding, then certification lookup, then template.
    pub fn verify_envelope(&self, e: &AttestationEnvelope) -> Result<VerifiedFragment, RejectReason> {
        let auth = verify_quote(&e.quote, &self.roots).map_err(RejectReason::BadQuote)?;
        let payload_sha256 = hash_bytes(&e.payload);
        if payload_sha256 != auth.report_data {
            return Err(RejectReason::PayloadBindingMismatch);
        }
        let certs = self.certs.lookup(&auth.measurement);
        if certs.is_empty() {
            return Err(RejectReason::UnknownEnclave);
        }
        let payload: Value = serde_json::from_slice(&e.payload)
            .map_err(|err| RejectReason::TemplateMismatch { path: String::new(), reason: format!("payload: {err}") })?;

        let mut invalid = None;
        let mut mismatch = None;
        for cert in certs {
            let id = match cert.check(&self.endorsers) {
                Ok(id) => id,
                Err(err) => {
                    invalid.get_or_insert(err.to_string());
                    continue;
                }
            };
            match match_template(&cert.template, &payload) {
                Ok(()) => {
                    let fragment = Fragment::from_value(&payload)
                        .and_then(|f| f.validate_schema().map(|()| f))
                        .map_err(|err| RejectReason::TemplateMismatch { path: String::new(), reason: err.to_string() })?;
                    return Ok(VerifiedFragment {
                        fragment,
                        payload_sha256,
                        measurement: auth.measurement,
                        certification_id: id,
                    });
                }
                Err(MatchError::Invalid(err)) => {
                    invalid.get_or_insert(err.to_string());
                }
                Err(MatchError::Mismatch(m)) => {
                    mismatch.get_or_insert(m);
                }
            }
        }
        match (mismatch, invalid) {
            (Some(m), _) => Err(RejectReason::TemplateMismatch { path: m.path, reason: m.reason }),
            (None, Some(reason)) => Err(RejectReason::InvalidCertification(reason)),
            (None, None) => unreachable!("at least one certification was examined"),
        }
    }

    pub fn verify_external(&self, c: &ExternalCertificate) -> Result<VerifiedExternal, String> {
        let id = c.verify(&self.endorsers)?;
        Ok(VerifiedExternal { certificate: c.clone(), id })
    }

    pub fn verify_bundle(&self, b: &AssertionBundle) -> VerificationOutcome {
        let mut verdicts = Vec::new();
        let mut fragments = Vec::new();
        let mut externals = Vec::new();
        for (i, e) in b.envelopes.iter().enumerate() {
            let item = format!("envelope[{i}]");
            let payload_sha256 = Some(hash_bytes(&e.payload));
            match self.verify_envelope(e) {
                Ok(f) => {
                    verdicts.push(Verdict {
                        item,
                        verified: true,
                        reason: None,
                        detail: None,
                        att_type: Some(f.fragment.att_type.name().into()),
                        payload_sha256,
                    });
                    fragments.push(f);
                }
                Err(r) => verdicts.push(Verdict {
                    item,
                    verified: false,
                    reason: Some(r.code().into()),
                    detail: Some(r.to_string()),
                    att_type: None,
                    payload_sha256,
                }),
            }
        }
        for (i, c) in b.external_certificates.iter().enumerate() {
            let item = format!("external_certificate[{i}]");
            match self.verify_external(c) {
                Ok(v) => {
                    verdicts.push(Verdict {
                        item,
                        verified: true,
                        reason: None,
                        detail: None,
                        att_type: None,
                        payload_sha256: None,
                    });
                    externals.push(v);
                }
                Err(r) => verdicts.push(Verdict {
                    item,
                    verified: false,
                    reason: Some("invalid-external-certificate".into()),
                    detail: Some(r),
                    att_type: None,
                    payload_sha256: None,
                }),
            }
        }
        let chains = resolve_chains(&fragments, &externals);
        let cards = assemble_cards(&fragments, &externals);
        VerificationOutcome { verdicts, fragments, externals, chains, cards }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::{self, Pipeline};
    use crate::measurers::{AttType, Enclave, MeasurerKind};
    use std::sync::OnceLock;

    fn pipeline() -> &'static Pipeline {
        static P: OnceLock<Pipeline> = OnceLock::new();
        P.get_or_init(Pipeline::standard)
    }

    fn cards_of(o: &VerificationOutcome, k: CardKind) -> Vec<&PropertyCard> {
        o.cards.as_ref().unwrap().iter().filter(|c| c.kind == k).collect()
    }

    #[test]
    fn full_bundle_verifies() {
        let p = pipeline();
        let preds: Vec<u32> =
            p.test.rows().iter().map(|r| crate::ml::predict(&p.model, &r.features).unwrap().predicted).collect();
        assert_eq!(preds, [0, 0, 1, 0, 1, 1]);

        let o = p.verifier().verify_bundle(&p.bundle());
        assert!(o.all_verified(), "{:?}", o.verdicts);
        assert!(o.chains.all_green, "{:?}", o.chains.broken().collect::<Vec<_>>());
        assert_eq!(cards_of(&o, CardKind::Model).len(), 1);
        let sheets = cards_of(&o, CardKind::Dataset);
        assert_eq!(sheets.len(), 2);
        let train = sheets.iter().find(|c| c.subject == p.train.digest()).unwrap();
        assert!(train.claim("distribution/marginal").is_some());
        assert_eq!(train.claim("name"), Some(&json!("SEPARABLE-TRAIN")));
        let test = sheets.iter().find(|c| c.subject == p.test.digest()).unwrap();
        assert!(test.to_yaml().contains("FIXTURE-TEST"));
        assert_eq!(cards_of(&o, CardKind::Inference).len(), 1);

        let model = cards_of(&o, CardKind::Model)[0];
        assert_eq!(model.subject, p.model.digest());
        let yaml = model.to_yaml();
        assert!(yaml.contains("model-index"));
        assert!(yaml.contains("'0.666667'"), "{yaml}");
        assert!(yaml.contains("demographic_parity"));
        assert!(yaml.contains("robust_accuracy"));
        assert!(yaml.contains("epsilon: '0.100000'"), "{yaml}");
        assert!(yaml.contains(&p.train.digest().to_string()));

        let io = &o.chains.inferences[0];
        let c = io.conclusion.as_deref().unwrap();
        assert!(c.starts_with("output "), "{c}");
        assert!(c.contains("was generated from model"));
        assert!(c.contains("was trained on SEPARABLE-TRAIN"));
        assert!(c.contains("accuracy 0.666667"));
        assert!(c.contains("robust_accuracy"));
    }

    #[test]
    fn unknown_and_cross_enclave() {
        let p = pipeline();
        let certs: Vec<_> = p
            .certifications()
            .into_iter()
            .filter(|c| c.enclave_measurement != MeasurerKind::Metric.measurement())
            .collect();
        let v = Verifier::new(&p.anchors(), CertStore::new(certs));
        assert_eq!(v.verify_envelope(p.envelope(AttType::AccAtt)), Err(RejectReason::UnknownEnclave));
        assert!(v.verify_envelope(p.envelope(AttType::PoT)).is_ok());

        let acc = Fragment::from_payload(&p.envelope(AttType::AccAtt).payload).unwrap();
        let forged = Enclave::new(MeasurerKind::Inference, &p.platform).seal(&acc).unwrap();
        match p.verifier().verify_envelope(&forged) {
            Err(RejectReason::TemplateMismatch { path, .. }) => assert_eq!(path, "/att_type"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn bad_certifications() {
        let p = pipeline();
        let e = p.envelope(AttType::DistAtt);
        let mut certs = p.certifications();
        let i = certs.iter().position(|c| c.template["att_type"] == "DistAtt").unwrap();
        certs[i].template["results"] = Value::Null;
        let v = Verifier::new(&p.anchors(), CertStore::new(certs.clone()));
        assert_eq!(v.verify_envelope(e).unwrap_err().code(), "invalid-certification");
        certs[i].template["results"] = json!(0.5);
        let v = Verifier::new(&p.anchors(), CertStore::new(certs));
        assert_eq!(v.verify_envelope(e).unwrap_err().code(), "invalid-certification");

        assert!(matches!(
            p.endorser.certify(MeasurerKind::Dataset.measurement(), json!({"a": 1.5})),
            Err(CertError::InvalidTemplate(_))
        ));
        let stranger = EndorserKey::derive("stranger", b"s").unwrap();
        let certs = certs_for(&stranger);
        let v = Verifier::new(&p.anchors(), CertStore::new(certs));
        assert_eq!(v.verify_envelope(e).unwrap_err().code(), "invalid-certification");
    }

    fn certs_for(e: &EndorserKey) -> Vec<Certification> {
        fixtures::certify_all(e)
    }

    #[test]
    fn only_distribution_gives_one_datasheet() {
        let p = pipeline();
        let b = AssertionBundle { envelopes: vec![p.envelope(AttType::DistAtt).clone()], external_certificates: vec![] };
        let o = p.verifier().verify_bundle(&b);
        assert!(o.all_verified());
        let cards = o.cards.unwrap();
        assert_eq!(cards.len(), 1);
        assert_eq!(cards[0].kind, CardKind::Dataset);
        assert!(cards[0].to_yaml().contains("ratio"));
    }

    #[test]
    fn duplicates_merge_and_conflicts_fail() {
        let p = pipeline();
        let v = p.verifier();
        let mut b = p.bundle();
        let base = v.verify_bundle(&b).cards.unwrap();
        b.envelopes.push(p.envelope(AttType::AccAtt).clone());
        b.envelopes.push(p.envelope(AttType::PoT).clone());
        assert_eq!(v.verify_bundle(&b).cards.unwrap(), base);

        let mut f = Fragment::from_payload(&p.envelope(AttType::AccAtt).payload).unwrap();
        f.results[0]["metrics"][0]["numerator"] = json!(5);
        f.results[0]["metrics"][0]["value"] = json!("0.833333");
        b.envelopes.push(Enclave::new(MeasurerKind::Metric, &p.platform).seal(&f).unwrap());
        let o = v.verify_bundle(&b);
        assert!(o.all_verified());
        let err = o.cards.clone().unwrap_err();
        assert!(err.path.ends_with("/accuracy"), "{err}");
        assert_ne!(err.first_source, err.second_source);
        assert!(o.report().as_str().contains("card_conflict"));
    }

    #[test]
    fn tampered_external_is_rejected() {
        let p = pipeline();
        let mut b = p.bundle();
        b.external_certificates[0].name = "SOMETHING-ELSE".into();
        let o = p.verifier().verify_bundle(&b);
        assert!(!o.all_verified());
        let bad: Vec<_> = o.verdicts.iter().filter(|v| !v.verified).collect();
        assert_eq!(bad.len(), 1);
        assert_eq!(bad[0].item, "external_certificate[0]");
        assert!(!o.chains.all_green);
    }

    #[test]
    fn anchors_and_store_round_trip() {
        let p = pipeline();
        let a = p.anchors();
        assert_eq!(TrustAnchors::from_json(a.to_canonical().as_bytes()).unwrap(), a);
        let mut forged = a.clone();
        forged.endorsers[0].endorser_id = "other".into();
        assert!(TrustAnchors::from_json(forged.to_canonical().as_bytes()).is_err());
        let store = CertStore::new(p.certifications());
        let back = CertStore::from_json(store.to_json().as_bytes()).unwrap();
        assert_eq!(back.len(), 7);
        let b = p.bundle();
        assert_eq!(AssertionBundle::from_json(b.to_canonical().unwrap().as_bytes()).unwrap(), b);
    }
}
