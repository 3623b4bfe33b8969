//! Python bindings. Structured values cross the boundary as JSON text or as
//! dicts decoded with the stdlib `json` module.

use std::fmt::Display;

use lam_core::backend::{create_root, provision_platform, PlatformIdentity, RootKey};
use lam_core::hashcore::{canonicalize, hash_bytes, Decimal6, Digest};
use lam_core::measurers::{parse_features, AttType, AttestationEnvelope, Fragment, MeasurerKind, Prover};
use lam_core::ml::{self, DistributionKind};
use lam_core::verifier::{
    default_template, match_template, AssertionBundle, CertStore, Certification, EndorserKey, ExternalCertificate,
    MatchError, SubjectKind, TrustAnchors, Verifier as CoreVerifier,
};
use pyo3::create_exception;
use pyo3::exceptions::PyException;
use pyo3::prelude::*;
use serde_json::Value;

create_exception!(lam, LamError, PyException, "Input, domain or trust error.");

fn err(e: impl Display) -> PyErr {
    LamError::new_err(e.to_string())
}

fn loads<'py>(py: Python<'py>, text: &str) -> PyResult<Bound<'py, PyAny>> {
    py.import("json")?.call_method1("loads", (text,))
}

fn parse_json(text: &str) -> PyResult<Value> {
    serde_json::from_str(text).map_err(err)
}

fn digest(hex: &str) -> PyResult<Digest> {
    Digest::from_hex(hex).map_err(err)
}

fn measurer(name: &str) -> PyResult<MeasurerKind> {
    MeasurerKind::from_name(name).ok_or_else(|| err(format!("unknown measurer {name:?}")))
}

/// SHA-256 of `data` as hex.
#[pyfunction]
fn sha256(data: &[u8]) -> String {
    hash_bytes(data).to_hex()
}

/// Canonical form of a JSON document; floats are rejected.
#[pyfunction]
fn canonical_json(text: &str) -> PyResult<String> {
    Ok(canonicalize(&parse_json(text)?).map_err(err)?.as_str().to_string())
}

/// Enclave measurement of a measurer (dataset, training, metric, inference).
#[pyfunction]
fn measurement(name: &str) -> PyResult<String> {
    Ok(measurer(name)?.measurement().0.to_hex())
}

/// `None` if the payload matches the template, else the mismatch path and reason.
/// Raises on an invalid template.
#[pyfunction]
fn template_mismatch(template: &str, payload: &str) -> PyResult<Option<(String, String)>> {
    match match_template(&parse_json(template)?, &parse_json(payload)?) {
        Ok(()) => Ok(None),
        Err(MatchError::Mismatch(m)) => Ok(Some((m.path, m.reason))),
        Err(e @ MatchError::Invalid(_)) => Err(err(e)),
    }
}

/// Default certification template for an attestation type, as JSON.
#[pyfunction]
fn template_for(att_type: &str) -> PyResult<String> {
    let t = AttType::from_name(att_type).ok_or_else(|| err(format!("unknown att type {att_type:?}")))?;
    Ok(default_template(t).to_string())
}

#[pyclass(frozen, skip_from_py_object, module = "lam")]
#[derive(Clone)]
struct Dataset(ml::Dataset);

#[pymethods]
impl Dataset {
    #[staticmethod]
    fn from_csv(text: &str) -> PyResult<Self> {
        Ok(Self(ml::Dataset::from_csv(text.as_bytes()).map_err(err)?))
    }

    fn to_csv(&self) -> String {
        self.0.to_csv()
    }

    #[getter]
    fn digest(&self) -> String {
        self.0.digest().to_hex()
    }

    fn __len__(&self) -> usize {
        self.0.len()
    }
}

#[pyclass(frozen, skip_from_py_object, module = "lam")]
#[derive(Clone)]
struct TrainingConfig(ml::TrainingConfig);

#[pymethods]
impl TrainingConfig {
    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Ok(Self(ml::TrainingConfig::from_json(text.as_bytes()).map_err(err)?))
    }

    fn to_json(&self) -> String {
        self.0.to_canonical().as_str().to_string()
    }

    #[getter]
    fn digest(&self) -> String {
        self.0.digest().to_hex()
    }
}

#[pyclass(frozen, skip_from_py_object, module = "lam")]
#[derive(Clone)]
struct Model(ml::Model);

#[pymethods]
impl Model {
    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Ok(Self(ml::Model::from_json(text.as_bytes()).map_err(err)?))
    }

    fn to_json(&self) -> String {
        self.0.to_canonical().as_str().to_string()
    }

    #[getter]
    fn digest(&self) -> String {
        self.0.digest().to_hex()
    }

    /// Unattested prediction for decimal-string features.
    fn predict<'py>(&self, py: Python<'py>, features: Vec<String>) -> PyResult<Bound<'py, PyAny>> {
        let x = decimals(&features)?;
        let rec = ml::predict(&self.0, &x).map_err(err)?;
        loads(py, rec.output_canonical().as_str())
    }
}

fn decimals(features: &[String]) -> PyResult<Vec<Decimal6>> {
    let v = serde_json::json!({ "features": features });
    parse_features(v.to_string().as_bytes()).map_err(err)
}

#[pyclass(frozen, from_py_object, module = "lam")]
#[derive(Clone)]
struct Envelope(AttestationEnvelope);

#[pymethods]
impl Envelope {
    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Ok(Self(AttestationEnvelope::from_json(text.as_bytes()).map_err(err)?))
    }

    fn to_json(&self) -> String {
        self.0.to_canonical().as_str().to_string()
    }

    /// The signed fragment as a dict.
    #[getter]
    fn payload<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        loads(py, std::str::from_utf8(&self.0.payload).map_err(err)?)
    }

    #[getter]
    fn att_type(&self) -> PyResult<String> {
        Ok(Fragment::from_payload(&self.0.payload).map_err(err)?.att_type.name().to_string())
    }

    #[getter]
    fn payload_sha256(&self) -> String {
        self.0.payload_digest().to_hex()
    }

    #[getter]
    fn enclave_measurement(&self) -> String {
        self.0.quote.enclave_measurement.0.to_hex()
    }
}

/// A simulated TEE platform provisioned under a seeded manufacturer root.
#[pyclass(frozen, module = "lam")]
struct Platform {
    root: RootKey,
    identity: PlatformIdentity,
}

#[pymethods]
impl Platform {
    #[new]
    #[pyo3(signature = (root_seed, platform_id = "platform-0"))]
    fn new(root_seed: &str, platform_id: &str) -> PyResult<Self> {
        let root = create_root(root_seed.as_bytes()).map_err(err)?;
        let identity = provision_platform(&root, platform_id);
        Ok(Self { root, identity })
    }

    /// Self-signed root certificate, as JSON.
    fn root_certificate(&self) -> String {
        serde_json::to_string(&self.root.certificate()).expect("serializable")
    }

    #[pyo3(signature = (dataset, conditional = false))]
    fn attest_distribution(&self, dataset: &Dataset, conditional: bool) -> PyResult<Envelope> {
        let kind = if conditional { DistributionKind::Conditional } else { DistributionKind::Marginal };
        Ok(Envelope(self.prover().attest_distribution(&dataset.0, kind).map_err(err)?))
    }

    /// Returns `(model, envelope)`.
    fn attest_training(&self, dataset: &Dataset, config: &TrainingConfig) -> PyResult<(Model, Envelope)> {
        let (m, e) = self.prover().attest_training(&dataset.0, &config.0).map_err(err)?;
        Ok((Model(m), Envelope(e)))
    }

    fn attest_accuracy(&self, model: &Model, dataset: &Dataset) -> PyResult<Envelope> {
        Ok(Envelope(self.prover().attest_accuracy(&model.0, &dataset.0).map_err(err)?))
    }

    fn attest_fairness(&self, model: &Model, dataset: &Dataset) -> PyResult<Envelope> {
        Ok(Envelope(self.prover().attest_fairness(&model.0, &dataset.0).map_err(err)?))
    }

    /// Returns `(robust_dataset, generation_envelope, accuracy_envelope)`.
    fn attest_robustness(&self, model: &Model, dataset: &Dataset, eps: &str) -> PyResult<(Dataset, Envelope, Envelope)> {
        let eps = Decimal6::parse_any(eps).map_err(err)?;
        let r = self.prover().attest_robustness(&model.0, &dataset.0, eps).map_err(err)?;
        Ok((Dataset(r.robust_dataset), Envelope(r.robgen), Envelope(r.robacc)))
    }

    /// Returns `(output, envelope)` where output is a dict.
    fn attest_inference<'py>(
        &self,
        py: Python<'py>,
        model: &Model,
        features: Vec<String>,
    ) -> PyResult<(Bound<'py, PyAny>, Envelope)> {
        let x = decimals(&features)?;
        let (rec, e) = self.prover().attest_inference(&model.0, &x).map_err(err)?;
        Ok((loads(py, rec.output_canonical().as_str())?, Envelope(e)))
    }
}

impl Platform {
    fn prover(&self) -> Prover<PlatformIdentity> {
        Prover::new(self.identity.clone())
    }
}

#[pyclass(frozen, module = "lam")]
struct Endorser(EndorserKey);

#[pymethods]
impl Endorser {
    #[new]
    fn new(endorser_id: &str, seed: &str) -> PyResult<Self> {
        Ok(Self(EndorserKey::derive(endorser_id, seed.as_bytes()).map_err(err)?))
    }

    /// Self-signed endorser record, as JSON.
    fn record(&self) -> String {
        serde_json::to_string(&self.0.record()).expect("serializable")
    }

    /// Certifications as a JSON list. Without a template, one default
    /// template per attestation type the measurer emits.
    #[pyo3(signature = (measurer_name, template = None))]
    fn certify_measurer(&self, measurer_name: &str, template: Option<&str>) -> PyResult<String> {
        let k = measurer(measurer_name)?;
        let templates = match template {
            Some(t) => vec![parse_json(t)?],
            None => k.att_types().iter().map(|t| default_template(*t)).collect(),
        };
        let certs: Vec<Certification> = templates
            .into_iter()
            .map(|t| self.0.certify(k.measurement(), t))
            .collect::<Result<_, _>>()
            .map_err(err)?;
        Ok(CertStore::new(certs).to_json())
    }

    /// External certificate naming a dataset or model digest, as JSON.
    #[pyo3(signature = (subject_kind, subject_sha256, name, claims = "{}"))]
    fn certify_subject(&self, subject_kind: &str, subject_sha256: &str, name: &str, claims: &str) -> PyResult<String> {
        let kind = match subject_kind {
            "dataset" => SubjectKind::Dataset,
            "model" => SubjectKind::Model,
            other => return Err(err(format!("subject kind must be dataset or model, got {other:?}"))),
        };
        let c = self.0.certify_subject(digest(subject_sha256)?, kind, name, parse_json(claims)?).map_err(err)?;
        Ok(serde_json::to_string(&c).expect("serializable"))
    }
}

/// Result of verifying a bundle.
#[pyclass(frozen, module = "lam")]
struct Outcome {
    #[pyo3(get)]
    all_verified: bool,
    #[pyo3(get)]
    all_green: bool,
    report: String,
    cards: Vec<(String, String)>,
    conflict: Option<String>,
}

#[pymethods]
impl Outcome {
    /// Verdicts and chains as a dict.
    fn report<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        loads(py, &self.report)
    }

    /// `(file_name, yaml)` pairs; raises if two sources disagree on a claim.
    fn cards(&self) -> PyResult<Vec<(String, String)>> {
        match &self.conflict {
            Some(c) => Err(err(c)),
            None => Ok(self.cards.clone()),
        }
    }
}

#[pyclass(frozen, module = "lam")]
struct Verifier(CoreVerifier);

#[pymethods]
impl Verifier {
    /// `roots` and `endorsers` are JSON records; `certifications` are JSON
    /// lists as produced by `Endorser.certify_measurer`.
    #[new]
    fn new(roots: Vec<String>, endorsers: Vec<String>, certifications: Vec<String>) -> PyResult<Self> {
        let mut anchors = TrustAnchors::default();
        for r in &roots {
            anchors.add_root(serde_json::from_str(r).map_err(err)?);
        }
        for e in &endorsers {
            anchors.add_endorser(serde_json::from_str(e).map_err(err)?);
        }
        anchors.check().map_err(err)?;
        let mut all = Vec::new();
        for c in &certifications {
            all.extend(CertStore::from_json(c.as_bytes()).map_err(err)?.all().cloned());
        }
        Ok(Self(CoreVerifier::new(&anchors, CertStore::new(all))))
    }

    #[pyo3(signature = (envelopes, certificates = Vec::new()))]
    fn verify(&self, envelopes: Vec<Envelope>, certificates: Vec<String>) -> PyResult<Outcome> {
        let external_certificates = certificates
            .iter()
            .map(|c| serde_json::from_str::<ExternalCertificate>(c))
            .collect::<Result<_, _>>()
            .map_err(err)?;
        let bundle = AssertionBundle { envelopes: envelopes.into_iter().map(|e| e.0).collect(), external_certificates };
        Ok(outcome(self.0.verify_bundle(&bundle)))
    }

    /// Verifies a serialized bundle.
    fn verify_bundle(&self, bundle: &str) -> PyResult<Outcome> {
        let b = AssertionBundle::from_json(bundle.as_bytes()).map_err(err)?;
        Ok(outcome(self.0.verify_bundle(&b)))
    }
}

fn outcome(o: lam_core::verifier::VerificationOutcome) -> Outcome {
    let (cards, conflict) = match &o.cards {
        Ok(cs) => (cs.iter().map(|c| (c.file_name(), c.to_yaml())).collect(), None),
        Err(c) => (Vec::new(), Some(c.to_string())),
    };
    Outcome {
        all_verified: o.all_verified(),
        all_green: o.chains.all_green,
        report: o.report().as_str().to_string(),
        cards,
        conflict,
    }
}

#[pymodule]
fn lam(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("LamError", m.py().get_type::<LamError>())?;
    m.add_function(wrap_pyfunction!(sha256, m)?)?;
    m.add_function(wrap_pyfunction!(canonical_json, m)?)?;
    m.add_function(wrap_pyfunction!(measurement, m)?)?;
    m.add_function(wrap_pyfunction!(template_mismatch, m)?)?;
    m.add_function(wrap_pyfunction!(template_for, m)?)?;
    m.add_class::<Dataset>()?;
    m.add_class::<TrainingConfig>()?;
    m.add_class::<Model>()?;
    m.add_class::<Envelope>()?;
    m.add_class::<Platform>()?;
    m.add_class::<Endorser>()?;
    m.add_class::<Outcome>()?;
    m.add_class::<Verifier>()?;
    Ok(())
}
