//! The attestation producers. Each measurer runs in its own simulated
//! enclave (dataset, training, metric, inference), computes a property with
//! [`crate::ml`], emits a property-card fragment as canonical JSON and gets
//! a quote whose report data is the fragment digest.
//!
//! An enclave's measurement covers its own source file, the shared library
//! sources it runs on, and its config, so each measurer has a distinct
//! identity that certifications can key on.

mod dataset;
mod envelope;
mod fragment;
mod inference;
mod input;
mod metric;
mod training;

use std::sync::OnceLock;

pub use envelope::{AttestationEnvelope, EnvelopeError, ENVELOPE_VERSION};
pub use fragment::{AttType, Digests, Fragment, FragmentError, MetricClaim, TASK_TYPE};
pub use input::{parse_features, InputReader};

use serde_json::json;

use crate::backend::{measure_enclave, AttestationBackend, EnclaveMeasurement, SIG_ALG_ED25519};
use crate::hashcore::{canonicalize, CanonicalJson, Decimal6, HashError, TrustedManifest};
use crate::ml::{Dataset, DistributionKind, InferenceRecord, MlError, Model, TrainingConfig};

#[derive(Debug, thiserror::Error)]
pub enum MeasureError {
    #[error(transparent)]
    Ml(#[from] MlError),
    #[error(transparent)]
    Input(#[from] HashError),
    #[error("{0}: not covered by the input manifest")]
    ManifestMiss(String),
    #[error(transparent)]
    Fragment(#[from] FragmentError),
}

/// The four enclave programs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum MeasurerKind {
    Dataset,
    Training,
    Metric,
    Inference,
}

const RUNTIME_FILES: &[(&str, &[u8])] = &[
    ("hashcore/canonical.rs", include_bytes!("../hashcore/canonical.rs")),
    ("hashcore/decimal.rs", include_bytes!("../hashcore/decimal.rs")),
    ("hashcore/digest.rs", include_bytes!("../hashcore/digest.rs")),
    ("hashcore/manifest.rs", include_bytes!("../hashcore/manifest.rs")),
    ("measurers/envelope.rs", include_bytes!("envelope.rs")),
    ("measurers/fragment.rs", include_bytes!("fragment.rs")),
    ("measurers/input.rs", include_bytes!("input.rs")),
    ("ml/config.rs", include_bytes!("../ml/config.rs")),
    ("ml/dataset.rs", include_bytes!("../ml/dataset.rs")),
    ("ml/fgsm.rs", include_bytes!("../ml/fgsm.rs")),
    ("ml/metrics.rs", include_bytes!("../ml/metrics.rs")),
    ("ml/model.rs", include_bytes!("../ml/model.rs")),
    ("ml/rng.rs", include_bytes!("../ml/rng.rs")),
    ("ml/train.rs", include_bytes!("../ml/train.rs")),
];

impl MeasurerKind {
    pub const ALL: [MeasurerKind; 4] =
        [MeasurerKind::Dataset, MeasurerKind::Training, MeasurerKind::Metric, MeasurerKind::Inference];

    pub fn name(self) -> &'static str {
        match self {
            MeasurerKind::Dataset => "dataset",
            MeasurerKind::Training => "training",
            MeasurerKind::Metric => "metric",
            MeasurerKind::Inference => "inference",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.name() == s)
    }

    pub fn code(self) -> &'static [u8] {
        match self {
            MeasurerKind::Dataset => include_bytes!("dataset.rs"),
            MeasurerKind::Training => include_bytes!("training.rs"),
            MeasurerKind::Metric => include_bytes!("metric.rs"),
            MeasurerKind::Inference => include_bytes!("inference.rs"),
        }
    }

    /// Attestation types this enclave emits.
    pub fn att_types(self) -> &'static [AttType] {
        match self {
            MeasurerKind::Dataset => &[AttType::DistAtt],
            MeasurerKind::Training => &[AttType::PoT],
            MeasurerKind::Metric => &[AttType::AccAtt, AttType::FairAtt, AttType::RobustAttA, AttType::RobustAttB],
            MeasurerKind::Inference => &[AttType::IOAtt],
        }
    }

    pub fn trusted_manifest() -> &'static TrustedManifest {
        static M: OnceLock<TrustedManifest> = OnceLock::new();
        M.get_or_init(|| TrustedManifest::from_contents(RUNTIME_FILES.iter().copied()).expect("unique paths"))
    }

    pub fn config(self) -> CanonicalJson {
        canonicalize(&json!({
            "debug": false,
            "measurer": self.name(),
            "sig_alg": SIG_ALG_ED25519,
            "version": 1,
        }))
        .expect("no floats")
    }

    pub fn measurement(self) -> EnclaveMeasurement {
        static CACHE: OnceLock<[EnclaveMeasurement; 4]> = OnceLock::new();
        let all = CACHE.get_or_init(|| {
            MeasurerKind::ALL.map(|k| measure_enclave(k.code(), Self::trusted_manifest(), &k.config()))
        });
        all[self as usize]
    }
}

/// A simulated enclave instance of one measurer on one platform.
pub struct Enclave<'b, B: AttestationBackend + ?Sized> {
    kind: MeasurerKind,
    backend: &'b B,
}

impl<'b, B: AttestationBackend + ?Sized> Enclave<'b, B> {
    pub fn new(kind: MeasurerKind, backend: &'b B) -> Self {
        Self { kind, backend }
    }

    pub fn kind(&self) -> MeasurerKind {
        self.kind
    }

    /// Serializes `fragment` canonically and quotes its digest.
    pub fn seal(&self, fragment: &Fragment) -> Result<AttestationEnvelope, MeasureError> {
        fragment.validate_schema()?;
        let payload = fragment.to_canonical()?;
        let quote = self.backend.issue_quote(self.kind.measurement(), payload.digest());
        Ok(AttestationEnvelope { payload: payload.into_bytes(), quote })
    }
}

/// Outputs of the two-step robustness attestation.
#[derive(Debug, Clone)]
pub struct RobustnessAttestation {
    pub robust_dataset: Dataset,
    /// `RobustAtt-A`: binds the source set, the generated set and epsilon.
    pub robgen: AttestationEnvelope,
    /// `RobustAtt-B`: binds the model, the generated set and robust accuracy.
    pub robacc: AttestationEnvelope,
}

/// Prover-side entry points. Every method computes its property inside the
/// matching enclave and returns the sealed envelope(s); nothing is quoted
/// when the computation fails.
pub struct Prover<B> {
    backend: B,
}

impl<B: AttestationBackend> Prover<B> {
    pub fn new(backend: B) -> Self {
        Self { backend }
    }

    pub fn backend(&self) -> &B {
        &self.backend
    }

    pub fn enclave(&self, kind: MeasurerKind) -> Enclave<'_, B> {
        Enclave::new(kind, &self.backend)
    }

    pub fn attest_distribution(&self, d: &Dataset, kind: DistributionKind) -> Result<AttestationEnvelope, MeasureError> {
        let fragment = dataset::measure(d, kind)?;
        self.enclave(MeasurerKind::Dataset).seal(&fragment)
    }

    pub fn attest_training(&self, d: &Dataset, cfg: &TrainingConfig) -> Result<(Model, AttestationEnvelope), MeasureError> {
        let (model, fragment) = training::measure(d, cfg)?;
        Ok((model, self.enclave(MeasurerKind::Training).seal(&fragment)?))
    }

    pub fn attest_accuracy(&self, m: &Model, d_te: &Dataset) -> Result<AttestationEnvelope, MeasureError> {
        let fragment = metric::accuracy(m, d_te)?;
        self.enclave(MeasurerKind::Metric).seal(&fragment)
    }

    pub fn attest_fairness(&self, m: &Model, d_te: &Dataset) -> Result<AttestationEnvelope, MeasureError> {
        let fragment = metric::fairness(m, d_te)?;
        self.enclave(MeasurerKind::Metric).seal(&fragment)
    }

    pub fn attest_robustness(&self, m: &Model, d_te: &Dataset, eps: Decimal6) -> Result<RobustnessAttestation, MeasureError> {
        let (robust_dataset, gen, acc) = metric::robustness(m, d_te, eps)?;
        let enclave = self.enclave(MeasurerKind::Metric);
        Ok(RobustnessAttestation { robust_dataset, robgen: enclave.seal(&gen)?, robacc: enclave.seal(&acc)? })
    }

    pub fn attest_inference(&self, m: &Model, input: &[Decimal6]) -> Result<(InferenceRecord, AttestationEnvelope), MeasureError> {
        let (record, fragment) = inference::measure(m, input)?;
        Ok((record, self.enclave(MeasurerKind::Inference).seal(&fragment)?))
    }
}


#[cfg(test)]
mod behaviour {
    use std::cell::Cell;

    use super::*;
    use crate::backend::{verify_quote, PlatformIdentity, Quote};
    use crate::fixtures;
    use crate::hashcore::{hash_bytes, Digest};
    use crate::ml::Row;
    use proptest::prelude::*;

    /// Counts the quotes it hands out.
    struct Counting {
        inner: PlatformIdentity,
        issued: Cell<usize>,
    }

    impl AttestationBackend for Counting {
        fn issue_quote(&self, m: EnclaveMeasurement, rd: Digest) -> Quote {
            self.issued.set(self.issued.get() + 1);
            self.inner.issue_quote(m, rd)
        }
    }

    fn prover() -> (Prover<Counting>, Vec<crate::backend::PublicKey>) {
        let (root, p) = fixtures::platform();
        (Prover::new(Counting { inner: p, issued: Cell::new(0) }), vec![root.public()])
    }

    fn fragment(e: &AttestationEnvelope) -> Fragment {
        Fragment::from_payload(&e.payload).unwrap()
    }

    fn check(e: &AttestationEnvelope, roots: &[crate::backend::PublicKey], kind: MeasurerKind) {
        assert_eq!(hash_bytes(&e.payload), e.quote.report_data);
        let q = verify_quote(&e.quote, roots).unwrap();
        assert_eq!(q.measurement, kind.measurement());
        fragment(e).validate_schema().unwrap();
    }

    #[test]
    fn distribution_fixture() {
        let (p, roots) = prover();
        let d = fixtures::six_row_distribution_set();
        let e = p.attest_distribution(&d, DistributionKind::Marginal).unwrap();
        check(&e, &roots, MeasurerKind::Dataset);
        let f = fragment(&e);
        assert_eq!(f.digests.dataset_sha256, Some(d.digest()));
        let groups = &f.results["distribution"]["groups"];
        assert_eq!(groups[0]["count"], 3);
        assert_eq!(groups[1]["count"], 3);
        assert_eq!(groups[0]["ratio"], "0.500000");

        let text = String::from_utf8(e.payload.clone()).unwrap();
        let tampered = text.replacen("0.500000", "0.600000", 1).into_bytes();
        assert_ne!(hash_bytes(&tampered), e.quote.report_data);

        let c = p.attest_distribution(&d, DistributionKind::Conditional).unwrap();
        assert_ne!(c.payload, e.payload);
        assert_ne!(c.quote.report_data, e.quote.report_data);
    }

    #[test]
    fn failures_issue_no_quote() {
        let (p, _) = prover();
        let empty = fixtures::six_row_test_set().with_rows(vec![]).unwrap();
        assert!(p.attest_distribution(&empty, DistributionKind::Marginal).is_err());
        assert!(p.attest_accuracy(&fixtures::sign_model(), &empty).is_err());
        let one_group = fixtures::six_row_test_set()
            .with_rows(vec![Row { features: vec![Decimal6::ONE, Decimal6::ZERO], label: 0, sensitive: 0 }])
            .unwrap();
        assert!(p.attest_fairness(&fixtures::sign_model(), &one_group).is_err());
        assert!(p.attest_inference(&fixtures::sign_model(), &[Decimal6::ONE]).is_err());
        let neg = Decimal6::parse_any("-0.1").unwrap();
        assert!(p.attest_robustness(&fixtures::sign_model(), &fixtures::six_row_test_set(), neg).is_err());
        assert_eq!(p.backend().issued.get(), 0);
    }

    #[test]
    fn training_binds_its_inputs() {
        let (p, roots) = prover();
        let d = fixtures::training_set();
        let mut cfg = fixtures::training_config();
        cfg.epochs = 5;
        let (m, e) = p.attest_training(&d, &cfg).unwrap();
        check(&e, &roots, MeasurerKind::Training);
        let f = fragment(&e);
        assert_eq!(f.digests.model_sha256, Some(m.digest()));
        assert_eq!(f.digests.arch_sha256, Some(cfg.architecture.digest()));
        assert_eq!(f.digests.config_sha256, Some(cfg.digest()));
        assert_eq!(f.results["training"], cfg.to_canonical().to_value());
        let (m2, e2) = p.attest_training(&d, &cfg).unwrap();
        assert_eq!(m2.to_canonical(), m.to_canonical());
        assert_eq!(e2.payload, e.payload);

        let mut rows = d.rows().to_vec();
        rows[0].label ^= 1;
        let (_, e3) = p.attest_training(&d.with_rows(rows).unwrap(), &cfg).unwrap();
        assert_ne!(fragment(&e3).digests.dataset_sha256, f.digests.dataset_sha256);
    }

    #[test]
    fn metric_fixtures() {
        let (p, roots) = prover();
        let d = fixtures::six_row_test_set();
        let acc = p.attest_accuracy(&fixtures::sign_model(), &d).unwrap();
        check(&acc, &roots, MeasurerKind::Metric);
        let mc = fragment(&acc).metric().unwrap();
        assert_eq!((mc.metric.as_str(), mc.value.to_string().as_str()), ("accuracy", "0.666667"));
        assert_eq!((mc.numerator, mc.denominator), (4, 6));

        let fair = p.attest_fairness(&fixtures::sign_model(), &d).unwrap();
        check(&fair, &roots, MeasurerKind::Metric);
        assert_eq!(fragment(&fair).metric().unwrap().value.to_string(), "0.333333");
        let flat = p.attest_fairness(&fixtures::constant_model(), &d).unwrap();
        assert_eq!(fragment(&flat).metric().unwrap().value.to_string(), "0.000000");

        let rob = p.attest_robustness(&fixtures::sign_model(), &d, Decimal6::ZERO).unwrap();
        check(&rob.robgen, &roots, MeasurerKind::Metric);
        check(&rob.robacc, &roots, MeasurerKind::Metric);
        let (a, b) = (fragment(&rob.robgen), fragment(&rob.robacc));
        assert_eq!(a.digests.robust_dataset_sha256, b.digests.robust_dataset_sha256);
        assert_eq!(a.digests.robust_dataset_sha256, Some(rob.robust_dataset.digest()));
        assert_eq!(a.digests.dataset_sha256, Some(d.digest()));
        assert_eq!(a.epsilon(), Some(Decimal6::ZERO));
        assert_eq!(b.metric().unwrap().value, mc.value);
    }

    #[test]
    fn inference_round_trip() {
        let (p, roots) = prover();
        let x = [Decimal6::parse_any("0.5").unwrap(), Decimal6::ZERO];
        let (rec, e) = p.attest_inference(&fixtures::sign_model(), &x).unwrap();
        check(&e, &roots, MeasurerKind::Inference);
        let f = fragment(&e);
        assert_eq!(f.digests.output_sha256, Some(rec.output_digest()));
        assert_eq!(f.digests.input_sha256, Some(InferenceRecord::input_canonical(&x).digest()));
        assert_eq!(rec.predicted, 1);
        let (_, e2) = p.attest_inference(&fixtures::sign_model(), &x).unwrap();
        assert_eq!(e2.payload, e.payload);

        let mut forged = f.clone();
        forged.results["output"]["predicted"] = serde_json::json!(0);
        assert!(forged.validate_schema().is_err());
        assert_ne!(forged.digest().unwrap(), e.quote.report_data);
    }

    #[test]
    fn envelope_wire_round_trip() {
        let (p, _) = prover();
        let e = p.attest_accuracy(&fixtures::sign_model(), &fixtures::six_row_test_set()).unwrap();
        let wire = e.to_canonical();
        let v = wire.to_value();
        assert_eq!(v["version"], 1);
        assert!(v["payload_b64"].is_string());
        assert_eq!(AttestationEnvelope::from_json(wire.as_bytes()).unwrap(), e);
        let mut bad = v.clone();
        bad["version"] = serde_json::json!(2);
        assert!(matches!(AttestationEnvelope::from_value(bad), Err(EnvelopeError::Version(2))));
    }

    #[test]
    fn manifest_gates_inputs() {
        let dir = tempfile::tempdir().unwrap();
        let csv = fixtures::six_row_test_set().to_csv();
        std::fs::write(dir.path().join("test.csv"), &csv).unwrap();
        let manifest = crate::hashcore::build_manifest(dir.path()).unwrap();
        let reader = InputReader::with_manifest(manifest, dir.path());
        assert_eq!(reader.dataset(dir.path().join("test.csv")).unwrap(), fixtures::six_row_test_set());

        std::fs::write(dir.path().join("test.csv"), csv.replace("-2", "-3")).unwrap();
        assert!(matches!(reader.dataset(dir.path().join("test.csv")), Err(MeasureError::ManifestMiss(_))));
        std::fs::write(dir.path().join("other.csv"), &csv).unwrap();
        assert!(matches!(reader.read(dir.path().join("other.csv")), Err(MeasureError::ManifestMiss(_))));
        assert!(InputReader::unchecked().read(dir.path().join("other.csv")).is_ok());
        assert!(matches!(InputReader::unchecked().read(dir.path()), Err(MeasureError::Input(_))));
    }

    #[test]
    fn feature_files() {
        let f = parse_features(br#"{"features":["0.5",-2]}"#).unwrap();
        assert_eq!(f, vec![Decimal6::parse_any("0.5").unwrap(), Decimal6::parse_any("-2").unwrap()]);
        assert!(parse_features(br#"{"features":[0.5]}"#).is_err());
        assert!(parse_features(br#"{"features":[],"x":1}"#).is_err());
        assert!(parse_features(br#"[1]"#).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn schemas_are_exclusive(xs in proptest::collection::vec((-30i64..30, 0u32..2, 0u32..2), 2..12)) {
            let mut rows: Vec<Row> = xs.iter().map(|&(x, z, y)| Row {
                features: vec![Decimal6::from_ratio(x as i128, 10).unwrap(), Decimal6::ONE],
                label: y,
                sensitive: z,
            }).collect();
            rows[0].sensitive = 0;
            rows[1].sensitive = 1;
            let d = fixtures::six_row_test_set().with_rows(rows).unwrap();
            let (p, _) = prover();
            let m = fixtures::sign_model();
            let mut es = vec![
                p.attest_distribution(&d, DistributionKind::Marginal).unwrap(),
                p.attest_distribution(&d, DistributionKind::Conditional).unwrap(),
                p.attest_accuracy(&m, &d).unwrap(),
                p.attest_fairness(&m, &d).unwrap(),
                p.attest_inference(&m, &d.rows()[0].features).unwrap().1,
            ];
            let rob = p.attest_robustness(&m, &d, Decimal6::from_ratio(1, 10).unwrap()).unwrap();
            es.push(rob.robgen);
            es.push(rob.robacc);
            for e in &es {
                let f = fragment(e);
                for t in AttType::ALL {
                    prop_assert_eq!(f.validate_as(t).is_ok(), t == f.att_type);
                }
                // same fields under another label never validate either
                for t in AttType::ALL {
                    let mut g = f.clone();
                    g.att_type = t;
                    if t != f.att_type && t.digest_fields() != f.att_type.digest_fields() {
                        prop_assert!(g.validate_schema().is_err());
                    }
                }
            }
        }
    }
}
