//! Small deterministic inputs shared by tests, examples and the bindings.

use serde_json::json;

use crate::backend::{create_root, provision_platform, PlatformIdentity, RootKey};
use crate::hashcore::Decimal6;
use crate::measurers::{AttType, AttestationEnvelope, MeasurerKind, Prover};
use crate::ml::{synth, Activation, Architecture, Dataset, DistributionKind, InferenceRecord, Model, Optimizer, Row, TrainingConfig};
use crate::verifier::{
    default_template, AssertionBundle, CertStore, Certification, EndorserKey, ExternalCertificate, SubjectKind,
    TrustAnchors, Verifier,
};

fn dec(s: &str) -> Decimal6 {
    Decimal6::parse_any(s).expect("literal")
}

fn rows(x1: &[i64], groups: &[u32], labels: &[u32]) -> Dataset {
    let rows = x1
        .iter()
        .zip(groups)
        .zip(labels)
        .map(|((&x, &z), &y)| Row { features: vec![dec(&x.to_string()), Decimal6::ZERO], label: y, sensitive: z })
        .collect();
    Dataset::new(Dataset::default_schema(2), rows).expect("fixed arity")
}

/// Six rows, two features, groups `[0,0,0,1,1,1]`. A model that predicts
/// `x1 > 0` scores 4/6 accuracy and 1/3 demographic parity on it.
pub fn six_row_test_set() -> Dataset {
    rows(&[-2, -2, 2, -2, 2, 2], &[0, 0, 0, 1, 1, 1], &[0, 1, 1, 0, 1, 0])
}

/// Six rows with marginal group counts {0: 3, 1: 3}.
pub fn six_row_distribution_set() -> Dataset {
    rows(&[-2, -2, 2, -2, 2, 2], &[0, 0, 0, 1, 1, 1], &[0, 1, 1, 0, 1, 1])
}

/// 200 linearly separable rows.
pub fn training_set() -> Dataset {
    synth::separable(200, 11)
}

/// MLP [2, 4, 2], tanh, Adam, 50 epochs.
pub fn training_config() -> TrainingConfig {
    TrainingConfig {
        architecture: Architecture::mlp(2, &[4], 2, Activation::Tanh),
        epochs: 50,
        learning_rate: dec("0.05"),
        batch_size: 16,
        optimizer: Optimizer::Adam,
        rng_seed: 7,
    }
}

/// Single linear layer predicting class 1 iff `x1 > 0`.
pub fn sign_model() -> Model {
    let (z, one) = (Decimal6::ZERO, Decimal6::ONE);
    Model::new(
        Architecture { layers: vec![2, 2], activation: Activation::Tanh },
        vec![vec![vec![z, z], vec![one, z]]],
        vec![vec![z, z]],
    )
    .expect("fixed shape")
}

/// Always predicts class 0.
pub fn constant_model() -> Model {
    Model::zeros(Architecture { layers: vec![2, 2], activation: Activation::Tanh }).expect("fixed shape")
}

/// Simulated manufacturer root and one certified platform.
pub fn platform() -> (RootKey, PlatformIdentity) {
    let root = create_root(b"fixture-root").expect("non-empty seed");
    let p = provision_platform(&root, "fixture-platform");
    (root, p)
}

/// Endorser used by the fixtures.
pub fn endorser() -> EndorserKey {
    EndorserKey::derive("fixture-endorser", b"fixture-endorser-seed").expect("non-empty")
}

/// Certifies every measurer for each attestation type it emits, using the
/// default templates.
pub fn certify_all(endorser: &EndorserKey) -> Vec<Certification> {
    MeasurerKind::ALL
        .iter()
        .flat_map(|k| k.att_types().iter().map(move |t| (*k, *t)))
        .map(|(k, t)| endorser.certify(k.measurement(), default_template(t)).expect("default templates are valid"))
        .collect()
}

/// One run of every attestation over a training set, a test set and one
/// inference input, plus the trust material needed to verify it.
pub struct Pipeline {
    pub root: RootKey,
    pub platform: PlatformIdentity,
    pub endorser: EndorserKey,
    pub train: Dataset,
    pub test: Dataset,
    pub config: TrainingConfig,
    pub epsilon: Decimal6,
    pub model: Model,
    pub robust: Dataset,
    pub record: InferenceRecord,
    /// In order: DistAtt, PoT, AccAtt, FairAtt, RobustAtt-A, RobustAtt-B, IOAtt.
    pub envelopes: Vec<AttestationEnvelope>,
    pub externals: Vec<ExternalCertificate>,
}

impl Pipeline {
    pub fn run(train: Dataset, test: Dataset, config: TrainingConfig, epsilon: Decimal6, input: &[Decimal6]) -> Self {
        let (root, platform) = self::platform();
        let endorser = self::endorser();
        let prover = Prover::new(platform.clone());
        let dist = prover.attest_distribution(&train, DistributionKind::Marginal).expect("dist");
        let (model, pot) = prover.attest_training(&train, &config).expect("train");
        let acc = prover.attest_accuracy(&model, &test).expect("accuracy");
        let fair = prover.attest_fairness(&model, &test).expect("fairness");
        let rob = prover.attest_robustness(&model, &test, epsilon).expect("robustness");
        let (record, io) = prover.attest_inference(&model, input).expect("inference");
        let externals = vec![
            endorser
                .certify_subject(train.digest(), SubjectKind::Dataset, "SEPARABLE-TRAIN", json!({"rows": train.len()}))
                .expect("no floats"),
            endorser
                .certify_subject(test.digest(), SubjectKind::Dataset, "FIXTURE-TEST", json!({"rows": test.len()}))
                .expect("no floats"),
        ];
        Self {
            root,
            platform,
            endorser,
            train,
            test,
            config,
            epsilon,
            model,
            robust: rob.robust_dataset,
            record,
            envelopes: vec![dist, pot, acc, fair, rob.robgen, rob.robacc, io],
            externals,
        }
    }

    /// The 200-row training set, the six-row test set, epsilon 0.1 and the
    /// first test row as inference input.
    pub fn standard() -> Self {
        let test = six_row_test_set();
        let input = test.rows()[0].features.clone();
        Self::run(training_set(), test, training_config(), Decimal6::from_micros(100_000), &input)
    }

    pub fn envelope(&self, t: AttType) -> &AttestationEnvelope {
        let i = AttType::ALL.iter().position(|x| *x == t).expect("known type");
        &self.envelopes[i]
    }

    pub fn bundle(&self) -> AssertionBundle {
        AssertionBundle { envelopes: self.envelopes.clone(), external_certificates: self.externals.clone() }
    }

    pub fn anchors(&self) -> TrustAnchors {
        TrustAnchors { tee_roots: vec![self.root.certificate()], endorsers: vec![self.endorser.record()] }
    }

    pub fn certifications(&self) -> Vec<Certification> {
        certify_all(&self.endorser)
    }

    pub fn verifier(&self) -> Verifier {
        Verifier::new(&self.anchors(), CertStore::new(self.certifications()))
    }
}
