use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use lam_core::fixtures;
use lam_core::hashcore::Decimal6;
use lam_core::measurers::{AttestationEnvelope, Fragment, Prover};
use lam_core::verifier::AssertionBundle;
use serde_json::Value;

fn lam(ws: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lam")).arg("-C").arg(ws).args(args).output().expect("spawn lam")
}

#[track_caller]
fn ok(ws: &Path, args: &[&str]) -> String {
    let o = lam(ws, args);
    assert!(
        o.status.success(),
        "lam {args:?} failed: {}\n{}",
        String::from_utf8_lossy(&o.stdout),
        String::from_utf8_lossy(&o.stderr)
    );
    String::from_utf8(o.stdout).unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn files(dir: &Path, prefix: &str) -> Vec<PathBuf> {
    let mut v: Vec<PathBuf> = fs::read_dir(dir)
        .map(|r| r.flatten().map(|e| e.path()).collect())
        .unwrap_or_default();
    v.retain(|p| p.file_name().unwrap().to_str().unwrap().starts_with(prefix));
    v.sort();
    v
}

fn one(dir: &Path, prefix: &str) -> PathBuf {
    let v = files(dir, prefix);
    assert_eq!(v.len(), 1, "expected one {prefix}* in {}: {v:?}", dir.display());
    v[0].clone()
}

struct Ws {
    _dir: tempfile::TempDir,
    root: PathBuf,
}

impl Ws {
    fn path(&self, rel: &str) -> String {
        self.root.join(rel).to_str().unwrap().to_string()
    }
}

fn workspace() -> Ws {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path().to_path_buf();
    let data = root.join("data");
    fs::create_dir_all(&data).unwrap();
    fs::write(data.join("train.csv"), fixtures::training_set().to_csv()).unwrap();
    fs::write(data.join("test.csv"), fixtures::six_row_test_set().to_csv()).unwrap();
    fs::write(data.join("config.json"), fixtures::training_config().to_canonical().as_bytes()).unwrap();
    fs::write(data.join("input.json"), r#"{"features": ["-2", 0]}"#).unwrap();
    Ws { _dir: dir, root }
}

fn keys(ws: &Ws) {
    ok(&ws.root, &["keygen", "root", "--seed", "root-seed"]);
    ok(&ws.root, &["keygen", "platform", "--id", "lab-1"]);
    ok(&ws.root, &["keygen", "endorser", "--id", "acme", "--seed", "endorser-seed"]);
}

/// Keys, every attestation, certifications for all four measurers and a
/// certificate for the training set only.
fn pipeline(ws: &Ws) -> PathBuf {
    keys(ws);
    let (train, test, cfg, input) =
        (ws.path("data/train.csv"), ws.path("data/test.csv"), ws.path("data/config.json"), ws.path("data/input.json"));
    ok(&ws.root, &["attest", "dist", "--data", &train]);
    let out = ok(&ws.root, &["attest", "train", "--data", &train, "--config", &cfg]);
    assert!(out.contains("model "), "{out}");
    let model = one(&ws.root.join("artifacts"), "model-");
    let model = model.to_str().unwrap();
    ok(&ws.root, &["attest", "accuracy", "--model", model, "--data", &test]);
    ok(&ws.root, &["attest", "fairness", "--model", model, "--data", &test]);
    ok(&ws.root, &["attest", "robustness", "--model", model, "--data", &test, "--eps", "0.100000"]);
    ok(&ws.root, &["attest", "inference", "--model", model, "--input", &input]);
    for m in ["dataset", "training", "metric", "inference"] {
        ok(&ws.root, &["endorse", "enclave", "--measurer", m]);
    }
    ok(&ws.root, &["endorse", "dataset", &train, "--name", "SEPARABLE-TRAIN", "--claims", r#"{"rows": 200}"#]);
    ok(&ws.root, &["anchors"]);
    ok(&ws.root, &["bundle", "--out", &ws.path("bundle.json")]);
    ws.root.join("bundle.json")
}

#[test]
fn end_to_end_fixture() {
    let ws = workspace();
    let bundle = pipeline(&ws);
    let b = AssertionBundle::from_json(&fs::read(&bundle).unwrap()).unwrap();
    assert_eq!((b.envelopes.len(), b.external_certificates.len()), (7, 1));

    let o = lam(&ws.root, &["verify", bundle.to_str().unwrap()]);
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert_eq!(code(&o), 0, "{stdout}\n{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(stdout.matches(" verified ").count(), 8, "{stdout}");

    let cards = ws.root.join("cards");
    let model_card = fs::read_to_string(one(&cards, "model-")).unwrap();
    let datasheet = fs::read_to_string(one(&cards, "dataset-")).unwrap();
    one(&cards, "inference-");
    assert!(model_card.contains("accuracy") && model_card.contains("verified: true"), "{model_card}");
    assert!(datasheet.contains("SEPARABLE-TRAIN"), "{datasheet}");

    let report: Value = serde_json::from_slice(&fs::read(cards.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["all_verified"], true);
    // the test set carries no certificate, so only those edges are open
    let broken: Vec<&str> = report["chains"]["links"]
        .as_array()
        .unwrap()
        .iter()
        .filter(|l| l["green"] == false)
        .map(|l| l["relation"].as_str().unwrap())
        .collect();
    assert_eq!(broken, ["test-certificate", "test-certificate"]);

    // re-verifying refreshes the derived outputs
    assert_eq!(code(&lam(&ws.root, &["verify", bundle.to_str().unwrap()])), 0);
}

#[test]
fn cli_matches_library_flows() {
    let ws = workspace();
    keys(&ws);
    let (train, test) = (ws.path("data/train.csv"), ws.path("data/test.csv"));
    ok(&ws.root, &["attest", "train", "--data", &train, "--config", &ws.path("data/config.json")]);
    let model = one(&ws.root.join("artifacts"), "model-");
    ok(&ws.root, &["attest", "robustness", "--model", model.to_str().unwrap(), "--data", &test, "--eps", "0.100000"]);

    let read_env = |prefix: &str| {
        AttestationEnvelope::from_json(&fs::read(one(&ws.root.join("attestations"), prefix)).unwrap()).unwrap()
    };
    let (root, _) = fixtures::platform();
    let prover = Prover::new(lam_core::backend::provision_platform(&root, "elsewhere"));
    let (m, pot) = prover.attest_training(&fixtures::training_set(), &fixtures::training_config()).unwrap();
    assert_eq!(read_env("pot-").payload, pot.payload);
    assert_eq!(fs::read(&model).unwrap(), m.to_canonical().into_bytes());

    let rob = prover.attest_robustness(&m, &fixtures::six_row_test_set(), Decimal6::from_micros(100_000)).unwrap();
    let (gen, acc) = (read_env("robgen-"), read_env("robacc-"));
    assert_eq!(gen.payload, rob.robgen.payload);
    assert_eq!(acc.payload, rob.robacc.payload);
    let r1 = Fragment::from_payload(&gen.payload).unwrap().digests.robust_dataset_sha256;
    let r2 = Fragment::from_payload(&acc.payload).unwrap().digests.robust_dataset_sha256;
    assert_eq!(r1, r2);
    let csv = one(&ws.root.join("artifacts"), "robust-");
    assert_eq!(fs::read(csv).unwrap(), rob.robust_dataset.to_csv().into_bytes());
}

#[test]
fn keygen_rules() {
    let ws = workspace();
    let o = lam(&ws.root, &["keygen", "platform"]);
    assert_eq!(code(&o), 2, "platform before root");

    ok(&ws.root, &["keygen", "root", "--seed", "s"]);
    let first = fs::read(ws.root.join("keys/root.cert.json")).unwrap();
    let o = lam(&ws.root, &["keygen", "root", "--seed", "other"]);
    assert_eq!(code(&o), 2, "overwrite without --force");
    assert_eq!(fs::read(ws.root.join("keys/root.cert.json")).unwrap(), first);
    ok(&ws.root, &["--force", "keygen", "root", "--seed", "s"]);
    assert_eq!(fs::read(ws.root.join("keys/root.cert.json")).unwrap(), first);

    ok(&ws.root, &["keygen", "endorser", "--id", "e1"]);
    ok(&ws.root, &["endorse", "enclave", "--measurer", "metric", "--att-type", "AccAtt"]);
}

#[test]
fn envelopes_are_not_overwritten() {
    let ws = workspace();
    keys(&ws);
    let data = ws.path("data/train.csv");
    ok(&ws.root, &["attest", "dist", "--data", &data]);
    let env = one(&ws.root.join("attestations"), "dist-");
    let before = fs::read(&env).unwrap();
    ok(&ws.root, &["keygen", "--force", "platform", "--id", "lab-2"]);
    let o = lam(&ws.root, &["attest", "dist", "--data", &data]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("--force"));
    assert_eq!(fs::read(&env).unwrap(), before);
    ok(&ws.root, &["attest", "--force", "dist", "--data", &data]);
    assert_ne!(fs::read(&env).unwrap(), before, "new platform, new quote");
}

#[test]
fn empty_dataset_is_a_domain_error() {
    let ws = workspace();
    keys(&ws);
    fs::write(ws.root.join("data/empty.csv"), "f1,f2,label,sensitive\n").unwrap();
    fs::write(ws.root.join("data/nothing.csv"), "").unwrap();
    for f in ["data/empty.csv", "data/nothing.csv"] {
        let o = lam(&ws.root, &["attest", "dist", "--data", &ws.path(f)]);
        assert_eq!(code(&o), 2, "{f}");
    }
    assert!(files(&ws.root.join("attestations"), "").is_empty());
}

#[test]
fn float_template_is_refused() {
    let ws = workspace();
    keys(&ws);
    fs::write(ws.root.join("t.json"), r#"{"att_type": "AccAtt", "value": 0.5}"#).unwrap();
    let o = lam(&ws.root, &["endorse", "enclave", "--measurer", "metric", "--template", &ws.path("t.json")]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("invalid-certification"));
    assert!(files(&ws.root.join("trust"), "certs-").is_empty());
}

#[test]
fn manifest_gates_inputs() {
    let ws = workspace();
    keys(&ws);
    ok(&ws.root, &["manifest", &ws.path("data"), "--out", &ws.path("inputs.json")]);
    let args = |data: &str| {
        vec![
            "attest".to_string(),
            "--manifest".into(),
            ws.path("inputs.json"),
            "--manifest-root".into(),
            ws.path("data"),
            "dist".into(),
            "--data".into(),
            data.to_string(),
        ]
    };
    let run = |data: &str| {
        let a = args(data);
        lam(&ws.root, &a.iter().map(String::as_str).collect::<Vec<_>>())
    };
    assert!(run(&ws.path("data/train.csv")).status.success());

    fs::write(ws.root.join("data/test.csv"), "f1,f2,label,sensitive\n1,1,1,1\n0,0,0,0\n").unwrap();
    let o = run(&ws.path("data/test.csv"));
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("test.csv"));
    assert_eq!(files(&ws.root.join("attestations"), "").len(), 1);
}

#[test]
fn tampered_and_unknown_envelopes() {
    let ws = workspace();
    let bundle = pipeline(&ws);
    let mut b = AssertionBundle::from_json(&fs::read(&bundle).unwrap()).unwrap();
    b.envelopes[2].payload.push(b'\n');
    fs::write(ws.root.join("tampered.json"), b.to_canonical().unwrap().as_bytes()).unwrap();
    let o = lam(&ws.root, &["verify", &ws.path("tampered.json"), "--out", &ws.path("out1")]);
    assert_eq!(code(&o), 1);
    let report: Value = serde_json::from_slice(&fs::read(ws.root.join("out1/report.json")).unwrap()).unwrap();
    let verdicts = report["verdicts"].as_array().unwrap();
    assert_eq!(verdicts.iter().filter(|v| v["verified"] == true).count(), 7);
    assert_eq!(verdicts[2]["reason"], "payload-binding-mismatch");

    // without the inference certification the IOAtt envelope is from an unknown enclave
    let certs: Vec<String> = files(&ws.root.join("trust"), "certs-")
        .into_iter()
        .filter(|p| {
            let v: Value = serde_json::from_slice(&fs::read(p).unwrap()).unwrap();
            v[0]["template"]["att_type"] != "IOAtt"
        })
        .map(|p| p.to_str().unwrap().to_string())
        .collect();
    assert_eq!(certs.len(), 3);
    let mut args = vec!["verify".to_string(), bundle.to_str().unwrap().into(), "--out".into(), ws.path("out2")];
    for c in &certs {
        args.extend(["--certs".to_string(), c.clone()]);
    }
    let o = lam(&ws.root, &args.iter().map(String::as_str).collect::<Vec<_>>());
    assert_eq!(code(&o), 1);
    let report: Value = serde_json::from_slice(&fs::read(ws.root.join("out2/report.json")).unwrap()).unwrap();
    let io: Vec<&Value> =
        report["verdicts"].as_array().unwrap().iter().filter(|v| v["verified"] == false).collect();
    assert_eq!(io.len(), 1);
    assert_eq!(io[0]["reason"], "unknown-enclave");
}

#[test]
fn usage_errors_exit_3() {
    let ws = workspace();
    assert_eq!(code(&lam(&ws.root, &["attest", "teleport"])), 3);
    assert_eq!(code(&lam(&ws.root, &["verify"])), 3);
    assert_eq!(code(&lam(&ws.root, &["--help"])), 0);
    keys(&ws);
    assert_eq!(code(&lam(&ws.root, &["endorse", "enclave", "--measurer", "nope"])), 3);
}

#[test]
fn measure_lists_distinct_identities() {
    let ws = workspace();
    let out = ok(&ws.root, &["measure"]);
    let ids: std::collections::BTreeSet<&str> = out.lines().map(|l| l.split_whitespace().nth(1).unwrap()).collect();
    assert_eq!(ids.len(), 4);
}
