//! `lam`: prover, endorser and verifier front end.
//!
//! Exit codes: 0 success, 1 verification failure, 2 input or domain error,
//! 3 usage error.

use std::fmt::Display;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use lam_core::backend::{create_root, provision_platform, KeyPair, PlatformCertificate, PlatformIdentity, RootCertificate, RootKey};
use lam_core::hashcore::{build_manifest, canonical_bytes, canonicalize, Decimal6, Digest, TrustedManifest};
use lam_core::measurers::{AttType, AttestationEnvelope, Fragment, InputReader, MeasurerKind, Prover};
use lam_core::ml::{Dataset, DistributionKind, Model};
use lam_core::verifier::{
    default_template, AssertionBundle, CertStore, EndorserKey, EndorserRecord, ExternalCertificate, SubjectKind,
    TrustAnchors, Verifier,
};
use serde::{Deserialize, Serialize};
use serde_json::Value;

#[derive(Parser)]
#[command(name = "lam", version, about = "Attest ML artifacts in simulated enclaves and verify property cards")]
struct Cli {
    /// Workspace holding keys/, artifacts/, attestations/, trust/ and cards/.
    #[arg(short = 'C', long, global = true, default_value = ".")]
    workspace: PathBuf,
    /// Overwrite existing output files.
    #[arg(long, global = true)]
    force: bool,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Create a root, platform or endorser key.
    Keygen {
        #[command(subcommand)]
        role: Role,
    },
    /// Run a measurer and write its envelope(s).
    Attest(Attest),
    /// Sign an enclave certification or an external dataset/model certificate.
    Endorse {
        #[command(subcommand)]
        what: Endorse,
    },
    /// Collect root certificates and endorser records into a trust anchor file.
    Anchors {
        /// Root certificate files (default: keys/root.cert.json).
        #[arg(long)]
        root: Vec<PathBuf>,
        /// Endorser record files (default: every keys/endorser-*.json).
        #[arg(long)]
        endorser: Vec<PathBuf>,
        /// Output file (default: trust/anchors.json).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Concatenate envelopes and external certificates into a bundle.
    Bundle {
        /// Envelope, certificate or bundle files (default: every attestations/*.json).
        files: Vec<PathBuf>,
        /// Output file (default: bundle-<digest>.json in the workspace).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Verify a bundle, print verdicts and write cards plus a chain report.
    Verify {
        bundle: PathBuf,
        /// Certification store files (default: every trust/certs-*.json).
        #[arg(long)]
        certs: Vec<PathBuf>,
        /// Trust anchor file (default: trust/anchors.json).
        #[arg(long)]
        anchors: Option<PathBuf>,
        /// Output directory (default: cards/).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print each measurer's enclave measurement.
    Measure,
    /// Hash every file under a directory into a trusted input manifest.
    Manifest {
        dir: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Subcommand)]
enum Role {
    /// Manufacturer root of trust.
    Root {
        #[arg(long)]
        seed: Option<String>,
    },
    /// Platform attestation key, derived from the root key and the id.
    Platform {
        #[arg(long, default_value = "platform-0")]
        id: String,
    },
    /// Endorser signing key.
    Endorser {
        #[arg(long)]
        id: String,
        #[arg(long)]
        seed: Option<String>,
    },
}

#[derive(Args)]
struct Attest {
    /// Platform key file (default: keys/platform.key).
    #[arg(long, global = true)]
    platform: Option<PathBuf>,
    /// Trusted input manifest; inputs not listed abort the run.
    #[arg(long, global = true)]
    manifest: Option<PathBuf>,
    /// Directory manifest paths are relative to (default: the workspace).
    #[arg(long, global = true)]
    manifest_root: Option<PathBuf>,
    /// Envelope output directory (default: attestations/).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    kind: AttestKind,
}

#[derive(Subcommand)]
enum AttestKind {
    /// Sensitive-attribute distribution of a dataset.
    Dist {
        #[arg(long)]
        data: PathBuf,
        /// Group counts per label instead of overall.
        #[arg(long)]
        conditional: bool,
    },
    /// Train a model; writes the model file and a proof of training.
    Train {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        config: PathBuf,
    },
    /// Test accuracy.
    Accuracy {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
    },
    /// Demographic parity.
    Fairness {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
    },
    /// FGSM robust dataset plus robust accuracy; writes two envelopes.
    Robustness {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        eps: Decimal6,
    },
    /// A single prediction; writes the output record.
    Inference {
        #[arg(long)]
        model: PathBuf,
        /// JSON file `{"features": [...]}`.
        #[arg(long)]
        input: PathBuf,
    },
}

#[derive(Subcommand)]
enum Endorse {
    /// Authorize an enclave to emit payloads matching a template.
    Enclave {
        /// Measurer name (dataset, training, metric, inference).
        #[arg(long, conflicts_with = "measurement")]
        measurer: Option<String>,
        /// Raw measurement hex.
        #[arg(long)]
        measurement: Option<String>,
        /// Attestation types to certify with their default templates
        /// (default: every type the measurer emits).
        #[arg(long = "att-type")]
        att_types: Vec<String>,
        /// Custom template file, used instead of the default templates.
        #[arg(long, conflicts_with = "att_types")]
        template: Option<PathBuf>,
        #[command(flatten)]
        signer: Signer,
    },
    /// Name and vouch for a dataset (CSV file or digest).
    Dataset(Subject),
    /// Name and vouch for a model (model file or digest).
    Model(Subject),
}

#[derive(Args)]
struct Signer {
    /// Endorser key file (default: the only keys/endorser-*.key).
    #[arg(long)]
    key: Option<PathBuf>,
    /// Output file.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct Subject {
    /// File path or 64-hex digest.
    subject: String,
    #[arg(long)]
    name: String,
    /// Claims as inline JSON or a path to a JSON file.
    #[arg(long, default_value = "{}")]
    claims: String,
    #[command(flatten)]
    signer: Signer,
}

struct Failure {
    code: u8,
    message: String,
}

type Res<T> = Result<T, Failure>;

fn input_err(e: impl Display) -> Failure {
    Failure { code: 2, message: e.to_string() }
}

fn usage_err(e: impl Display) -> Failure {
    Failure { code: 3, message: e.to_string() }
}

trait Ctx<T> {
    fn ctx(self, what: impl Display) -> Res<T>;
}

impl<T, E: Display> Ctx<T> for Result<T, E> {
    fn ctx(self, what: impl Display) -> Res<T> {
        self.map_err(|e| input_err(format!("{what}: {e}")))
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 3 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

struct Ws {
    root: PathBuf,
    force: bool,
}

impl Ws {
    fn dir(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    fn write(&self, path: &Path, bytes: &[u8]) -> Res<()> {
        if path.exists() && !self.force {
            return Err(input_err(format!("{} exists; pass --force to overwrite", path.display())));
        }
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).ctx(parent.display())?;
        }
        fs::write(path, bytes).ctx(path.display())
    }

    fn files(&self, dir: &str, prefix: &str, suffix: &str) -> Vec<PathBuf> {
        let mut out: Vec<PathBuf> = fs::read_dir(self.dir(dir))
            .into_iter()
            .flatten()
            .flatten()
            .map(|e| e.path())
            .filter(|p| {
                p.file_name()
                    .and_then(|n| n.to_str())
                    .is_some_and(|n| n.starts_with(prefix) && n.ends_with(suffix))
            })
            .collect();
        out.sort();
        out
    }
}

fn read(path: &Path) -> Res<Vec<u8>> {
    fs::read(path).ctx(path.display())
}

fn short(d: &Digest) -> String {
    d.short(12)
}

fn run(cli: Cli) -> Res<u8> {
    let ws = Ws { root: cli.workspace, force: cli.force };
    match cli.cmd {
        Cmd::Keygen { role } => keygen(&ws, role),
        Cmd::Attest(a) => attest(&ws, a),
        Cmd::Endorse { what } => endorse(&ws, what),
        Cmd::Anchors { root, endorser, out } => anchors(&ws, root, endorser, out),
        Cmd::Bundle { files, out } => bundle(&ws, files, out),
        Cmd::Verify { bundle, certs, anchors, out } => verify(&ws, &bundle, certs, anchors, out),
        Cmd::Measure => {
            for k in MeasurerKind::ALL {
                let types: Vec<&str> = k.att_types().iter().map(|t| t.name()).collect();
                println!("{:<10} {} {}", k.name(), k.measurement().0, types.join(","));
            }
            Ok(0)
        }
        Cmd::Manifest { dir, out } => {
            let m = build_manifest(&dir).ctx(dir.display())?;
            ws.write(&out, m.to_canonical().as_bytes())?;
            println!("{} entries, manifest {}", m.entries().len(), m.digest());
            Ok(0)
        }
    }
}

// keys

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct KeyFile {
    role: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    id: Option<String>,
    secret: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    certificate: Option<PlatformCertificate>,
}

fn load_key(path: &Path, role: &str) -> Res<KeyFile> {
    let k: KeyFile = serde_json::from_slice(&read(path)?).ctx(path.display())?;
    if k.role != role {
        return Err(input_err(format!("{}: expected a {role} key, found {}", path.display(), k.role)));
    }
    Ok(k)
}

fn seed_bytes(seed: Option<String>) -> Vec<u8> {
    match seed {
        Some(s) => s.into_bytes(),
        None => hex::encode(rand::random::<[u8; 32]>()).into_bytes(),
    }
}

fn pretty(v: &impl Serialize) -> Vec<u8> {
    canonical_bytes(v).expect("key material has no floats").into_bytes()
}

fn keygen(ws: &Ws, role: Role) -> Res<u8> {
    let keys = ws.dir("keys");
    match role {
        Role::Root { seed } => {
            let root = create_root(&seed_bytes(seed)).map_err(usage_err)?;
            let file = KeyFile { role: "root".into(), id: None, secret: root.keypair().secret_hex(), certificate: None };
            ws.write(&keys.join("root.key"), &pretty(&file))?;
            ws.write(&keys.join("root.cert.json"), &pretty(&root.certificate()))?;
            println!("root {}", root.public());
        }
        Role::Platform { id } => {
            let root = load_root(&keys.join("root.key"))?;
            let p = provision_platform(&root, &id);
            let file = KeyFile {
                role: "platform".into(),
                id: Some(id),
                secret: p.keypair().secret_hex(),
                certificate: Some(p.certificate().clone()),
            };
            ws.write(&keys.join("platform.key"), &pretty(&file))?;
            println!("platform {}", p.public());
        }
        Role::Endorser { id, seed } => {
            if id.is_empty() || id.contains(['/', '\\']) || id.starts_with('.') {
                return Err(usage_err(format!("invalid endorser id {id:?}")));
            }
            let e = EndorserKey::derive(&id, &seed_bytes(seed)).map_err(usage_err)?;
            let file = KeyFile { role: "endorser".into(), id: Some(id.clone()), secret: e.secret_hex(), certificate: None };
            ws.write(&keys.join(format!("endorser-{id}.key")), &pretty(&file))?;
            ws.write(&keys.join(format!("endorser-{id}.json")), &pretty(&e.record()))?;
            println!("endorser {id} {}", e.public());
        }
    }
    Ok(0)
}

fn load_root(path: &Path) -> Res<RootKey> {
    let k = load_key(path, "root")?;
    Ok(RootKey::from_keypair(KeyPair::from_secret_hex(&k.secret).ctx(path.display())?))
}

fn load_platform(path: &Path) -> Res<PlatformIdentity> {
    let k = load_key(path, "platform")?;
    let key = KeyPair::from_secret_hex(&k.secret).ctx(path.display())?;
    let cert = k.certificate.ok_or_else(|| input_err(format!("{}: missing certificate", path.display())))?;
    if cert.pubkey != key.public() {
        return Err(input_err(format!("{}: certificate does not match the key", path.display())));
    }
    Ok(PlatformIdentity::from_parts(key, cert))
}

fn load_endorser(ws: &Ws, path: Option<PathBuf>) -> Res<EndorserKey> {
    let path = match path {
        Some(p) => p,
        None => match ws.files("keys", "endorser-", ".key").as_slice() {
            [one] => one.clone(),
            [] => return Err(input_err("no endorser key in keys/; run `lam keygen endorser`")),
            _ => return Err(usage_err("several endorser keys in keys/; pass --key")),
        },
    };
    let k = load_key(&path, "endorser")?;
    let id = k.id.ok_or_else(|| input_err(format!("{}: missing endorser id", path.display())))?;
    EndorserKey::from_secret_hex(&id, &k.secret).ctx(path.display())
}

// attest

fn attest(ws: &Ws, a: Attest) -> Res<u8> {
    let platform = load_platform(&a.platform.unwrap_or_else(|| ws.dir("keys").join("platform.key")))?;
    let reader = match a.manifest {
        Some(path) => {
            let m = TrustedManifest::from_json(&read(&path)?).ctx(path.display())?;
            InputReader::with_manifest(m, a.manifest_root.unwrap_or_else(|| ws.root.clone()))
        }
        None => InputReader::unchecked(),
    };
    let out = a.out.unwrap_or_else(|| ws.dir("attestations"));
    let artifacts = ws.dir("artifacts");
    let prover = Prover::new(platform);
    let envelope = |name: String, e: &AttestationEnvelope| -> Res<()> {
        let path = out.join(format!("{name}.envelope.json"));
        ws.write(&path, e.to_canonical().as_bytes())?;
        println!("wrote {}", path.display());
        Ok(())
    };

    match a.kind {
        AttestKind::Dist { data, conditional } => {
            let d = reader.dataset(&data).map_err(input_err)?;
            let kind = if conditional { DistributionKind::Conditional } else { DistributionKind::Marginal };
            let e = prover.attest_distribution(&d, kind).map_err(input_err)?;
            envelope(format!("dist-{}", short(&d.digest())), &e)?;
        }
        AttestKind::Train { data, config } => {
            let d = reader.dataset(&data).map_err(input_err)?;
            let cfg = reader.config(&config).map_err(input_err)?;
            let (m, e) = prover.attest_training(&d, &cfg).map_err(input_err)?;
            let model_path = artifacts.join(format!("model-{}.json", short(&m.digest())));
            ws.write(&model_path, m.to_canonical().as_bytes())?;
            println!("wrote {}", model_path.display());
            envelope(format!("pot-{}", short(&m.digest())), &e)?;
            println!("model {}", m.digest());
        }
        AttestKind::Accuracy { model, data } => {
            let (m, d) = model_and_data(&reader, &model, &data)?;
            let e = prover.attest_accuracy(&m, &d).map_err(input_err)?;
            envelope(format!("acc-{}-{}", short(&m.digest()), short(&d.digest())), &e)?;
            print_metric(&e);
        }
        AttestKind::Fairness { model, data } => {
            let (m, d) = model_and_data(&reader, &model, &data)?;
            let e = prover.attest_fairness(&m, &d).map_err(input_err)?;
            envelope(format!("fair-{}-{}", short(&m.digest()), short(&d.digest())), &e)?;
            print_metric(&e);
        }
        AttestKind::Robustness { model, data, eps } => {
            let (m, d) = model_and_data(&reader, &model, &data)?;
            let r = prover.attest_robustness(&m, &d, eps).map_err(input_err)?;
            let rob = short(&r.robust_dataset.digest());
            let csv = artifacts.join(format!("robust-{rob}.csv"));
            ws.write(&csv, r.robust_dataset.to_csv().as_bytes())?;
            println!("wrote {}", csv.display());
            envelope(format!("robgen-{}-{rob}", short(&m.digest())), &r.robgen)?;
            envelope(format!("robacc-{}-{rob}", short(&m.digest())), &r.robacc)?;
            print_metric(&r.robacc);
        }
        AttestKind::Inference { model, input } => {
            let m = reader.model(&model).map_err(input_err)?;
            let x = reader.features(&input).map_err(input_err)?;
            let (rec, e) = prover.attest_inference(&m, &x).map_err(input_err)?;
            let o = short(&rec.output_digest());
            let path = artifacts.join(format!("output-{o}.json"));
            ws.write(&path, rec.output_canonical().as_bytes())?;
            println!("wrote {}", path.display());
            envelope(format!("io-{}-{o}", short(&m.digest())), &e)?;
            println!("predicted {}", rec.predicted);
        }
    }
    Ok(0)
}

fn model_and_data(reader: &InputReader, model: &Path, data: &Path) -> Res<(Model, Dataset)> {
    let m = reader.model(model).map_err(input_err)?;
    let d = reader.dataset(data).map_err(input_err)?;
    Ok((m, d))
}

fn print_metric(e: &AttestationEnvelope) {
    if let Some(c) = Fragment::from_payload(&e.payload).ok().and_then(|f| f.metric()) {
        println!("{} {} ({}/{})", c.metric, c.value, c.numerator, c.denominator);
    }
}

// endorse

fn endorse(ws: &Ws, what: Endorse) -> Res<u8> {
    match what {
        Endorse::Enclave { measurer, measurement, att_types, template, signer } => {
            let (measurement, kind) = match (measurer, measurement) {
                (Some(name), _) => {
                    let k = MeasurerKind::from_name(&name).ok_or_else(|| usage_err(format!("unknown measurer {name:?}")))?;
                    (k.measurement(), Some(k))
                }
                (None, Some(hex)) => {
                    let d = Digest::from_hex(&hex).map_err(usage_err)?;
                    let m = lam_core::backend::EnclaveMeasurement(d);
                    (m, MeasurerKind::ALL.into_iter().find(|k| k.measurement() == m))
                }
                (None, None) => return Err(usage_err("pass --measurer or --measurement")),
            };
            let templates: Vec<Value> = match template {
                Some(path) => vec![serde_json::from_slice(&read(&path)?).ctx(path.display())?],
                None if att_types.is_empty() => match kind {
                    Some(k) => k.att_types().iter().map(|t| default_template(*t)).collect(),
                    None => return Err(usage_err("unknown measurement; pass --att-type or --template")),
                },
                None => att_types
                    .iter()
                    .map(|n| AttType::from_name(n).map(default_template).ok_or_else(|| usage_err(format!("unknown att type {n:?}"))))
                    .collect::<Res<_>>()?,
            };
            let key = load_endorser(ws, signer.key)?;
            let certs = templates
                .into_iter()
                .map(|t| key.certify(measurement, t))
                .collect::<Result<Vec<_>, _>>()
                .map_err(input_err)?;
            let store = CertStore::new(certs);
            let out = signer.out.unwrap_or_else(|| {
                ws.dir("trust").join(format!("certs-{}-{}.json", short(&measurement.0), short(&canonical_digest(&store))))
            });
            ws.write(&out, store.to_json().as_bytes())?;
            println!("wrote {} ({} certification(s) for {})", out.display(), store.len(), measurement.0);
        }
        Endorse::Dataset(s) => external(ws, s, SubjectKind::Dataset)?,
        Endorse::Model(s) => external(ws, s, SubjectKind::Model)?,
    }
    Ok(0)
}

fn canonical_digest(store: &CertStore) -> Digest {
    lam_core::hashcore::hash_bytes(store.to_json().as_bytes())
}

fn external(ws: &Ws, s: Subject, kind: SubjectKind) -> Res<()> {
    let digest = match Digest::from_hex(&s.subject) {
        Ok(d) => d,
        Err(_) => {
            let path = Path::new(&s.subject);
            let bytes = read(path)?;
            match kind {
                SubjectKind::Dataset => Dataset::from_csv(&bytes).ctx(path.display())?.digest(),
                SubjectKind::Model => Model::from_json(&bytes).ctx(path.display())?.digest(),
            }
        }
    };
    let claims: Value = match fs::read(&s.claims) {
        Ok(bytes) => serde_json::from_slice(&bytes).ctx(&s.claims)?,
        Err(_) => serde_json::from_str(&s.claims).ctx("--claims")?,
    };
    canonicalize(&claims).ctx("--claims")?;
    let key = load_endorser(ws, s.signer.key)?;
    let cert = key.certify_subject(digest, kind, &s.name, claims).map_err(input_err)?;
    let kind_name = match kind {
        SubjectKind::Dataset => "dataset",
        SubjectKind::Model => "model",
    };
    let out = s.signer.out.unwrap_or_else(|| ws.dir("attestations").join(format!("cert-{kind_name}-{}.json", short(&digest))));
    ws.write(&out, &pretty(&cert))?;
    println!("wrote {} ({} {digest} named {:?})", out.display(), kind_name, s.name);
    Ok(())
}

// anchors, bundle, verify

fn anchors(ws: &Ws, mut roots: Vec<PathBuf>, mut endorsers: Vec<PathBuf>, out: Option<PathBuf>) -> Res<u8> {
    if roots.is_empty() {
        roots.push(ws.dir("keys").join("root.cert.json"));
    }
    if endorsers.is_empty() {
        endorsers = ws.files("keys", "endorser-", ".json");
    }
    let mut t = TrustAnchors::default();
    for p in &roots {
        let r: RootCertificate = serde_json::from_slice(&read(p)?).ctx(p.display())?;
        t.add_root(r);
    }
    for p in &endorsers {
        let e: EndorserRecord = serde_json::from_slice(&read(p)?).ctx(p.display())?;
        t.add_endorser(e);
    }
    t.check().map_err(input_err)?;
    let out = out.unwrap_or_else(|| ws.dir("trust").join("anchors.json"));
    ws.write(&out, t.to_canonical().as_bytes())?;
    println!("wrote {} ({} root(s), {} endorser(s))", out.display(), t.tee_roots.len(), t.endorsers.len());
    Ok(0)
}

fn bundle(ws: &Ws, mut files: Vec<PathBuf>, out: Option<PathBuf>) -> Res<u8> {
    if files.is_empty() {
        files = ws.files("attestations", "", ".json");
    }
    if files.is_empty() {
        return Err(input_err("nothing to bundle"));
    }
    let mut b = AssertionBundle::default();
    for p in &files {
        let bytes = read(p)?;
        let v: Value = serde_json::from_slice(&bytes).ctx(p.display())?;
        if v.get("payload_b64").is_some() {
            b.envelopes.push(AttestationEnvelope::from_json(&bytes).ctx(p.display())?);
        } else if v.get("subject_sha256").is_some() {
            b.external_certificates.push(serde_json::from_value::<ExternalCertificate>(v).ctx(p.display())?);
        } else if v.get("envelopes").is_some() {
            let inner = AssertionBundle::from_json(&bytes).ctx(p.display())?;
            b.envelopes.extend(inner.envelopes);
            b.external_certificates.extend(inner.external_certificates);
        } else {
            return Err(input_err(format!("{}: not an envelope, certificate or bundle", p.display())));
        }
    }
    let bytes = b.to_canonical().map_err(input_err)?;
    let out = out.unwrap_or_else(|| ws.root.join(format!("bundle-{}.json", short(&bytes.digest()))));
    ws.write(&out, bytes.as_bytes())?;
    println!(
        "wrote {} ({} envelope(s), {} certificate(s))",
        out.display(),
        b.envelopes.len(),
        b.external_certificates.len()
    );
    Ok(0)
}

fn verify(ws: &Ws, bundle: &Path, mut certs: Vec<PathBuf>, anchors: Option<PathBuf>, out: Option<PathBuf>) -> Res<u8> {
    let anchors_path = anchors.unwrap_or_else(|| ws.dir("trust").join("anchors.json"));
    let anchors = TrustAnchors::from_json(&read(&anchors_path)?).ctx(anchors_path.display())?;
    if certs.is_empty() {
        certs = ws.files("trust", "certs-", ".json");
    }
    let mut all = Vec::new();
    for p in &certs {
        let store = CertStore::from_json(&read(p)?).ctx(p.display())?;
        all.extend(store.all().cloned());
    }
    let b = AssertionBundle::from_json(&read(bundle)?).ctx(bundle.display())?;
    let outcome = Verifier::new(&anchors, CertStore::new(all)).verify_bundle(&b);

    for v in &outcome.verdicts {
        let what = v.att_type.clone().unwrap_or_default();
        match &v.reason {
            None => println!("{:<26} verified {what}", v.item),
            Some(r) => println!("{:<26} REJECTED {r} {}", v.item, v.detail.as_deref().unwrap_or("")),
        }
    }
    for l in &outcome.chains.links {
        let mark = if l.green { "ok    " } else { "BROKEN" };
        println!("{mark} {} {} {}", l.relation, l.from, l.to.as_deref().unwrap_or("-"));
    }
    for c in outcome.chains.models.iter().filter_map(|m| m.conclusion.as_ref()) {
        println!("{c}");
    }
    for c in outcome.chains.inferences.iter().filter_map(|m| m.conclusion.as_ref()) {
        println!("{c}");
    }

    let out = out.unwrap_or_else(|| ws.dir("cards"));
    // cards and the report are derived outputs and are always refreshed
    let derived = Ws { root: ws.root.clone(), force: true };
    derived.write(&out.join("report.json"), outcome.report().as_bytes())?;
    let mut code = if outcome.all_verified() { 0 } else { 1 };
    match &outcome.cards {
        Ok(cards) => {
            for c in cards {
                let path = out.join(c.file_name());
                derived.write(&path, c.to_yaml().as_bytes())?;
                println!("wrote {}", path.display());
            }
        }
        Err(conflict) => {
            eprintln!("card conflict: {conflict}");
            code = 1;
        }
    }
    Ok(code)
}
