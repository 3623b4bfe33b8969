use std::collections::BTreeMap;

use serde::Serialize;
use serde_json::{json, Map, Value};

use super::certs::SubjectKind;
use super::chain::canonical_order;
use super::{VerifiedExternal, VerifiedFragment};
use crate::backend::EnclaveMeasurement;
use crate::hashcore::Digest;
use crate::measurers::{AttType, TASK_TYPE};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum CardKind {
    Model,
    Dataset,
    Inference,
}

impl CardKind {
    pub fn name(self) -> &'static str {
        match self {
            CardKind::Model => "model",
            CardKind::Dataset => "dataset",
            CardKind::Inference => "inference",
        }
    }
}

/// Where a claim came from: a verified fragment or an external certificate.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub struct Provenance {
    pub id: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub att_type: Option<AttType>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub payload_sha256: Option<Digest>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub enclave_measurement: Option<EnclaveMeasurement>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub certification_id: Option<Digest>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub external_certificate_id: Option<Digest>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub endorser_id: Option<String>,
}

impl Provenance {
    fn fragment(f: &VerifiedFragment) -> Self {
        Self {
            id: format!("fragment:{}", f.payload_sha256),
            att_type: Some(f.fragment.att_type),
            payload_sha256: Some(f.payload_sha256),
            enclave_measurement: Some(f.measurement),
            certification_id: Some(f.certification_id),
            external_certificate_id: None,
            endorser_id: None,
        }
    }

    fn external(c: &VerifiedExternal) -> Self {
        Self {
            id: format!("certificate:{}", c.id),
            att_type: None,
            payload_sha256: None,
            enclave_measurement: None,
            certification_id: None,
            external_certificate_id: Some(c.id),
            endorser_id: Some(c.certificate.endorser_id.clone()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Claim {
    pub path: String,
    pub value: Value,
    pub source: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PropertyCard {
    pub kind: CardKind,
    pub subject: Digest,
    pub claims: Vec<Claim>,
    pub provenance: Vec<Provenance>,
}

/// Two verified sources disagree on one claim.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("conflicting claims for {kind:?} {subject} at {path}: {first_value} ({first_source}) vs {second_value} ({second_source})")]
pub struct CardConflict {
    pub kind: CardKind,
    pub subject: Digest,
    pub path: String,
    pub first_value: Value,
    pub first_source: String,
    pub second_value: Value,
    pub second_source: String,
}

#[derive(Default)]
struct Builder {
    claims: BTreeMap<String, (Value, String)>,
    provenance: BTreeMap<String, Provenance>,
}

impl Builder {
    fn add(&mut self, key: (CardKind, Digest), path: String, value: Value, p: &Provenance) -> Result<(), CardConflict> {
        match self.claims.get(&path) {
            Some((v, _)) if *v == value => Ok(()),
            Some((v, src)) => Err(CardConflict {
                kind: key.0,
                subject: key.1,
                path,
                first_value: v.clone(),
                first_source: src.clone(),
                second_value: value,
                second_source: p.id.clone(),
            }),
            None => {
                self.claims.insert(path, (value, p.id.clone()));
                self.provenance.entry(p.id.clone()).or_insert_with(|| p.clone());
                Ok(())
            }
        }
    }
}

/// Union of verified fragments and external certificates into cards: one
/// model card per model digest, one datasheet per dataset digest that has a
/// DistAtt or an external certificate, one inference card per IOAtt (keyed by its payload digest). Identical
/// claims merge; different values for one claim path are a conflict.
pub fn assemble_cards(
    fragments: &[VerifiedFragment],
    externals: &[VerifiedExternal],
) -> Result<Vec<PropertyCard>, CardConflict> {
    let mut cards: BTreeMap<(CardKind, Digest), Builder> = BTreeMap::new();

    fn put(
        cards: &mut BTreeMap<(CardKind, Digest), Builder>,
        kind: CardKind,
        subject: Digest,
        path: String,
        value: Value,
        p: &Provenance,
    ) -> Result<(), CardConflict> {
        cards.entry((kind, subject)).or_default().add((kind, subject), path, value, p)
    }

    for f in canonical_order(fragments) {
        let p = Provenance::fragment(f);
        let d = &f.fragment.digests;
        let hex = |o: Option<Digest>| o.expect("schema").to_string();
        match f.fragment.att_type {
            AttType::DistAtt => {
                let dist = &f.fragment.results["distribution"];
                let kind = dist["kind"].as_str().unwrap_or("unknown");
                put(&mut cards, CardKind::Dataset, d.dataset_sha256.expect("schema"), format!("distribution/{kind}"), dist.clone(), &p)?;
            }
            AttType::PoT => {
                let m = d.model_sha256.expect("schema");
                for (k, v) in [
                    ("training/dataset_sha256", json!(hex(d.dataset_sha256))),
                    ("training/arch_sha256", json!(hex(d.arch_sha256))),
                    ("training/config_sha256", json!(hex(d.config_sha256))),
                    ("training/config", f.fragment.results["training"].clone()),
                ] {
                    put(&mut cards, CardKind::Model, m, k.to_string(), v, &p)?;
                }
            }
            AttType::AccAtt | AttType::FairAtt | AttType::RobustAttB => {
                let m = d.model_sha256.expect("schema");
                let ds = d.dataset_sha256.or(d.robust_dataset_sha256).expect("schema");
                if let Some(mc) = f.fragment.metric() {
                    let mut v = json!({ "value": mc.value, "numerator": mc.numerator, "denominator": mc.denominator });
                    if let Some(args) = mc.args {
                        v["args"] = args;
                    }
                    put(&mut cards, CardKind::Model, m, format!("results/{ds}/{}", mc.metric), v, &p)?;
                }
            }
            AttType::RobustAttA => {
                let m = d.model_sha256.expect("schema");
                let rob = d.robust_dataset_sha256.expect("schema");
                let v = json!({
                    "source_dataset_sha256": hex(d.dataset_sha256),
                    "parameters": f.fragment.parameters,
                });
                put(&mut cards, CardKind::Model, m, format!("results/{rob}/generation"), v, &p)?;
            }
            AttType::IOAtt => {
                let s = f.payload_sha256;
                for (k, v) in [
                    ("model_sha256", json!(hex(d.model_sha256))),
                    ("input_sha256", json!(hex(d.input_sha256))),
                    ("output_sha256", json!(hex(d.output_sha256))),
                    ("output", f.fragment.results["output"].clone()),
                ] {
                    put(&mut cards, CardKind::Inference, s, k.to_string(), v, &p)?;
                }
            }
        }
    }

    let mut exts: Vec<&VerifiedExternal> = externals.iter().collect();
    exts.sort_by_key(|c| c.id);
    exts.dedup_by_key(|c| c.id);
    for c in exts {
        let p = Provenance::external(c);
        let cert = &c.certificate;
        let kind = match cert.subject_kind {
            SubjectKind::Model => CardKind::Model,
            SubjectKind::Dataset => CardKind::Dataset,
        };
        put(&mut cards, kind, cert.subject_sha256, "name".into(), json!(cert.name), &p)?;
        put(&mut cards, kind, cert.subject_sha256, format!("certificates/{}", c.id), cert.claims.clone(), &p)?;
    }

    Ok(cards
        .into_iter()
        .map(|((kind, subject), b)| PropertyCard {
            kind,
            subject,
            claims: b.claims.into_iter().map(|(path, (value, source))| Claim { path, value, source }).collect(),
            provenance: b.provenance.into_values().collect(),
        })
        .collect())
}

impl PropertyCard {
    pub fn claim(&self, path: &str) -> Option<&Value> {
        self.claims.iter().find(|c| c.path == path).map(|c| &c.value)
    }

    /// `<kind>-<first 12 hex of subject>.yaml`
    pub fn file_name(&self) -> String {
        format!("{}-{}.yaml", self.kind.name(), self.subject.short(12))
    }

    /// The card body as YAML-ready JSON. Only claims are rendered.
    pub fn document(&self) -> Value {
        let mut doc = Map::new();
        match self.kind {
            CardKind::Model => {
                let mut results: BTreeMap<&str, Vec<Value>> = BTreeMap::new();
                for c in &self.claims {
                    let Some(rest) = c.path.strip_prefix("results/") else { continue };
                    let Some((ds, metric)) = rest.split_once('/') else { continue };
                    if metric == "generation" {
                        continue;
                    }
                    let mut args = Map::new();
                    args.insert("numerator".into(), c.value["numerator"].clone());
                    args.insert("denominator".into(), c.value["denominator"].clone());
                    if let Some(Value::Object(extra)) = c.value.get("args") {
                        args.extend(extra.clone());
                    }
                    if let Some(gen) = self.claim(&format!("results/{ds}/generation")) {
                        args.insert("source_dataset_sha256".into(), gen["source_dataset_sha256"].clone());
                        if let Some(Value::Object(ps)) = gen.get("parameters") {
                            args.extend(ps.clone());
                        }
                    }
                    results.entry(ds).or_default().push(json!({
                        "type": metric,
                        "value": c.value["value"],
                        "verified": true,
                        "args": args,
                    }));
                }
                let results: Vec<Value> = results
                    .into_iter()
                    .map(|(ds, metrics)| {
                        json!({
                            "task": { "type": TASK_TYPE },
                            "dataset": { "name": ds, "sha256": ds },
                            "metrics": metrics,
                        })
                    })
                    .collect();
                let mut entry = Map::new();
                entry.insert("name".into(), json!(self.subject.to_string()));
                entry.insert("results".into(), json!(results));
                doc.insert("model-index".into(), json!([entry]));
                if let Some(name) = self.claim("name") {
                    doc.insert("model_name".into(), name.clone());
                }
                let training: Map<String, Value> = self
                    .claims
                    .iter()
                    .filter_map(|c| c.path.strip_prefix("training/").map(|k| (k.to_string(), c.value.clone())))
                    .collect();
                if !training.is_empty() {
                    doc.insert("training".into(), Value::Object(training));
                }
            }
            CardKind::Dataset => {
                let mut ds = Map::new();
                ds.insert("sha256".into(), json!(self.subject.to_string()));
                if let Some(name) = self.claim("name") {
                    ds.insert("name".into(), name.clone());
                }
                let dist: Map<String, Value> = self
                    .claims
                    .iter()
                    .filter_map(|c| c.path.strip_prefix("distribution/").map(|k| (k.to_string(), c.value.clone())))
                    .collect();
                ds.insert("distribution".into(), Value::Object(dist));
                doc.insert("dataset".into(), Value::Object(ds));
            }
            CardKind::Inference => {
                let inf: Map<String, Value> = self.claims.iter().map(|c| (c.path.clone(), c.value.clone())).collect();
                doc.insert("inference".into(), Value::Object(inf));
            }
        }
        let certs: Map<String, Value> = self
            .claims
            .iter()
            .filter_map(|c| c.path.strip_prefix("certificates/").map(|k| (k.to_string(), c.value.clone())))
            .collect();
        if !certs.is_empty() {
            doc.insert("certificates".into(), Value::Object(certs));
        }
        doc.insert("provenance".into(), serde_json::to_value(&self.provenance).expect("serializable"));
        Value::Object(doc)
    }

    pub fn to_yaml(&self) -> String {
        serde_yaml::to_string(&self.document()).expect("json values serialize as yaml")
    }
}
