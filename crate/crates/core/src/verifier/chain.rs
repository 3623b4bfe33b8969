use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;

use super::certs::SubjectKind;
use super::{VerifiedExternal, VerifiedFragment};
use crate::hashcore::Digest;
use crate::measurers::{AttType, Fragment};

/// One upward edge from a fragment to the evidence it depends on.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Link {
    pub from: String,
    pub relation: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub to: Option<String>,
    pub green: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ModelChain {
    pub model_sha256: Digest,
    pub has_pot: bool,
    pub all_green: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub conclusion: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct InferenceChain {
    pub node: String,
    pub model_sha256: Digest,
    pub all_green: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub conclusion: Option<String>,
}

/// Link graph over verified fragments plus advisory conclusions. Gaps are
/// reported as non-green links, never as errors.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ChainReport {
    pub links: Vec<Link>,
    pub models: Vec<ModelChain>,
    pub inferences: Vec<InferenceChain>,
    pub all_green: bool,
}

impl ChainReport {
    pub fn broken(&self) -> impl Iterator<Item = &Link> {
        self.links.iter().filter(|l| !l.green)
    }
}

pub fn node(f: &VerifiedFragment) -> String {
    format!("{}:{}", f.fragment.att_type, f.payload_sha256)
}

fn cert_node(c: &VerifiedExternal) -> String {
    format!("certificate:{}", c.id)
}

struct Index<'a> {
    frags: Vec<&'a VerifiedFragment>,
    externals: &'a [VerifiedExternal],
}

impl<'a> Index<'a> {
    fn of(&self, t: AttType) -> impl Iterator<Item = &'a VerifiedFragment> + '_ {
        self.frags.iter().copied().filter(move |f| f.fragment.att_type == t)
    }

    fn find(&self, t: AttType, pred: impl Fn(&Fragment) -> bool) -> Option<&'a VerifiedFragment> {
        self.of(t).find(|f| pred(&f.fragment))
    }

    fn cert(&self, kind: SubjectKind, subject: Option<Digest>) -> Option<&'a VerifiedExternal> {
        let subject = subject?;
        self.externals
            .iter()
            .find(|c| c.certificate.subject_kind == kind && c.certificate.subject_sha256 == subject)
    }

    fn dataset_label(&self, d: Digest) -> String {
        match self.cert(SubjectKind::Dataset, Some(d)) {
            Some(c) => format!("{} ({})", c.certificate.name, d.short(12)),
            None => format!("dataset {}", d.short(12)),
        }
    }
}

fn link(from: &VerifiedFragment, relation: &str, to: Option<String>, missing: String) -> Link {
    let green = to.is_some();
    let detail = if green { "ok".to_string() } else { missing };
    Link { from: node(from), relation: relation.into(), to, green, detail }
}

/// Deduplicates by payload digest and orders by (type, payload digest).
pub(crate) fn canonical_order(fragments: &[VerifiedFragment]) -> Vec<&VerifiedFragment> {
    let mut seen = BTreeSet::new();
    let mut out: Vec<_> = fragments.iter().filter(|f| seen.insert(f.payload_sha256)).collect();
    out.sort_by_key(|f| (f.fragment.att_type, f.payload_sha256));
    out
}

pub fn resolve_chains(fragments: &[VerifiedFragment], externals: &[VerifiedExternal]) -> ChainReport {
    let ix = Index { frags: canonical_order(fragments), externals };
    let mut links = Vec::new();
    let mut by_model: BTreeMap<Digest, Vec<usize>> = BTreeMap::new();

    for f in ix.frags.iter().copied() {
        let d = &f.fragment.digests;
        let model_link = |f: &VerifiedFragment| {
            let m = d.model_sha256;
            link(
                f,
                "model-training",
                ix.find(AttType::PoT, |p| p.digests.model_sha256 == m).map(node),
                format!("no PoT for model {}", m.map(|m| m.to_string()).unwrap_or_default()),
            )
        };
        let test_cert = |f: &VerifiedFragment| {
            link(
                f,
                "test-certificate",
                ix.cert(SubjectKind::Dataset, d.dataset_sha256).map(cert_node),
                "test dataset has no external certificate".into(),
            )
        };
        let new: Vec<Link> = match f.fragment.att_type {
            AttType::DistAtt => vec![],
            AttType::PoT => vec![
                link(
                    f,
                    "training-distribution",
                    ix.find(AttType::DistAtt, |x| x.digests.dataset_sha256 == d.dataset_sha256).map(node),
                    "training dataset has no DistAtt".into(),
                ),
                link(
                    f,
                    "training-certificate",
                    ix.cert(SubjectKind::Dataset, d.dataset_sha256).map(cert_node),
                    "training dataset has no external certificate".into(),
                ),
            ],
            AttType::AccAtt | AttType::FairAtt => vec![model_link(f), test_cert(f)],
            AttType::RobustAttB => vec![
                model_link(f),
                link(
                    f,
                    "robust-generation",
                    ix.find(AttType::RobustAttA, |a| {
                        a.digests.robust_dataset_sha256 == d.robust_dataset_sha256
                            && a.digests.model_sha256 == d.model_sha256
                    })
                    .map(node),
                    "robust dataset is not grounded by a RobustAtt-A for this model".into(),
                ),
            ],
            AttType::RobustAttA => {
                let attested = |x: &Fragment| {
                    x.digests.model_sha256 == d.model_sha256 && x.digests.dataset_sha256 == d.dataset_sha256
                };
                let target = ix.find(AttType::AccAtt, attested).or_else(|| ix.find(AttType::FairAtt, attested));
                vec![link(f, "robust-source", target.map(node), "source dataset is not an attested test set".into())]
            }
            AttType::IOAtt => vec![model_link(f)],
        };
        if let Some(m) = d.model_sha256 {
            let entry = by_model.entry(m).or_default();
            if f.fragment.att_type != AttType::IOAtt {
                entry.extend(links.len()..links.len() + new.len());
            }
        }
        links.extend(new);
    }

    let mut models = Vec::new();
    let mut tails = BTreeMap::new();
    for (m, idx) in &by_model {
        let pot = ix.find(AttType::PoT, |p| p.digests.model_sha256 == Some(*m));
        let all_green = pot.is_some() && idx.iter().all(|&i| links[i].green);
        let conclusion = if all_green { Some(model_tail(&ix, *m, pot.expect("checked"))) } else { None };
        if let Some(t) = &conclusion {
            tails.insert(*m, t.clone());
        }
        models.push(ModelChain {
            model_sha256: *m,
            has_pot: pot.is_some(),
            all_green,
            conclusion: conclusion.map(|t| format!("model {} {t}", m.short(12))),
        });
    }

    let inferences = ix
        .of(AttType::IOAtt)
        .map(|f| {
            let d = &f.fragment.digests;
            let m = d.model_sha256.expect("schema");
            let own = links.iter().filter(|l| l.from == node(f)).all(|l| l.green);
            let tail = tails.get(&m);
            InferenceChain {
                node: node(f),
                model_sha256: m,
                all_green: own && tail.is_some(),
                conclusion: tail.filter(|_| own).map(|t| {
                    format!(
                        "output {} was generated from model {} for input {}, where {} {t}",
                        d.output_sha256.expect("schema").short(12),
                        m.short(12),
                        d.input_sha256.expect("schema").short(12),
                        m.short(12),
                    )
                }),
            }
        })
        .collect();

    let all_green = links.iter().all(|l| l.green);
    ChainReport { links, models, inferences, all_green }
}

fn distribution_summary(f: &Fragment) -> String {
    let p = &f.results["distribution"];
    let groups = |v: &serde_json::Value| {
        v.as_array()
            .map(|gs| {
                gs.iter()
                    .map(|g| format!("{}:{}", g["group"], g["ratio"].as_str().unwrap_or("?")))
                    .collect::<Vec<_>>()
                    .join(" ")
            })
            .unwrap_or_default()
    };
    match p["kind"].as_str() {
        Some("conditional") => {
            let per: Vec<String> = p["by_label"]
                .as_array()
                .map(|ls| ls.iter().map(|l| format!("label {} [{}]", l["label"], groups(&l["groups"]))).collect())
                .unwrap_or_default();
            format!("conditional group ratios {}", per.join(", "))
        }
        _ => format!("group ratios [{}]", groups(&p["groups"])),
    }
}

fn model_tail(ix: &Index<'_>, m: Digest, pot: &VerifiedFragment) -> String {
    let d_tr = pot.fragment.digests.dataset_sha256.expect("schema");
    let props: Vec<String> = ix
        .of(AttType::DistAtt)
        .filter(|f| f.fragment.digests.dataset_sha256 == Some(d_tr))
        .map(|f| distribution_summary(&f.fragment))
        .collect();
    let mut s = format!("was trained on {} satisfying {}", ix.dataset_label(d_tr), props.join("; "));
    let mut metrics = Vec::new();
    for t in [AttType::AccAtt, AttType::FairAtt] {
        for f in ix.of(t).filter(|f| f.fragment.digests.model_sha256 == Some(m)) {
            if let Some(mc) = f.fragment.metric() {
                let ds = ix.dataset_label(f.fragment.digests.dataset_sha256.expect("schema"));
                metrics.push(format!("{} {} on {ds}", mc.metric, mc.value));
            }
        }
    }
    for f in ix.of(AttType::RobustAttB).filter(|f| f.fragment.digests.model_sha256 == Some(m)) {
        let rob = f.fragment.digests.robust_dataset_sha256;
        let gen = ix.find(AttType::RobustAttA, |a| {
            a.digests.robust_dataset_sha256 == rob && a.digests.model_sha256 == Some(m)
        });
        if let (Some(mc), Some(gen)) = (f.fragment.metric(), gen) {
            let eps = gen.fragment.epsilon().map(|e| e.to_string()).unwrap_or_default();
            let src = ix.dataset_label(gen.fragment.digests.dataset_sha256.expect("schema"));
            metrics.push(format!("{} {} at epsilon {eps} on {src}", mc.metric, mc.value));
        }
    }
    if !metrics.is_empty() {
        s.push_str(", and has ");
        s.push_str(&metrics.join(", "));
    }
    s
}
