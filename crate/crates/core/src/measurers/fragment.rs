use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::hashcore::{canonical_bytes, canonicalize, CanonicalError, CanonicalJson, Decimal6, Digest};

pub const TASK_TYPE: &str = "tabular-classification";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum AttType {
    DistAtt,
    PoT,
    AccAtt,
    FairAtt,
    #[serde(rename = "RobustAtt-A")]
    RobustAttA,
    #[serde(rename = "RobustAtt-B")]
    RobustAttB,
    IOAtt,
}

impl AttType {
    pub const ALL: [AttType; 7] = [
        AttType::DistAtt,
        AttType::PoT,
        AttType::AccAtt,
        AttType::FairAtt,
        AttType::RobustAttA,
        AttType::RobustAttB,
        AttType::IOAtt,
    ];

    pub fn name(self) -> &'static str {
        match self {
            AttType::DistAtt => "DistAtt",
            AttType::PoT => "PoT",
            AttType::AccAtt => "AccAtt",
            AttType::FairAtt => "FairAtt",
            AttType::RobustAttA => "RobustAtt-A",
            AttType::RobustAttB => "RobustAtt-B",
            AttType::IOAtt => "IOAtt",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|t| t.name() == s)
    }

    /// Subject digest fields a fragment of this type carries, no more and no less.
    pub fn digest_fields(self) -> &'static [&'static str] {
        match self {
            AttType::DistAtt => &["dataset_sha256"],
            AttType::PoT => &["arch_sha256", "config_sha256", "dataset_sha256", "model_sha256"],
            AttType::AccAtt | AttType::FairAtt => &["dataset_sha256", "model_sha256"],
            AttType::RobustAttA => &["dataset_sha256", "model_sha256", "robust_dataset_sha256"],
            AttType::RobustAttB => &["model_sha256", "robust_dataset_sha256"],
            AttType::IOAtt => &["input_sha256", "model_sha256", "output_sha256"],
        }
    }

    /// Metric name for the model-index shaped types.
    pub fn metric_name(self) -> Option<&'static str> {
        match self {
            AttType::AccAtt => Some("accuracy"),
            AttType::FairAtt => Some("demographic_parity"),
            AttType::RobustAttB => Some("robust_accuracy"),
            _ => None,
        }
    }
}

impl std::fmt::Display for AttType {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, thiserror::Error)]
pub enum FragmentError {
    #[error("{att_type} fragment: {reason}")]
    Schema { att_type: AttType, reason: String },
    #[error(transparent)]
    Canonical(#[from] CanonicalError),
    #[error("fragment json: {0}")]
    Json(#[from] serde_json::Error),
}

/// Subject digests of a fragment. Which ones are set depends on the type.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Digests {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub arch_sha256: Option<Digest>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config_sha256: Option<Digest>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dataset_sha256: Option<Digest>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub input_sha256: Option<Digest>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model_sha256: Option<Digest>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_sha256: Option<Digest>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub robust_dataset_sha256: Option<Digest>,
}

impl Digests {
    pub fn present(&self) -> Vec<&'static str> {
        [
            ("arch_sha256", self.arch_sha256.is_some()),
            ("config_sha256", self.config_sha256.is_some()),
            ("dataset_sha256", self.dataset_sha256.is_some()),
            ("input_sha256", self.input_sha256.is_some()),
            ("model_sha256", self.model_sha256.is_some()),
            ("output_sha256", self.output_sha256.is_some()),
            ("robust_dataset_sha256", self.robust_dataset_sha256.is_some()),
        ]
        .into_iter()
        .filter_map(|(k, p)| p.then_some(k))
        .collect()
    }
}

/// The signed payload of an attestation: a model-card metadata fragment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Fragment {
    pub att_type: AttType,
    pub digests: Digests,
    pub parameters: Map<String, Value>,
    pub results: Value,
}

/// One metric entry from a model-index shaped fragment.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MetricClaim {
    pub metric: String,
    pub value: Decimal6,
    pub numerator: u64,
    pub denominator: u64,
    pub args: Option<Value>,
}

impl Fragment {
    pub fn new(att_type: AttType) -> Self {
        Self { att_type, digests: Digests::default(), parameters: Map::new(), results: Value::Object(Map::new()) }
    }

    pub fn to_canonical(&self) -> Result<CanonicalJson, FragmentError> {
        Ok(canonical_bytes(self)?)
    }

    pub fn digest(&self) -> Result<Digest, FragmentError> {
        Ok(self.to_canonical()?.digest())
    }

    pub fn from_value(v: &Value) -> Result<Self, FragmentError> {
        canonicalize(v)?;
        Ok(serde_json::from_value(v.clone())?)
    }

    pub fn from_payload(bytes: &[u8]) -> Result<Self, FragmentError> {
        let v: Value = serde_json::from_slice(bytes)?;
        Self::from_value(&v)
    }

    fn schema_err(&self, reason: impl Into<String>) -> FragmentError {
        FragmentError::Schema { att_type: self.att_type, reason: reason.into() }
    }

    /// The single metric entry of an AccAtt, FairAtt or RobustAtt-B fragment.
    pub fn metric(&self) -> Option<MetricClaim> {
        let entry = self.results.as_array()?.first()?;
        let m = entry.get("metrics")?.as_array()?.first()?;
        Some(MetricClaim {
            metric: m.get("type")?.as_str()?.to_string(),
            value: Decimal6::parse_canonical(m.get("value")?.as_str()?).ok()?,
            numerator: m.get("numerator")?.as_u64()?,
            denominator: m.get("denominator")?.as_u64()?,
            args: m.get("args").cloned(),
        })
    }

    /// Epsilon of a RobustAtt-A fragment.
    pub fn epsilon(&self) -> Option<Decimal6> {
        Decimal6::parse_canonical(self.parameters.get("epsilon")?.as_str()?).ok()
    }

    /// Checks that this fragment is well formed for its own `att_type`.
    pub fn validate_schema(&self) -> Result<(), FragmentError> {
        self.validate_as(self.att_type)
    }

    /// Checks the fragment against the schema of `t`. Schemas are exclusive:
    /// a fragment validates against at most one type.
    pub fn validate_as(&self, t: AttType) -> Result<(), FragmentError> {
        if self.att_type != t {
            return Err(self.schema_err(format!("att_type is not {t}")));
        }
        let present: BTreeSet<_> = self.digests.present().into_iter().collect();
        let required: BTreeSet<_> = t.digest_fields().iter().copied().collect();
        if present != required {
            return Err(self.schema_err(format!("digest fields {present:?}, expected {required:?}")));
        }
        canonical_bytes(self)?;
        match t {
            AttType::DistAtt => self.object_keys(&["distribution"]),
            AttType::PoT => self.object_keys(&["training"]),
            AttType::AccAtt | AttType::FairAtt | AttType::RobustAttB => {
                let entries = self.results.as_array().map(Vec::len).unwrap_or(0);
                let task_ok = self.results.get(0).and_then(|e| e.pointer("/task/type")).and_then(Value::as_str)
                    == Some(TASK_TYPE);
                match self.metric() {
                    Some(m)
                        if entries == 1
                            && task_ok
                            && Some(m.metric.as_str()) == t.metric_name()
                            && m.denominator > 0
                            && Decimal6::from_ratio(m.numerator as i128, m.denominator as i128).ok()
                                == Some(m.value) =>
                    {
                        Ok(())
                    }
                    _ => Err(self.schema_err("results must hold one consistent metric entry")),
                }
            }
            AttType::RobustAttA => {
                if self.epsilon().is_none() {
                    return Err(self.schema_err("missing epsilon parameter"));
                }
                self.object_keys(&["robust_dataset"])
            }
            AttType::IOAtt => {
                self.object_keys(&["output"])?;
                let out = canonicalize(&self.results["output"])?;
                if Some(out.digest()) != self.digests.output_sha256 {
                    return Err(self.schema_err("clear output does not hash to output_sha256"));
                }
                Ok(())
            }
        }
    }

    fn object_keys(&self, keys: &[&str]) -> Result<(), FragmentError> {
        match self.results.as_object() {
            Some(o) if o.len() == keys.len() && keys.iter().all(|k| o.contains_key(*k)) => Ok(()),
            _ => Err(self.schema_err(format!("results must be an object with keys {keys:?}"))),
        }
    }
}
