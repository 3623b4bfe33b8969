use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::hashcore::Decimal6;

use super::dataset::Dataset;
use super::model::{predict, Model};
use super::train::check_labels;
use super::MlError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricKind {
    Accuracy,
    DemographicParity,
    RobustAccuracy,
}

impl MetricKind {
    pub fn name(self) -> &'static str {
        match self {
            MetricKind::Accuracy => "accuracy",
            MetricKind::DemographicParity => "demographic_parity",
            MetricKind::RobustAccuracy => "robust_accuracy",
        }
    }
}

/// A measured metric. `value` is always `numerator / denominator` rounded
/// to six digits.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MetricValue {
    pub metric: MetricKind,
    pub value: Decimal6,
    pub numerator: u64,
    pub denominator: u64,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub parameters: BTreeMap<String, u64>,
}

fn predictions(m: &Model, d: &Dataset) -> Result<Vec<u32>, MlError> {
    d.rows().iter().map(|r| predict(m, &r.features).map(|rec| rec.predicted)).collect()
}

fn correct_fraction(m: &Model, d: &Dataset, metric: MetricKind) -> Result<MetricValue, MlError> {
    if d.is_empty() {
        return Err(MlError::EmptyDataset);
    }
    check_labels(d, m.architecture().classes())?;
    let preds = predictions(m, d)?;
    let correct = preds.iter().zip(d.rows()).filter(|(p, r)| **p == r.label).count() as u64;
    let total = d.len() as u64;
    Ok(MetricValue {
        metric,
        value: Decimal6::from_ratio(correct as i128, total as i128)?,
        numerator: correct,
        denominator: total,
        parameters: BTreeMap::new(),
    })
}

/// Fraction of rows whose predicted class equals the label.
pub fn accuracy(m: &Model, d: &Dataset) -> Result<MetricValue, MlError> {
    correct_fraction(m, d, MetricKind::Accuracy)
}

/// Accuracy over an adversarially perturbed dataset.
pub fn robust_accuracy(m: &Model, d_rob: &Dataset) -> Result<MetricValue, MlError> {
    correct_fraction(m, d_rob, MetricKind::RobustAccuracy)
}

/// `|P(pred = 0 | z = 0) - P(pred = 0 | z = 1)|`, computed as the exact
/// fraction `|a*d - c*b| / (b*d)` where group 0 has `a` class-0
/// predictions out of `b` rows and group 1 has `c` out of `d`. Rows in
/// other groups are ignored.
pub fn demographic_parity(m: &Model, d: &Dataset) -> Result<MetricValue, MlError> {
    if d.is_empty() {
        return Err(MlError::EmptyDataset);
    }
    let preds = predictions(m, d)?;
    let mut zero = [0u64; 2];
    let mut total = [0u64; 2];
    for (p, r) in preds.iter().zip(d.rows()) {
        if r.sensitive < 2 {
            let g = r.sensitive as usize;
            total[g] += 1;
            if *p == 0 {
                zero[g] += 1;
            }
        }
    }
    for g in 0..2 {
        if total[g] == 0 {
            return Err(MlError::EmptyGroup(g as u32));
        }
    }
    let num = (zero[0] as i128 * total[1] as i128 - zero[1] as i128 * total[0] as i128).unsigned_abs() as u64;
    let den = total[0] * total[1];
    let parameters = BTreeMap::from([
        ("group0_predicted_zero".to_string(), zero[0]),
        ("group0_total".to_string(), total[0]),
        ("group1_predicted_zero".to_string(), zero[1]),
        ("group1_total".to_string(), total[1]),
    ]);
    Ok(MetricValue {
        metric: MetricKind::DemographicParity,
        value: Decimal6::from_ratio(num as i128, den as i128)?,
        numerator: num,
        denominator: den,
        parameters,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DistributionKind {
    /// Distribution of the sensitive attribute.
    Marginal,
    /// Distribution of the sensitive attribute within each label.
    Conditional,
}

impl DistributionKind {
    pub fn name(self) -> &'static str {
        match self {
            DistributionKind::Marginal => "marginal",
            DistributionKind::Conditional => "conditional",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroupCount {
    pub group: u32,
    pub count: u64,
    pub ratio: Decimal6,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelGroups {
    pub label: u32,
    pub total: u64,
    pub groups: Vec<GroupCount>,
}

/// Exact group counts with derived ratios. Marginal properties fill
/// `groups`; conditional ones fill `by_label`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DistributionalProperty {
    pub kind: DistributionKind,
    pub total: u64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub groups: Vec<GroupCount>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub by_label: Vec<LabelGroups>,
}

fn group_counts(counts: &BTreeMap<u32, u64>, total: u64) -> Result<Vec<GroupCount>, MlError> {
    counts
        .iter()
        .map(|(&group, &count)| {
            Ok(GroupCount { group, count, ratio: Decimal6::from_ratio(count as i128, total as i128)? })
        })
        .collect()
}

pub fn distribution(d: &Dataset, kind: DistributionKind) -> Result<DistributionalProperty, MlError> {
    if d.is_empty() {
        return Err(MlError::EmptyDataset);
    }
    let total = d.len() as u64;
    match kind {
        DistributionKind::Marginal => {
            let mut counts = BTreeMap::new();
            for r in d.rows() {
                *counts.entry(r.sensitive).or_insert(0u64) += 1;
            }
            Ok(DistributionalProperty { kind, total, groups: group_counts(&counts, total)?, by_label: vec![] })
        }
        DistributionKind::Conditional => {
            let mut per_label: BTreeMap<u32, BTreeMap<u32, u64>> = BTreeMap::new();
            for r in d.rows() {
                *per_label.entry(r.label).or_default().entry(r.sensitive).or_insert(0) += 1;
            }
            let by_label = per_label
                .iter()
                .map(|(&label, counts)| {
                    let t: u64 = counts.values().sum();
                    Ok(LabelGroups { label, total: t, groups: group_counts(counts, t)? })
                })
                .collect::<Result<Vec<_>, MlError>>()?;
            Ok(DistributionalProperty { kind, total, groups: vec![], by_label })
        }
    }
}
