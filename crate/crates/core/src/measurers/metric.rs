use serde_json::{json, Value};

use super::{AttType, Fragment, MeasureError, TASK_TYPE};
use crate::hashcore::Decimal6;
use crate::ml::{accuracy as accuracy_metric, demographic_parity, fgsm_dataset, robust_accuracy, Dataset, MetricValue, Model};

fn model_index(mv: &MetricValue) -> Value {
    let mut entry = json!({
        "type": mv.metric.name(),
        "value": mv.value,
        "numerator": mv.numerator,
        "denominator": mv.denominator,
    });
    if !mv.parameters.is_empty() {
        entry["args"] = json!(mv.parameters);
    }
    json!([{ "task": { "type": TASK_TYPE }, "metrics": [entry] }])
}

fn metric_fragment(t: AttType, m: &Model, d: &Dataset, mv: &MetricValue) -> Fragment {
    let mut f = Fragment::new(t);
    f.digests.model_sha256 = Some(m.digest());
    f.digests.dataset_sha256 = Some(d.digest());
    f.results = model_index(mv);
    f
}

pub(super) fn accuracy(m: &Model, d: &Dataset) -> Result<Fragment, MeasureError> {
    Ok(metric_fragment(AttType::AccAtt, m, d, &accuracy_metric(m, d)?))
}

pub(super) fn fairness(m: &Model, d: &Dataset) -> Result<Fragment, MeasureError> {
    let mut f = metric_fragment(AttType::FairAtt, m, d, &demographic_parity(m, d)?);
    f.parameters.insert("sensitive_attribute".into(), json!("sensitive"));
    Ok(f)
}

/// FGSM generation (`RobustAtt-A`) followed by robust accuracy on the
/// generated set (`RobustAtt-B`).
pub(super) fn robustness(
    m: &Model,
    d_te: &Dataset,
    eps: Decimal6,
) -> Result<(Dataset, Fragment, Fragment), MeasureError> {
    let d_rob = fgsm_dataset(m, d_te, eps)?;
    let acc = robust_accuracy(m, &d_rob)?;
    let rob_digest = d_rob.digest();

    let mut gen = Fragment::new(AttType::RobustAttA);
    gen.digests.dataset_sha256 = Some(d_te.digest());
    gen.digests.model_sha256 = Some(m.digest());
    gen.digests.robust_dataset_sha256 = Some(rob_digest);
    gen.parameters.insert("attack".into(), json!("fgsm"));
    gen.parameters.insert("epsilon".into(), json!(eps));
    gen.results = json!({ "robust_dataset": { "rows": d_rob.len() } });

    let mut robacc = Fragment::new(AttType::RobustAttB);
    robacc.digests.model_sha256 = Some(m.digest());
    robacc.digests.robust_dataset_sha256 = Some(rob_digest);
    robacc.results = model_index(&acc);
    Ok((d_rob, gen, robacc))
}
