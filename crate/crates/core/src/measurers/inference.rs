use serde_json::json;

use super::{AttType, Fragment, MeasureError};
use crate::hashcore::Decimal6;
use crate::ml::{predict, InferenceRecord, Model};

pub(super) fn measure(m: &Model, input: &[Decimal6]) -> Result<(InferenceRecord, Fragment), MeasureError> {
    let record = predict(m, input)?;
    let mut f = Fragment::new(AttType::IOAtt);
    f.digests.model_sha256 = Some(m.digest());
    f.digests.input_sha256 = Some(record.input_digest());
    f.digests.output_sha256 = Some(record.output_digest());
    f.results = json!({ "output": record.output_canonical().to_value() });
    Ok((record, f))
}
