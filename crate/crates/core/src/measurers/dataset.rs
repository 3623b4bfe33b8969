use serde_json::json;

use super::{AttType, Fragment, MeasureError};
use crate::ml::{distribution, Dataset, DistributionKind};

pub(super) fn measure(d: &Dataset, kind: DistributionKind) -> Result<Fragment, MeasureError> {
    let p = distribution(d, kind)?;
    let mut f = Fragment::new(AttType::DistAtt);
    f.digests.dataset_sha256 = Some(d.digest());
    f.parameters.insert("attribute".into(), json!("sensitive"));
    f.results = json!({ "distribution": p });
    Ok(f)
}
