use serde_json::json;

use super::{AttType, Fragment, MeasureError};
use crate::ml::{train, Dataset, Model, TrainingConfig};

pub(super) fn measure(d: &Dataset, cfg: &TrainingConfig) -> Result<(Model, Fragment), MeasureError> {
    let model = train(d, cfg)?;
    let mut f = Fragment::new(AttType::PoT);
    f.digests.model_sha256 = Some(model.digest());
    f.digests.arch_sha256 = Some(cfg.architecture.digest());
    f.digests.dataset_sha256 = Some(d.digest());
    f.digests.config_sha256 = Some(cfg.digest());
    f.results = json!({ "training": cfg.to_canonical().to_value() });
    Ok((model, f))
}
