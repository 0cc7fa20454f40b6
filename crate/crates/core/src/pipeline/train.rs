//! Training entry points over dataset directories.

use std::path::Path;

use super::dataset::{load_pairs, load_sequences};
use super::write_atomic;
use crate::error::{Error, Result};
use crate::inpaint::{train_inpainter_with, InpainterConfig, TrainedInpainter};
use crate::predictor::{train_predictor, PredictorConfig, TrainedPredictor};

/// Trains the keypoint predictor on `data_dir/sequences` and writes its
/// checkpoint to `out`. Input and output widths are taken from the data.
pub fn train_keypoints_from_dir(data_dir: &Path, config: &PredictorConfig, out: &Path) -> Result<TrainedPredictor> {
    let pairs = load_sequences(data_dir)?;
    let first = pairs.first().ok_or(Error::EmptyDataset)?;
    let config = PredictorConfig {
        input_dim: first.features.first().map_or(0, Vec::len),
        output_dim: first.targets.first().map_or(0, Vec::len),
        ..config.clone()
    };
    let trained = train_predictor(&pairs, &config)?;
    write_atomic(out, trained.model.to_checkpoint().to_json().as_bytes())?;
    Ok(trained)
}

/// Trains the in-painter on `data_dir/pairs` and writes its checkpoint to `out`.
pub fn train_inpainter_from_dir(
    data_dir: &Path,
    config: &InpainterConfig,
    out: &Path,
    on_epoch: impl FnMut(usize, f64),
) -> Result<TrainedInpainter> {
    let pairs = load_pairs(data_dir)?;
    let trained = train_inpainter_with(&pairs, config, on_epoch)?;
    write_atomic(out, trained.model.to_checkpoint().to_json().as_bytes())?;
    Ok(trained)
}
