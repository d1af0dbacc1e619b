//! Whole-volume prediction: normalize, pad, forward, crop, threshold,
//! decode to labels.

use advseg_tensor::{ParamStore, Tensor};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::preprocess::{crop_or_pad, normalize, PreprocessConfig};
use crate::segnet::{predict, SegNetConfig};
use crate::volume_io::{channels_to_labels, LabelMap, RegionChannels, Volume, MODALITIES};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InferenceConfig {
    pub threshold: f64,
    pub pad_multiple: usize,
    pub emit_probabilities: bool,
}

impl Default for InferenceConfig {
    fn default() -> Self {
        InferenceConfig { threshold: 0.5, pad_multiple: 16, emit_probabilities: false }
    }
}

impl InferenceConfig {
    pub fn validate(&self, model: &SegNetConfig) -> Result<()> {
        if !(self.threshold > 0.0 && self.threshold < 1.0) {
            return Err(Error::Config(format!("inference.threshold must lie in (0, 1), got {}", self.threshold)));
        }
        if self.pad_multiple == 0 || !self.pad_multiple.is_multiple_of(model.divisor()) {
            return Err(Error::Config(format!(
                "inference.pad_multiple {} must be a positive multiple of {}",
                self.pad_multiple,
                model.divisor()
            )));
        }
        Ok(())
    }
}

/// Region probabilities `(3, D, H, W)` in ET, TC, WT order.
#[derive(Clone, Debug, PartialEq)]
pub struct Prediction {
    pub data: Tensor<f32>,
    pub case_id: String,
}

/// Voxel-wise `p > threshold` per region channel.
pub fn threshold(p: &Tensor<f32>, t: f64) -> RegionChannels {
    RegionChannels { data: p.map(|v| if v as f64 > t { 1.0 } else { 0.0 }) }
}

pub fn predict_probabilities(
    model: &SegNetConfig,
    params: &ParamStore<f32>,
    v: &Volume,
    pre: &PreprocessConfig,
    cfg: &InferenceConfig,
) -> Result<Prediction> {
    if v.channels() != MODALITIES.len() {
        return Err(Error::Shape(format!("{}: expected 4 modalities, got {}", v.case_id, v.channels())));
    }
    cfg.validate(model)?;
    let (padded, info) = crop_or_pad(&normalize(v, pre), cfg.pad_multiple);
    let [d, h, w] = info.padded;
    let x = padded.data.reshape(vec![1, 4, d, h, w])?;
    let p = predict(model, params, x)?.reshape(vec![3, d, h, w])?;
    Ok(Prediction { data: info.crop(&p)?, case_id: v.case_id.clone() })
}

/// Label map for a case plus, when `cfg.emit_probabilities` is set, the
/// region probabilities it was thresholded from.
pub fn predict_case(
    model: &SegNetConfig,
    params: &ParamStore<f32>,
    v: &Volume,
    pre: &PreprocessConfig,
    cfg: &InferenceConfig,
) -> Result<(LabelMap, Option<Prediction>)> {
    let prob = predict_probabilities(model, params, v, pre, cfg)?;
    let labels = channels_to_labels(&threshold(&prob.data, cfg.threshold), &v.case_id)?;
    Ok((labels, cfg.emit_probabilities.then_some(prob)))
}
