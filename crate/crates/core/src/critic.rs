//! Fully convolutional per-voxel critic.
//!
//! Three conv3x3x3 + BatchNorm + LeakyReLU blocks followed by a conv3x3x3
//! to one channel and a sigmoid. Every convolution has stride 1 and
//! padding 1, so the confidence map has the input's spatial size.

use std::collections::BTreeMap;

use advseg_tensor::{BatchMoments, BatchNormMode, Bound, Eager, Element, Graph, ParamStore, Tensor};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{stream, Purpose};
use crate::segnet::conv_init;

pub const BN_EPS: f64 = 1e-5;
/// Image channels appended to the mask when conditioning on the image.
pub const IMAGE_CHANNELS: usize = 4;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CriticConfig {
    pub in_channels: usize,
    pub widths: Vec<usize>,
    pub leaky_slope: f64,
    pub condition_on_image: bool,
    /// Weight of the newest batch in the running statistics.
    pub bn_momentum: f64,
}

impl Default for CriticConfig {
    fn default() -> Self {
        CriticConfig { in_channels: 3, widths: vec![64, 128, 256], leaky_slope: 0.2, condition_on_image: false, bn_momentum: 0.1 }
    }
}

impl CriticConfig {
    pub fn validate(&self) -> Result<()> {
        if self.widths.len() != 3 || self.widths.contains(&0) {
            return Err(Error::Config(format!("critic.widths must hold three positive widths, got {:?}", self.widths)));
        }
        if self.in_channels == 0 {
            return Err(Error::Config("critic.in_channels must be positive".into()));
        }
        if !(self.leaky_slope >= 0.0 && self.leaky_slope < 1.0) {
            return Err(Error::Config(format!("critic.leaky_slope must lie in [0, 1), got {}", self.leaky_slope)));
        }
        if !(self.bn_momentum > 0.0 && self.bn_momentum <= 1.0) {
            return Err(Error::Config(format!("critic.bn_momentum must lie in (0, 1], got {}", self.bn_momentum)));
        }
        Ok(())
    }

    /// Input channels actually consumed, including the image when conditioned.
    pub fn input_channels(&self) -> usize {
        self.in_channels + if self.condition_on_image { IMAGE_CHANNELS } else { 0 }
    }

    /// Output widths of the four convolutions.
    pub fn layer_widths(&self) -> Vec<usize> {
        let mut w = self.widths.clone();
        w.push(1);
        w
    }
}

/// Running batch-norm statistics, keyed `bn1`..`bn3`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunningStats {
    pub mean: BTreeMap<String, Vec<f64>>,
    pub var: BTreeMap<String, Vec<f64>>,
}

impl RunningStats {
    pub fn new(cfg: &CriticConfig) -> Self {
        let mut mean = BTreeMap::new();
        let mut var = BTreeMap::new();
        for (i, &w) in cfg.widths.iter().enumerate() {
            mean.insert(format!("bn{}", i + 1), vec![0.0; w]);
            var.insert(format!("bn{}", i + 1), vec![1.0; w]);
        }
        RunningStats { mean, var }
    }

    /// `running = (1 - momentum) * running + momentum * batch` for each layer.
    pub fn update(&mut self, moments: &[BatchMoments], momentum: f64) {
        for (i, m) in moments.iter().enumerate() {
            let key = format!("bn{}", i + 1);
            for (r, b) in self.mean.get_mut(&key).expect("layer exists").iter_mut().zip(&m.mean) {
                *r = (1.0 - momentum) * *r + momentum * b;
            }
            for (r, b) in self.var.get_mut(&key).expect("layer exists").iter_mut().zip(&m.var) {
                *r = (1.0 - momentum) * *r + momentum * b;
            }
        }
    }
}

/// How the critic normalizes: batch statistics, or the stored running ones.
#[derive(Clone, Copy, Debug)]
pub enum CriticMode<'a> {
    Train,
    Eval(&'a RunningStats),
}

pub fn build_critic<T: Element>(cfg: &CriticConfig, seed: u64) -> Result<ParamStore<T>> {
    cfg.validate()?;
    let mut rng = stream(seed, Purpose::CriticInit, 0);
    let mut p = ParamStore::new();
    let mut cin = cfg.input_channels();
    for (i, &w) in cfg.layer_widths().iter().enumerate() {
        conv_init(&mut p, &mut rng, &format!("conv{}", i + 1), w, cin, 3);
        if i < 3 {
            p.insert(format!("bn{}.gamma", i + 1), Tensor::full(vec![w], T::one()));
            p.insert(format!("bn{}.beta", i + 1), Tensor::zeros(vec![w]));
        }
        cin = w;
    }
    Ok(p)
}

/// Confidence map `(N, 1, D, H, W)` for a mask batch `(N, 3, D, H, W)`, the
/// image batch being appended when the critic is image-conditioned. In
/// training mode the batch moments of each normalization layer are returned
/// so the caller can decide whether to fold them into the running stats.
pub fn critic_forward<T: Element, G: Graph<T>>(
    g: &mut G,
    cfg: &CriticConfig,
    p: &Bound<G::Value>,
    mask: &G::Value,
    image: Option<&G::Value>,
    mode: CriticMode<'_>,
) -> Result<(G::Value, Vec<BatchMoments>)> {
    let input = match (cfg.condition_on_image, image) {
        (true, Some(img)) => g.concat_channels(mask, img)?,
        (true, None) => return Err(Error::Shape("image-conditioned critic needs the image batch".into())),
        (false, _) => mask.clone(),
    };
    let s = g.value(&input).shape().to_vec();
    if s.len() != 5 || s[1] != cfg.input_channels() {
        return Err(Error::Shape(format!("critic expects (N, {}, D, H, W), got {s:?}", cfg.input_channels())));
    }
    if s[2..].iter().any(|&d| d < 3) {
        return Err(Error::Shape(format!("critic needs spatial dims of at least 3, got {:?}", &s[2..])));
    }
    let mut h = input;
    let mut moments = Vec::new();
    for i in 1..=4 {
        h = g.conv3d(&h, p.get(&format!("conv{i}.weight"))?, Some(p.get(&format!("conv{i}.bias"))?), 1)?;
        if i == 4 {
            break;
        }
        let key = format!("bn{i}");
        let bn_mode = match mode {
            CriticMode::Train => BatchNormMode::Train,
            CriticMode::Eval(stats) => BatchNormMode::Eval { mean: &stats.mean[&key], var: &stats.var[&key] },
        };
        let (y, m) = g.batch_norm(&h, p.get(&format!("{key}.gamma"))?, p.get(&format!("{key}.beta"))?, &bn_mode, BN_EPS)?;
        moments.extend(m);
        h = g.leaky_relu(&y, cfg.leaky_slope);
    }
    Ok((g.sigmoid(&h), moments))
}

/// Evaluation-mode confidence map.
pub fn critic_predict<T: Element>(
    cfg: &CriticConfig,
    params: &ParamStore<T>,
    stats: &RunningStats,
    mask: Tensor<T>,
    image: Option<Tensor<T>>,
) -> Result<Tensor<T>> {
    let mut g = Eager;
    let bound = g.bind(params, false);
    let m = g.input(mask, false);
    let img = image.map(|t| g.input(t, false));
    let (y, _) = critic_forward(&mut g, cfg, &bound, &m, img.as_ref(), CriticMode::Eval(stats))?;
    Ok((*y).clone())
}
