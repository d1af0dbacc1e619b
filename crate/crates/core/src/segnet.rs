//! Five-level 3-D U-Net with group normalization and a sigmoid head.
//!
//! Encoder level `i` has width `base_features * 2^i` and applies two
//! conv3x3x3 + GroupNorm + ReLU blocks; levels are joined by 2x2x2 max
//! pooling. Each decoder level upsamples trilinearly by two, halves the
//! width with a conv3x3x3, concatenates the matching encoder output, then
//! applies two conv + GN + ReLU blocks. A 1x1x1 conv and a sigmoid produce
//! the ET, TC, WT probabilities.
//!
//! Parameters live in a [`ParamStore`] keyed by paths such as
//! `enc0.conv1.weight`, `enc3.gn2.gamma`, `dec1.up.bias` and `head.weight`.

use advseg_tensor::{Bound, Eager, Element, Graph, ParamStore, Tensor};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{stream, Purpose};

pub const GN_EPS: f64 = 1e-5;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SegNetConfig {
    pub in_channels: usize,
    pub out_channels: usize,
    pub base_features: usize,
    pub levels: usize,
    pub norm_groups: usize,
}

impl Default for SegNetConfig {
    fn default() -> Self {
        SegNetConfig { in_channels: 4, out_channels: 3, base_features: 48, levels: 5, norm_groups: 8 }
    }
}

impl SegNetConfig {
    pub fn validate(&self) -> Result<()> {
        if self.levels < 2 {
            return Err(Error::Config(format!("model.levels must be at least 2, got {}", self.levels)));
        }
        if self.out_channels != 3 {
            return Err(Error::Config(format!("model.out_channels must be 3, got {}", self.out_channels)));
        }
        if self.in_channels == 0 || self.base_features == 0 || self.norm_groups == 0 {
            return Err(Error::Config("model.in_channels, base_features and norm_groups must be positive".into()));
        }
        if !self.base_features.is_multiple_of(self.norm_groups) {
            return Err(Error::Config(format!(
                "model.base_features {} is not divisible by model.norm_groups {}",
                self.base_features, self.norm_groups
            )));
        }
        Ok(())
    }

    pub fn widths(&self) -> Vec<usize> {
        (0..self.levels).map(|i| self.base_features << i).collect()
    }

    /// Required divisor of every spatial dim.
    pub fn divisor(&self) -> usize {
        1 << (self.levels - 1)
    }
}

/// Draws He-uniform weights with bound `sqrt(6 / fan_in)` and zero bias.
pub(crate) fn conv_init<T: Element>(
    p: &mut ParamStore<T>,
    rng: &mut impl Rng,
    name: &str,
    cout: usize,
    cin: usize,
    k: usize,
) {
    let fan_in = (cin * k * k * k) as f64;
    let bound = (6.0 / fan_in).sqrt();
    let w = Tensor::from_fn(vec![cout, cin, k, k, k], |_| T::cast_f64(rng.random_range(-bound..bound)));
    p.insert(format!("{name}.weight"), w);
    p.insert(format!("{name}.bias"), Tensor::zeros(vec![cout]));
}

fn norm_init<T: Element>(p: &mut ParamStore<T>, name: &str, c: usize) {
    p.insert(format!("{name}.gamma"), Tensor::full(vec![c], T::one()));
    p.insert(format!("{name}.beta"), Tensor::zeros(vec![c]));
}

pub fn build_segnet<T: Element>(cfg: &SegNetConfig, seed: u64) -> Result<ParamStore<T>> {
    cfg.validate()?;
    let mut rng = stream(seed, Purpose::SegInit, 0);
    let mut p = ParamStore::new();
    let w = cfg.widths();
    let mut cin = cfg.in_channels;
    for (i, &wi) in w.iter().enumerate() {
        conv_init(&mut p, &mut rng, &format!("enc{i}.conv1"), wi, cin, 3);
        norm_init(&mut p, &format!("enc{i}.gn1"), wi);
        conv_init(&mut p, &mut rng, &format!("enc{i}.conv2"), wi, wi, 3);
        norm_init(&mut p, &format!("enc{i}.gn2"), wi);
        cin = wi;
    }
    for i in (0..cfg.levels - 1).rev() {
        conv_init(&mut p, &mut rng, &format!("dec{i}.up"), w[i], w[i + 1], 3);
        conv_init(&mut p, &mut rng, &format!("dec{i}.conv1"), w[i], 2 * w[i], 3);
        norm_init(&mut p, &format!("dec{i}.gn1"), w[i]);
        conv_init(&mut p, &mut rng, &format!("dec{i}.conv2"), w[i], w[i], 3);
        norm_init(&mut p, &format!("dec{i}.gn2"), w[i]);
    }
    conv_init(&mut p, &mut rng, "head", cfg.out_channels, w[0], 1);
    Ok(p)
}

fn conv_gn_relu<T: Element, G: Graph<T>>(
    g: &mut G,
    p: &Bound<G::Value>,
    x: &G::Value,
    conv: &str,
    gn: &str,
    groups: usize,
) -> Result<G::Value> {
    let y = g.conv3d(x, p.get(&format!("{conv}.weight"))?, Some(p.get(&format!("{conv}.bias"))?), 1)?;
    let y = g.group_norm(&y, p.get(&format!("{gn}.gamma"))?, p.get(&format!("{gn}.beta"))?, groups, GN_EPS)?;
    Ok(g.relu(&y))
}

/// Checks a `(N, C, D, H, W)` input against the configuration.
pub fn check_input(cfg: &SegNetConfig, shape: &[usize]) -> Result<()> {
    if shape.len() != 5 || shape[1] != cfg.in_channels {
        return Err(Error::Shape(format!("segnet expects (N, {}, D, H, W), got {shape:?}", cfg.in_channels)));
    }
    let m = cfg.divisor();
    if shape[2..].iter().any(|&d| d == 0 || d % m != 0) {
        return Err(Error::NotDivisible { multiple: m, dims: shape[2..].to_vec() });
    }
    Ok(())
}

/// Runs the network on any graph backend; returns probabilities shaped
/// `(N, 3, D, H, W)`.
pub fn segnet_forward<T: Element, G: Graph<T>>(
    g: &mut G,
    cfg: &SegNetConfig,
    p: &Bound<G::Value>,
    x: &G::Value,
) -> Result<G::Value> {
    check_input(cfg, g.value(x).shape())?;
    let groups = cfg.norm_groups;
    let mut skips = Vec::with_capacity(cfg.levels);
    let mut h = x.clone();
    for i in 0..cfg.levels {
        if i > 0 {
            h = g.max_pool2(&h)?;
        }
        h = conv_gn_relu(g, p, &h, &format!("enc{i}.conv1"), &format!("enc{i}.gn1"), groups)?;
        h = conv_gn_relu(g, p, &h, &format!("enc{i}.conv2"), &format!("enc{i}.gn2"), groups)?;
        skips.push(h.clone());
    }
    skips.pop();
    for i in (0..cfg.levels - 1).rev() {
        let up = g.upsample2(&h)?;
        let up = g.conv3d(&up, p.get(&format!("dec{i}.up.weight"))?, Some(p.get(&format!("dec{i}.up.bias"))?), 1)?;
        let skip = skips.pop().expect("one skip per decoder level");
        h = g.concat_channels(&skip, &up)?;
        h = conv_gn_relu(g, p, &h, &format!("dec{i}.conv1"), &format!("dec{i}.gn1"), groups)?;
        h = conv_gn_relu(g, p, &h, &format!("dec{i}.conv2"), &format!("dec{i}.gn2"), groups)?;
    }
    let logits = g.conv3d(&h, p.get("head.weight")?, Some(p.get("head.bias")?), 0)?;
    Ok(g.sigmoid(&logits))
}

/// Evaluation-mode forward pass without gradient bookkeeping.
pub fn predict<T: Element>(cfg: &SegNetConfig, params: &ParamStore<T>, x: Tensor<T>) -> Result<Tensor<T>> {
    let mut g = Eager;
    let bound = g.bind(params, false);
    let xv = g.input(x, false);
    let y = segnet_forward(&mut g, cfg, &bound, &xv)?;
    drop(bound);
    Ok(std::rc::Rc::try_unwrap(y).unwrap_or_else(|rc| (*rc).clone()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn widths_double_per_level() {
        let cfg = SegNetConfig::default();
        assert_eq!(cfg.widths(), vec![48, 96, 192, 384, 768]);
        let p = build_segnet::<f32>(&cfg, 0).unwrap();
        assert_eq!(p.get("enc4.conv2.weight").unwrap().shape(), &[768, 768, 3, 3, 3]);
        assert_eq!(p.get("dec0.up.weight").unwrap().shape(), &[48, 96, 3, 3, 3]);
        assert_eq!(p.get("dec0.conv1.weight").unwrap().shape(), &[48, 96, 3, 3, 3]);
        assert_eq!(p.get("head.weight").unwrap().shape(), &[3, 48, 1, 1, 1]);
        let small = SegNetConfig { base_features: 8, ..cfg };
        assert_eq!(small.widths(), vec![8, 16, 32, 64, 128]);
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let bad = SegNetConfig { base_features: 12, ..Default::default() };
        assert!(matches!(build_segnet::<f32>(&bad, 0), Err(Error::Config(_))));
        let bad = SegNetConfig { levels: 1, ..Default::default() };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn rejects_indivisible_shapes() {
        let cfg = SegNetConfig { base_features: 2, norm_groups: 2, ..Default::default() };
        let p = build_segnet::<f32>(&cfg, 0).unwrap();
        let err = predict(&cfg, &p, Tensor::zeros(vec![1, 4, 30, 30, 30])).unwrap_err();
        assert_eq!(err.to_string(), "shape not divisible by 16: spatial dims [30, 30, 30]");
    }
}
