//! Objective terms: soft Dice, Bernoulli KL, the virtual adversarial
//! smoothness term, the critic objective and the generator's adversarial
//! surrogate.
//!
//! The value functions here evaluate without recording gradients. The
//! trainer builds the same terms on a [`Tape`] through the tape's loss ops.

use advseg_tensor::kernels::loss as k;
use advseg_tensor::{Element, Graph, ParamStore, Tape, Tensor};
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::critic::{critic_forward, CriticConfig, CriticMode};
use crate::error::{Error, Result};
use crate::rng::{stream, Purpose};
use crate::segnet::{predict, segnet_forward, SegNetConfig};

/// Confidence clip used by the critic terms.
pub const CONFIDENCE_CLIP: f64 = 1e-7;
/// Gradient norms below this make the direction search fall back.
pub const MIN_GRAD_NORM: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LossWeights {
    pub lambda_s: f64,
    pub lambda_v: f64,
    pub lambda_c: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        LossWeights { lambda_s: 1.0, lambda_v: 0.2, lambda_c: 0.3 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DiceConfig {
    pub smooth_eps: f64,
    pub numerator_factor: f64,
}

impl Default for DiceConfig {
    fn default() -> Self {
        DiceConfig { smooth_eps: 1.0, numerator_factor: 2.0 }
    }
}

/// The `[loss]` config section: term weights plus Dice options.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LossConfig {
    pub lambda_s: f64,
    pub lambda_v: f64,
    pub lambda_c: f64,
    pub smooth_eps: f64,
    pub numerator_factor: f64,
}

impl Default for LossConfig {
    fn default() -> Self {
        let (w, d) = (LossWeights::default(), DiceConfig::default());
        LossConfig {
            lambda_s: w.lambda_s,
            lambda_v: w.lambda_v,
            lambda_c: w.lambda_c,
            smooth_eps: d.smooth_eps,
            numerator_factor: d.numerator_factor,
        }
    }
}

impl LossConfig {
    pub fn weights(&self) -> LossWeights {
        LossWeights { lambda_s: self.lambda_s, lambda_v: self.lambda_v, lambda_c: self.lambda_c }
    }

    pub fn dice(&self) -> DiceConfig {
        DiceConfig { smooth_eps: self.smooth_eps, numerator_factor: self.numerator_factor }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("lambda_s", self.lambda_s), ("lambda_v", self.lambda_v), ("lambda_c", self.lambda_c)] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("loss.{name} must be a finite value >= 0, got {v}")));
            }
        }
        if !(self.smooth_eps > 0.0) {
            return Err(Error::Config(format!("loss.smooth_eps must be > 0, got {}", self.smooth_eps)));
        }
        if self.numerator_factor != 1.0 && self.numerator_factor != 2.0 {
            return Err(Error::Config(format!("loss.numerator_factor must be 1 or 2, got {}", self.numerator_factor)));
        }
        Ok(())
    }
}

/// Divergence target inside the smoothness term.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum VatTarget {
    /// The ground-truth region channels.
    #[default]
    Labels,
    /// The model's own clean-input prediction, held constant.
    Prediction,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VatConfig {
    pub eps_adv: f64,
    pub xi: f64,
    pub power_iters: usize,
    pub prob_clip: f64,
    pub target: VatTarget,
}

impl Default for VatConfig {
    fn default() -> Self {
        VatConfig { eps_adv: 0.05, xi: 1e-6, power_iters: 1, prob_clip: 1e-7, target: VatTarget::Labels }
    }
}

impl VatConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.eps_adv > 0.0 && self.xi > 0.0) {
            return Err(Error::Config("vat.eps_adv and vat.xi must be > 0".into()));
        }
        if self.power_iters == 0 {
            return Err(Error::Config("vat.power_iters must be at least 1".into()));
        }
        if !(self.prob_clip > 0.0 && self.prob_clip < 0.5) {
            return Err(Error::Config(format!("vat.prob_clip must lie in (0, 0.5), got {}", self.prob_clip)));
        }
        Ok(())
    }
}

/// Mean over batch items and classes of
/// `1 - (factor * <y, p> + eps) / (|y|_1 + |p|_1 + eps)`.
pub fn dice_loss<T: Element>(y: &Tensor<T>, yhat: &Tensor<T>, cfg: &DiceConfig) -> Result<f64> {
    Ok(k::soft_dice(y, yhat, cfg.smooth_eps, cfg.numerator_factor)?)
}

/// Mean Bernoulli KL divergence with `p` clipped to `[delta, 1 - delta]`.
pub fn bernoulli_kl<T: Element>(y: &Tensor<T>, p: &Tensor<T>, delta: f64) -> Result<f64> {
    Ok(k::bernoulli_kl(y, p, delta)?)
}

/// `-mean log psi(y) - mean log(1 - psi(yhat))` from the two confidence maps.
pub fn critic_loss_from_maps<T: Element>(psi_real: &Tensor<T>, psi_fake: &Tensor<T>) -> f64 {
    k::mean_neg_log(psi_real, CONFIDENCE_CLIP) + k::mean_neg_log1m(psi_fake, CONFIDENCE_CLIP)
}

/// `-mean log psi(yhat)`.
pub fn generator_adv_loss_from_map<T: Element>(psi_fake: &Tensor<T>) -> f64 {
    k::mean_neg_log(psi_fake, CONFIDENCE_CLIP)
}

fn confidence<T: Element>(
    cfg: &CriticConfig,
    params: &ParamStore<T>,
    mode: CriticMode<'_>,
    mask: &Tensor<T>,
    image: Option<&Tensor<T>>,
) -> Result<Tensor<T>> {
    let mut g = advseg_tensor::Eager;
    let bound = g.bind(params, false);
    let m = g.input(mask.clone(), false);
    let img = image.map(|t| g.input(t.clone(), false));
    let (y, _) = critic_forward(&mut g, cfg, &bound, &m, img.as_ref(), mode)?;
    Ok((*y).clone())
}

/// Critic objective for a real and a generated mask batch. `image` is used
/// only by an image-conditioned critic.
pub fn critic_loss<T: Element>(
    cfg: &CriticConfig,
    params: &ParamStore<T>,
    mode: CriticMode<'_>,
    y: &Tensor<T>,
    yhat: &Tensor<T>,
    image: Option<&Tensor<T>>,
) -> Result<f64> {
    let real = confidence(cfg, params, mode, y, image)?;
    let fake = confidence(cfg, params, mode, yhat, image)?;
    Ok(critic_loss_from_maps(&real, &fake))
}

pub fn generator_adv_loss<T: Element>(
    cfg: &CriticConfig,
    params: &ParamStore<T>,
    mode: CriticMode<'_>,
    yhat: &Tensor<T>,
    image: Option<&Tensor<T>>,
) -> Result<f64> {
    Ok(generator_adv_loss_from_map(&confidence(cfg, params, mode, yhat, image)?))
}

pub fn total_loss(dice: f64, vat: f64, adv: f64, w: &LossWeights) -> f64 {
    w.lambda_s * dice + w.lambda_v * vat + w.lambda_c * adv
}

/// An adversarial input perturbation with per-sample L2 norm `eps_adv`.
#[derive(Clone, Debug, PartialEq)]
pub struct Perturbation<T> {
    pub r: Tensor<T>,
    /// Per sample: whether the gradient vanished and the random start
    /// direction was used instead.
    pub fallback: Vec<bool>,
}

impl<T> Perturbation<T> {
    pub fn any_fallback(&self) -> bool {
        self.fallback.iter().any(|&f| f)
    }
}

/// Unit-norm copy of each batch item of `d`, or `None` where the norm is
/// below [`MIN_GRAD_NORM`].
fn per_sample_unit(d: &[f64], n: usize) -> Vec<Option<Vec<f64>>> {
    let s = d.len() / n;
    d.chunks(s)
        .map(|c| {
            let norm = c.iter().map(|v| v * v).sum::<f64>().sqrt();
            (norm >= MIN_GRAD_NORM && norm.is_finite()).then(|| c.iter().map(|v| v / norm).collect())
        })
        .collect()
}

/// Searches the virtual adversarial direction by power iteration: start
/// from a random unit direction `d`, then `power_iters` times replace it by
/// the normalized gradient of `KL(target, F(x + r))` at `r = xi * d`, with
/// the network parameters held constant.
pub fn compute_r_adv<T: Element>(
    seg: &SegNetConfig,
    params: &ParamStore<T>,
    x: &Tensor<T>,
    y: &Tensor<T>,
    cfg: &VatConfig,
    seed: u64,
) -> Result<Perturbation<T>> {
    let [n, ..] = x.dims5()?;
    let mut rng = stream(seed, Purpose::Vat, 0);
    let raw: Vec<f64> = (0..x.len()).map(|_| StandardNormal.sample(&mut rng)).collect();
    let start: Vec<Vec<f64>> = per_sample_unit(&raw, n)
        .into_iter()
        .map(|d| d.expect("gaussian draw has a positive norm"))
        .collect();
    let target = vat_target(seg, params, x, y, cfg)?;
    let mut dir = start.clone();
    let mut fallback = vec![false; n];
    for _ in 0..cfg.power_iters {
        let probe = Tensor::new(x.shape().to_vec(), dir.concat().into_iter().map(|v| T::cast_f64(cfg.xi * v)).collect())?;
        let mut tape = Tape::new();
        let bound = tape.bind(params, false);
        let r = tape.input(probe, true);
        let xc = tape.input(x.clone(), false);
        let xin = tape.add(&xc, &r)?;
        let p = segnet_forward(&mut tape, seg, &bound, &xin)?;
        let kl = tape.bernoulli_kl(target.clone(), p, cfg.prob_clip)?;
        let mut grads = tape.backward(kl)?;
        let g: Vec<f64> = match grads.take(r) {
            Some(g) => g.data().iter().map(|v| v.as_f64()).collect(),
            None => vec![0.0; x.len()],
        };
        for (i, unit) in per_sample_unit(&g, n).into_iter().enumerate() {
            match unit {
                Some(u) => {
                    dir[i] = u;
                    fallback[i] = false;
                }
                None => {
                    dir[i] = start[i].clone();
                    fallback[i] = true;
                }
            }
        }
    }
    let r = dir.concat().into_iter().map(|v| T::cast_f64(cfg.eps_adv * v)).collect();
    Ok(Perturbation { r: Tensor::new(x.shape().to_vec(), r)?, fallback })
}

/// Target of the smoothness term for `cfg.target`.
pub fn vat_target<T: Element>(seg: &SegNetConfig, params: &ParamStore<T>, x: &Tensor<T>, y: &Tensor<T>, cfg: &VatConfig) -> Result<Tensor<T>> {
    match cfg.target {
        VatTarget::Labels => Ok(y.clone()),
        VatTarget::Prediction => predict(seg, params, x.clone()),
    }
}

/// `KL(target, F(x + r_adv))`.
pub fn vat_loss<T: Element>(
    seg: &SegNetConfig,
    params: &ParamStore<T>,
    x: &Tensor<T>,
    y: &Tensor<T>,
    cfg: &VatConfig,
    seed: u64,
) -> Result<f64> {
    let pert = compute_r_adv(seg, params, x, y, cfg, seed)?;
    let mut xa = x.clone();
    xa.add_assign(&pert.r);
    let p = predict(seg, params, xa)?;
    bernoulli_kl(&vat_target(seg, params, x, y, cfg)?, &p, cfg.prob_clip)
}
