//! Alternating critic / segmenter optimization.
//!
//! Each batch runs `critic_steps_per_gen_step` critic updates followed by
//! one segmentation update. All randomness (epoch order, patch positions,
//! perturbation directions) is derived from the run seed and the step
//! counters, so a run resumed from a checkpoint continues exactly.

pub mod checkpoint;

use std::fs::{self, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};

use advseg_tensor::{Graph, ParamStore, Tape, Tensor, Var};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::critic::{build_critic, critic_forward, CriticMode, RunningStats};
use crate::error::{Error, Result};
use crate::inference::predict_case;
use crate::losses::{compute_r_adv, VatTarget, CONFIDENCE_CLIP};
use crate::metrics::{evaluate_case, MetricsRecord};
use crate::optim::{Adam, RmsProp};
use crate::preprocess::{extract_training_patch, normalize};
use crate::rng::{derive, stream, Purpose};
use crate::segnet::{build_segnet, predict, segnet_forward};
use crate::volume_io::{labels_to_channels, Dataset, LabelMap, Volume};

pub use checkpoint::{load_checkpoint, param_checksum, save_checkpoint};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub epochs: u64,
    pub batch_size: usize,
    pub seg_lr: f64,
    pub critic_lr: f64,
    pub adam_betas: [f64; 2],
    pub rmsprop_alpha: f64,
    pub split_fraction: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub checkpoint_dir: PathBuf,
    /// Progress is printed every `log_every` steps; 0 silences it. The CSV
    /// log always gets every step.
    pub log_every: u64,
    pub critic_steps_per_gen_step: usize,
    /// Stop after this many segmentation updates in total.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_steps: Option<u64>,
    /// Validate every this many epochs (the final epoch always validates).
    pub val_every: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 100,
            batch_size: 2,
            seg_lr: 2e-4,
            critic_lr: 5e-5,
            adam_betas: [0.9, 0.999],
            rmsprop_alpha: 0.99,
            split_fraction: 0.8,
            seed: None,
            checkpoint_dir: PathBuf::from("runs/default"),
            log_every: 10,
            critic_steps_per_gen_step: 1,
            max_steps: None,
            val_every: 1,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.split_fraction > 0.0 && self.split_fraction < 1.0) {
            return Err(Error::Config(format!("train.split_fraction must lie in (0, 1), got {}", self.split_fraction)));
        }
        if !(self.seg_lr > 0.0 && self.critic_lr > 0.0) {
            return Err(Error::Config("train.seg_lr and train.critic_lr must be > 0".into()));
        }
        if self.batch_size == 0 || self.epochs == 0 || self.val_every == 0 {
            return Err(Error::Config("train.batch_size, train.epochs and train.val_every must be at least 1".into()));
        }
        let [b1, b2] = self.adam_betas;
        if !((0.0..1.0).contains(&b1) && (0.0..1.0).contains(&b2) && (0.0..1.0).contains(&self.rmsprop_alpha)) {
            return Err(Error::Config("train.adam_betas and train.rmsprop_alpha must lie in [0, 1)".into()));
        }
        Ok(())
    }
}

/// Deterministic shuffled split by case: `floor(fraction * m)` training
/// cases, kept within `[1, m - 1]`, and the rest for validation.
pub fn split_dataset(ds: &Dataset, fraction: f64, seed: u64) -> Result<(Dataset, Dataset)> {
    let m = ds.len();
    if m < 2 {
        return Err(Error::Config(format!("need at least 2 cases to split, got {m}")));
    }
    let n_train = ((fraction * m as f64 + 1e-9).floor() as usize).clamp(1, m - 1);
    let mut order: Vec<usize> = (0..m).collect();
    order.shuffle(&mut stream(seed, Purpose::Split, 0));
    let pick = |idx: &[usize]| {
        let mut idx = idx.to_vec();
        idx.sort_unstable();
        Dataset { cases: idx.iter().map(|&i| ds.cases[i].clone()).collect() }
    };
    Ok((pick(&order[..n_train]), pick(&order[n_train..])))
}

/// One training batch; `x` is `(N, 4, D, H, W)`, `y` is `(N, 3, D, H, W)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Batch {
    pub ids: Vec<String>,
    pub x: Tensor<f32>,
    pub y: Tensor<f32>,
}

impl Batch {
    /// Stacks already-shaped image/label pairs.
    pub fn from_pairs(pairs: &[(Volume, LabelMap)]) -> Result<Self> {
        let xs = pairs.iter().map(|(v, _)| v.data.clone()).collect::<Vec<_>>();
        let ys = pairs.iter().map(|(_, l)| labels_to_channels(l).map(|rc| rc.data)).collect::<Result<Vec<_>>>()?;
        Ok(Batch {
            ids: pairs.iter().map(|(v, _)| v.case_id.clone()).collect(),
            x: Tensor::stack(&xs)?,
            y: Tensor::stack(&ys)?,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: u64,
    pub dice: Option<f64>,
    pub vat: Option<f64>,
    pub adv: Option<f64>,
    pub critic_loss: Option<f64>,
    pub val_dice: Option<f64>,
}

/// Everything a checkpoint must hold to continue a run.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainState {
    pub seed: u64,
    /// Completed epochs.
    pub epoch: u64,
    /// Completed segmentation updates.
    pub global_step: u64,
    pub seg: ParamStore<f32>,
    pub seg_opt: Adam<f32>,
    pub critic: ParamStore<f32>,
    pub critic_opt: RmsProp<f32>,
    pub critic_stats: RunningStats,
    pub best_val_dice: Option<f64>,
    pub history: Vec<EpochRecord>,
}

/// Loss components of one segmentation update. Terms with zero weight are
/// not computed and stay `None`.
#[derive(Clone, Debug, PartialEq)]
pub struct GenLosses {
    pub dice: f64,
    pub vat: Option<f64>,
    pub adv: Option<f64>,
    pub total: f64,
    pub vat_fallback: bool,
    /// Per-sample L2 norms of the perturbation, empty without the VAT term.
    pub r_adv_norms: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StepRecord {
    pub step: u64,
    pub epoch: u64,
    pub case_ids: Vec<String>,
    pub dice: f64,
    pub vat: Option<f64>,
    pub adv: Option<f64>,
    pub critic_loss: Option<f64>,
    pub lr: f64,
    pub vat_fallback: bool,
    pub r_adv_norms: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FitReport {
    pub steps: Vec<StepRecord>,
    /// Per-case metrics from the last validation pass.
    pub val_records: Vec<MetricsRecord>,
}

pub struct Trainer {
    pub cfg: RunConfig,
    pub state: TrainState,
    /// Where checkpoints, logs and diagnostics go; `None` keeps everything
    /// in memory.
    pub out_dir: Option<PathBuf>,
}

fn stats_of(t: &Tensor<f32>) -> serde_json::Value {
    let d = t.data();
    let finite = d.iter().filter(|v| v.is_finite()).count();
    let (mn, mx) = d.iter().filter(|v| v.is_finite()).fold((f32::INFINITY, f32::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    serde_json::json!({ "shape": t.shape(), "finite": finite, "len": d.len(), "min": mn, "max": mx })
}

impl Trainer {
    pub fn new(cfg: RunConfig, seed: u64, out_dir: Option<PathBuf>) -> Result<Self> {
        cfg.validate()?;
        let seg = build_segnet::<f32>(&cfg.model, seed)?;
        let critic = build_critic::<f32>(&cfg.critic, seed)?;
        let t = &cfg.train;
        let state = TrainState {
            seed,
            epoch: 0,
            global_step: 0,
            seg_opt: Adam::new(&seg, t.seg_lr, t.adam_betas[0], t.adam_betas[1]),
            critic_opt: RmsProp::new(&critic, t.critic_lr, t.rmsprop_alpha),
            critic_stats: RunningStats::new(&cfg.critic),
            seg,
            critic,
            best_val_dice: None,
            history: Vec::new(),
        };
        Ok(Trainer { cfg, state, out_dir })
    }

    /// Continues from a checkpoint. Training-loop settings (epochs, logging,
    /// step limits) come from `cfg`; network and optimizer settings must
    /// match the checkpoint.
    pub fn resume(cfg: RunConfig, path: &Path, out_dir: Option<PathBuf>) -> Result<Self> {
        cfg.validate()?;
        let (saved, state) = load_checkpoint(path)?;
        if saved.model != cfg.model || saved.critic != cfg.critic {
            return Err(Error::Config(format!("{}: model or critic configuration differs from the checkpoint", path.display())));
        }
        Ok(Trainer { cfg, state, out_dir })
    }

    fn dump_nonfinite(&self, b: &Batch, what: &str, values: serde_json::Value) -> Error {
        let step = self.state.global_step;
        let dir = self.out_dir.clone().unwrap_or_else(std::env::temp_dir);
        let path = dir.join(format!("nonfinite_step{step}.json"));
        let report = serde_json::json!({
            "step": step,
            "epoch": self.state.epoch,
            "phase": what,
            "case_ids": b.ids,
            "losses": values,
            "x": stats_of(&b.x),
            "y": stats_of(&b.y),
            "seg_params_finite": self.state.seg.is_finite(),
            "critic_params_finite": self.state.critic.is_finite(),
        });
        let _ = fs::create_dir_all(&dir);
        let _ = fs::write(&path, serde_json::to_string_pretty(&report).unwrap_or_default());
        Error::NonFinite { step, dump: path }
    }

    fn image_for_critic<'a>(&self, b: &'a Batch) -> Option<&'a Tensor<f32>> {
        self.cfg.critic.condition_on_image.then_some(&b.x)
    }

    /// One critic update on `(y, F(x))`; the segmentation output is
    /// computed without a tape, so no gradient reaches its parameters.
    /// Running statistics absorb the real batch, then the generated one.
    pub fn critic_step(&mut self, b: &Batch) -> Result<f64> {
        let yhat = predict(&self.cfg.model, &self.state.seg, b.x.clone())?;
        let ccfg = &self.cfg.critic;
        let mut tape = Tape::new();
        let cp = tape.bind(&self.state.critic, true);
        let img = self.image_for_critic(b).map(|x| tape.input(x.clone(), false));
        let real = tape.input(b.y.clone(), false);
        let fake = tape.input(yhat, false);
        let (q_real, m_real) = critic_forward(&mut tape, ccfg, &cp, &real, img.as_ref(), CriticMode::Train)?;
        let (q_fake, m_fake) = critic_forward(&mut tape, ccfg, &cp, &fake, img.as_ref(), CriticMode::Train)?;
        let l_real = tape.mean_neg_log(q_real, CONFIDENCE_CLIP);
        let l_fake = tape.mean_neg_log1m(q_fake, CONFIDENCE_CLIP);
        let loss = tape.weighted_sum(&[(l_real, 1.0), (l_fake, 1.0)])?;
        let value = tape.value(&loss).item() as f64;
        if !value.is_finite() {
            return Err(self.dump_nonfinite(b, "critic", serde_json::json!({ "critic_loss": value })));
        }
        let mut grads = tape.backward(loss)?;
        let g = grads.for_params(&cp, &self.state.critic);
        drop(tape);
        self.state.critic_opt.step(&mut self.state.critic, &g)?;
        let momentum = self.cfg.critic.bn_momentum;
        self.state.critic_stats.update(&m_real, momentum);
        self.state.critic_stats.update(&m_fake, momentum);
        Ok(value)
    }

    /// One segmentation update on
    /// `lambda_s * dice + lambda_v * vat + lambda_c * adv`, with the critic
    /// held constant.
    pub fn generator_step(&mut self, b: &Batch) -> Result<GenLosses> {
        let w = self.cfg.loss.weights();
        let dice_cfg = self.cfg.loss.dice();
        let vat_cfg = self.cfg.vat;
        let model = &self.cfg.model;
        let step = self.state.global_step;

        let pert = if w.lambda_v > 0.0 {
            let seed = derive(self.state.seed, Purpose::Vat, step);
            Some(compute_r_adv(model, &self.state.seg, &b.x, &b.y, &vat_cfg, seed)?)
        } else {
            None
        };

        let mut tape = Tape::new();
        let sp = tape.bind(&self.state.seg, true);
        let x = tape.input(b.x.clone(), false);
        let p = segnet_forward(&mut tape, model, &sp, &x)?;
        let mut terms: Vec<(Var, f64)> = Vec::with_capacity(3);
        let dice = tape.soft_dice(b.y.clone(), p, dice_cfg.smooth_eps, dice_cfg.numerator_factor)?;
        terms.push((dice, w.lambda_s));

        let mut vat = None;
        if let Some(pert) = &pert {
            let mut xa = b.x.clone();
            xa.add_assign(&pert.r);
            let target = match vat_cfg.target {
                VatTarget::Labels => b.y.clone(),
                VatTarget::Prediction => tape.value(&p).clone(),
            };
            let xa = tape.input(xa, false);
            let pa = segnet_forward(&mut tape, model, &sp, &xa)?;
            let kl = tape.bernoulli_kl(target, pa, vat_cfg.prob_clip)?;
            terms.push((kl, w.lambda_v));
            vat = Some(kl);
        }

        let mut adv = None;
        if w.lambda_c > 0.0 {
            let cp = tape.bind(&self.state.critic, false);
            let img = self.image_for_critic(b).map(|t| tape.input(t.clone(), false));
            let (q, _) = critic_forward(&mut tape, &self.cfg.critic, &cp, &p, img.as_ref(), CriticMode::Train)?;
            let a = tape.mean_neg_log(q, CONFIDENCE_CLIP);
            terms.push((a, w.lambda_c));
            adv = Some(a);
        }

        let total = tape.weighted_sum(&terms)?;
        let scalar = |v: Var| tape.value(&v).item() as f64;
        let losses = GenLosses {
            dice: scalar(dice),
            vat: vat.map(scalar),
            adv: adv.map(scalar),
            total: scalar(total),
            vat_fallback: pert.as_ref().is_some_and(|p| p.any_fallback()),
            r_adv_norms: pert.as_ref().map(|p| item_norms(&p.r)).unwrap_or_default(),
        };
        let all = [Some(losses.dice), losses.vat, losses.adv, Some(losses.total)];
        if all.iter().flatten().any(|v| !v.is_finite()) {
            let values = serde_json::json!({ "dice": losses.dice, "vat": losses.vat, "adv": losses.adv, "total": losses.total });
            return Err(self.dump_nonfinite(b, "generator", values));
        }
        let mut grads = tape.backward(total)?;
        let g = grads.for_params(&sp, &self.state.seg);
        drop(tape);
        self.state.seg_opt.step(&mut self.state.seg, &g)?;
        self.state.global_step += 1;
        Ok(losses)
    }

    /// Critic updates, then one segmentation update. The critic is skipped
    /// entirely when the adversarial weight is zero, since the segmenter
    /// would never see it.
    pub fn train_batch(&mut self, b: &Batch) -> Result<StepRecord> {
        let mut critic_loss = None;
        if self.cfg.loss.lambda_c > 0.0 {
            for _ in 0..self.cfg.train.critic_steps_per_gen_step {
                critic_loss = Some(self.critic_step(b)?);
            }
        }
        let g = self.generator_step(b)?;
        Ok(StepRecord {
            step: self.state.global_step,
            epoch: self.state.epoch + 1,
            case_ids: b.ids.clone(),
            dice: g.dice,
            vat: g.vat,
            adv: g.adv,
            critic_loss,
            lr: self.cfg.train.seg_lr,
            vat_fallback: g.vat_fallback,
            r_adv_norms: g.r_adv_norms,
        })
    }

    /// Normalized training cases, cached once per fit.
    fn prepare(&self, ds: &Dataset) -> Vec<(Volume, LabelMap)> {
        ds.cases.iter().map(|c| (normalize(&c.image, &self.cfg.preprocess), c.labels.clone())).collect()
    }

    /// The batches of epoch `epoch` (0-based), in order.
    pub fn epoch_batches(&self, prepared: &[(Volume, LabelMap)], epoch: u64) -> Result<Vec<Batch>> {
        let m = prepared.len();
        let mut order: Vec<usize> = (0..m).collect();
        order.shuffle(&mut stream(self.state.seed, Purpose::EpochOrder, epoch));
        order
            .chunks(self.cfg.train.batch_size)
            .enumerate()
            .map(|(bi, chunk)| {
                let pairs = chunk
                    .iter()
                    .enumerate()
                    .map(|(j, &ci)| {
                        let slot = epoch * m as u64 + (bi * self.cfg.train.batch_size + j) as u64;
                        let seed = derive(self.state.seed, Purpose::Patch, slot);
                        let (v, l) = &prepared[ci];
                        extract_training_patch(v, l, &self.cfg.preprocess, seed)
                    })
                    .collect::<Result<Vec<_>>>()?;
                Batch::from_pairs(&pairs)
            })
            .collect()
    }

    /// Mean over cases of the mean Dice over ET, TC and WT.
    pub fn validate(&self, val: &Dataset) -> Result<(f64, Vec<MetricsRecord>)> {
        let infer = crate::inference::InferenceConfig { emit_probabilities: false, ..self.cfg.inference.clone() };
        let records = val
            .cases
            .iter()
            .map(|c| {
                let (pred, _) = predict_case(&self.cfg.model, &self.state.seg, &c.image, &self.cfg.preprocess, &infer)?;
                evaluate_case(&pred, &c.labels, c.image.spacing)
            })
            .collect::<Result<Vec<_>>>()?;
        let mean = records.iter().map(MetricsRecord::mean_dice).sum::<f64>() / records.len().max(1) as f64;
        Ok((mean, records))
    }

    fn save(&self, name: &str) -> Result<()> {
        if let Some(dir) = &self.out_dir {
            save_checkpoint(&dir.join(name), &self.cfg, &self.state)?;
        }
        Ok(())
    }

    fn append_csv(&self, name: &str, header: &str, row: &str) -> Result<()> {
        let Some(dir) = &self.out_dir else { return Ok(()) };
        let path = dir.join(name);
        let fresh = !path.exists();
        let mut f = OpenOptions::new().create(true).append(true).open(&path).map_err(|e| Error::io(&path, e))?;
        let text = if fresh { format!("{header}\n{row}\n") } else { format!("{row}\n") };
        f.write_all(text.as_bytes()).map_err(|e| Error::io(&path, e))
    }

    /// Trains until `train.epochs` epochs (or `train.max_steps` updates)
    /// are complete, validating and checkpointing at epoch ends. With an
    /// empty `val` no model selection happens and only `last.ckpt` is kept.
    pub fn fit(&mut self, train: &Dataset, val: &Dataset, observer: &mut dyn FnMut(&StepRecord)) -> Result<FitReport> {
        if train.is_empty() {
            return Err(Error::Config("training set is empty".into()));
        }
        if let Some(dir) = &self.out_dir {
            fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
        let prepared = self.prepare(train);
        let per_epoch = train.len().div_ceil(self.cfg.train.batch_size) as u64;
        let max_steps = self.cfg.train.max_steps.unwrap_or(u64::MAX);
        let mut steps = Vec::new();
        let mut val_records = Vec::new();
        while self.state.epoch < self.cfg.train.epochs && self.state.global_step < max_steps {
            let epoch = self.state.epoch;
            let done_in_epoch = self.state.global_step.saturating_sub(epoch * per_epoch) as usize;
            let batches = self.epoch_batches(&prepared, epoch)?;
            let mut epoch_steps = Vec::new();
            for b in batches.iter().skip(done_in_epoch) {
                let rec = self.train_batch(b)?;
                self.append_csv("train_log.csv", "step,epoch,dice,vat,adv,critic_loss,lr,vat_fallback", &log_row(&rec))?;
                let every = self.cfg.train.log_every;
                if every > 0 && rec.step % every == 0 {
                    println!(
                        "step {} epoch {} dice {:.4} vat {} adv {} critic {}",
                        rec.step,
                        rec.epoch,
                        rec.dice,
                        fmt_opt(rec.vat),
                        fmt_opt(rec.adv),
                        fmt_opt(rec.critic_loss)
                    );
                }
                observer(&rec);
                epoch_steps.push(rec);
                if self.state.global_step >= max_steps {
                    break;
                }
            }
            let finished_epoch = self.state.global_step >= (epoch + 1) * per_epoch;
            if finished_epoch {
                self.state.epoch += 1;
            }
            let last = self.state.epoch >= self.cfg.train.epochs || self.state.global_step >= max_steps;
            let mut val_dice = None;
            if !val.is_empty() && (last || (finished_epoch && self.state.epoch.is_multiple_of(self.cfg.train.val_every))) {
                let (d, recs) = self.validate(val)?;
                val_dice = Some(d);
                val_records = recs;
                if self.state.best_val_dice.is_none_or(|b| d > b) {
                    self.state.best_val_dice = Some(d);
                    self.save("best.ckpt")?;
                }
            }
            let record = epoch_record(epoch + 1, &epoch_steps, val_dice);
            self.append_csv("curve.csv", "epoch,dice,vat,adv,critic_loss,val_dice", &curve_row(&record))?;
            self.state.history.push(record);
            self.save("last.ckpt")?;
            steps.extend(epoch_steps);
        }
        Ok(FitReport { steps, val_records })
    }
}

fn item_norms(t: &Tensor<f32>) -> Vec<f64> {
    let n = t.shape()[0];
    t.data().chunks(t.len() / n).map(|c| c.iter().map(|&v| (v as f64) * (v as f64)).sum::<f64>().sqrt()).collect()
}

fn mean(values: impl Iterator<Item = f64>) -> Option<f64> {
    let (s, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    (n > 0).then(|| s / n as f64)
}

fn epoch_record(epoch: u64, steps: &[StepRecord], val_dice: Option<f64>) -> EpochRecord {
    EpochRecord {
        epoch,
        dice: mean(steps.iter().map(|s| s.dice)),
        vat: mean(steps.iter().filter_map(|s| s.vat)),
        adv: mean(steps.iter().filter_map(|s| s.adv)),
        critic_loss: mean(steps.iter().filter_map(|s| s.critic_loss)),
        val_dice,
    }
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.4}")).unwrap_or_else(|| "-".into())
}

fn cell(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn log_row(r: &StepRecord) -> String {
    format!(
        "{},{},{},{},{},{},{},{}",
        r.step,
        r.epoch,
        r.dice,
        cell(r.vat),
        cell(r.adv),
        cell(r.critic_loss),
        r.lr,
        r.vat_fallback as u8
    )
}

fn curve_row(r: &EpochRecord) -> String {
    format!("{},{},{},{},{},{}", r.epoch, cell(r.dice), cell(r.vat), cell(r.adv), cell(r.critic_loss), cell(r.val_dice))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::volume_io::{generate_phantom, PhantomConfig};

    fn ids(n: usize) -> Dataset {
        let cfg = PhantomConfig { size: 16, num_cases: n, noise_sigma: 0.0, seed: 0 };
        generate_phantom(&cfg).unwrap()
    }

    #[test]
    fn split_cardinalities() {
        let ds = ids(10);
        let (a, b) = split_dataset(&ds, 0.8, 1).unwrap();
        assert_eq!((a.len(), b.len()), (8, 2));
        let (a2, b2) = split_dataset(&ds, 0.8, 1).unwrap();
        assert_eq!((a.ids(), b.ids()), (a2.ids(), b2.ids()));
        assert!(a.ids().iter().all(|i| !b.ids().contains(i)));
        assert!(split_dataset(&ids(1), 0.8, 0).is_err());
    }

    #[test]
    fn train_config_validation() {
        assert!(TrainConfig::default().validate().is_ok());
        assert!(TrainConfig { split_fraction: 1.0, ..Default::default() }.validate().is_err());
        assert!(TrainConfig { seg_lr: 0.0, ..Default::default() }.validate().is_err());
    }
}
