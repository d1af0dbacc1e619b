#![allow(dead_code)]

pub mod grad;
pub mod oracle;

use advseg::critic::CriticConfig;
use advseg::segnet::SegNetConfig;
use advseg::volume_io::{generate_phantom, Dataset, PhantomConfig};
use advseg::RunConfig;

/// A configuration small enough for many short runs: 16^3 phantoms,
/// three-level U-Net with base width 4 and a narrow critic.
pub fn tiny_config() -> RunConfig {
    let mut cfg = RunConfig::default();
    cfg.data.phantom = PhantomConfig { size: 16, num_cases: 4, noise_sigma: 0.05, seed: 0 };
    cfg.model = SegNetConfig { base_features: 4, levels: 3, norm_groups: 2, ..Default::default() };
    cfg.critic = CriticConfig { widths: vec![4, 8, 8], ..Default::default() };
    cfg.preprocess.target_train_patch = [16; 3];
    cfg.inference.pad_multiple = 16;
    cfg.train.log_every = 0;
    cfg.train.epochs = 10;
    cfg
}

pub fn phantoms(cfg: &RunConfig) -> Dataset {
    generate_phantom(&cfg.data.phantom).unwrap()
}
