//! Trains a tiny model for a few steps, checkpoints mid-epoch, resumes and
//! checks that the resumed run repeats the uninterrupted losses.

use advseg::critic::CriticConfig;
use advseg::segnet::SegNetConfig;
use advseg::trainer::{split_dataset, Trainer};
use advseg::volume_io::{generate_phantom, PhantomConfig};
use advseg::RunConfig;

fn config() -> RunConfig {
    let mut cfg = RunConfig::default();
    cfg.model = SegNetConfig { base_features: 4, levels: 3, norm_groups: 2, ..Default::default() };
    cfg.critic = CriticConfig { widths: vec![4, 8, 8], ..Default::default() };
    cfg.preprocess.target_train_patch = [16; 3];
    cfg.train.epochs = 3;
    cfg.train.log_every = 1;
    cfg
}

fn main() -> advseg::Result<()> {
    let ds = generate_phantom(&PhantomConfig { size: 24, num_cases: 5, ..Default::default() })?;
    let (train, val) = split_dataset(&ds, 0.8, 0)?;
    println!("train {:?}, validation {:?}", train.ids(), val.ids());
    let dir = std::env::temp_dir().join("advseg_train_resume");
    let _ = std::fs::remove_dir_all(&dir);

    let mut full = Vec::new();
    Trainer::new(config(), 0, None)?.fit(&train, &val, &mut |r| full.push(r.dice))?;

    let mut first = config();
    first.train.max_steps = Some(3);
    let mut resumed = Vec::new();
    Trainer::new(first, 0, Some(dir.clone()))?.fit(&train, &val, &mut |r| resumed.push(r.dice))?;
    let mut tr = Trainer::resume(config(), &dir.join("last.ckpt"), Some(dir.clone()))?;
    tr.fit(&train, &val, &mut |r| resumed.push(r.dice))?;

    assert_eq!(full, resumed);
    println!("resumed run matches: {} steps, best validation dice {:?}", resumed.len(), tr.state.best_val_dice);
    println!("logs in {}", dir.display());
    Ok(())
}
