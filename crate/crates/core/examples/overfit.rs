//! Overfits four 32^3 phantoms with the full objective and reports the
//! training-set Dice per region.
//!
//! cargo run --release --example overfit -- [steps] [seed] [seg_lr]

use advseg::critic::CriticConfig;
use advseg::segnet::SegNetConfig;
use advseg::trainer::Trainer;
use advseg::volume_io::{generate_phantom, PhantomConfig, REGIONS};
use advseg::RunConfig;

fn main() -> advseg::Result<()> {
    let mut args = std::env::args().skip(1);
    let steps: u64 = args.next().map_or(200, |s| s.parse().expect("steps"));
    let seed: u64 = args.next().map_or(0, |s| s.parse().expect("seed"));
    let lr: Option<f64> = args.next().map(|s| s.parse().expect("seg_lr"));

    let mut cfg = RunConfig::default();
    cfg.model = SegNetConfig { base_features: 8, ..Default::default() };
    cfg.critic = CriticConfig { widths: vec![8, 16, 16], ..Default::default() };
    cfg.preprocess.target_train_patch = [32; 3];
    cfg.train.epochs = steps.div_ceil(2);
    cfg.train.max_steps = Some(steps);
    cfg.train.val_every = cfg.train.epochs;
    cfg.train.log_every = 20;
    // 2e-4 moves each weight by at most ~0.04 in 200 Adam steps, far too
    // little to fit from scratch
    cfg.train.seg_lr = lr.unwrap_or(5e-3);

    let ds = generate_phantom(&PhantomConfig { size: 32, num_cases: 4, noise_sigma: 0.05, seed })?;
    let mut trainer = Trainer::new(cfg, seed, None)?;
    let t0 = std::time::Instant::now();
    let report = trainer.fit(&ds, &ds, &mut |_| {})?;
    println!("{} steps in {:.1?}", trainer.state.global_step, t0.elapsed());
    for (i, region) in REGIONS.iter().enumerate() {
        let mean = report.val_records.iter().map(|r| r.regions[i].dice).sum::<f64>() / report.val_records.len() as f64;
        println!("{region} training dice {mean:.4}");
    }
    println!("mean training dice {:.4}", trainer.state.best_val_dice.unwrap_or(f64::NAN));
    Ok(())
}
