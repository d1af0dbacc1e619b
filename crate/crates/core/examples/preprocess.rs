//! Intensity normalization, divisibility padding and training patches.

use advseg::preprocess::{crop_or_pad, extract_training_patch, normalize, PreprocessConfig};
use advseg::volume_io::{generate_phantom, PhantomConfig};

fn main() -> advseg::Result<()> {
    let ds = generate_phantom(&PhantomConfig { size: 40, num_cases: 1, ..Default::default() })?;
    let case = &ds.cases[0];
    let cfg = PreprocessConfig { target_train_patch: [32; 3], ..Default::default() };

    let v = normalize(&case.image, &cfg);
    for (c, m) in advseg::volume_io::MODALITIES.iter().enumerate() {
        let ch = v.channel(c);
        let (lo, hi) = ch.iter().fold((f32::MAX, f32::MIN), |(a, b), &x| (a.min(x), b.max(x)));
        println!("{m}: normalized to [{lo:.3}, {hi:.3}]");
    }

    let (padded, info) = crop_or_pad(&v, 16);
    println!("{:?} padded to {:?} (offset {:?})", info.original, padded.dims(), info.before);
    let restored = info.crop(&padded.data)?;
    assert_eq!(restored, v.data);

    for seed in 0..3 {
        let (x, y) = extract_training_patch(&v, &case.labels, &cfg, seed)?;
        let fg = y.data.iter().filter(|&&l| l != 0).count();
        println!("patch {seed}: {:?}, {fg} tumour voxels", x.dims());
    }
    Ok(())
}
