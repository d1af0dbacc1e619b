//! Intensity standardization and spatial shaping.

use advseg_tensor::Tensor;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{stream, Purpose};
use crate::stats::{percentile, sorted};
use crate::volume_io::{LabelMap, Volume};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PreprocessConfig {
    pub clip_lo_pct: f64,
    pub clip_hi_pct: f64,
    pub target_train_patch: [usize; 3],
    pub pad_multiple: usize,
    pub foreground_patch_prob: f64,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        PreprocessConfig {
            clip_lo_pct: 0.5,
            clip_hi_pct: 99.5,
            target_train_patch: [128, 128, 128],
            pad_multiple: 16,
            foreground_patch_prob: 0.5,
        }
    }
}

impl PreprocessConfig {
    pub fn validate(&self) -> Result<()> {
        let pct = 0.0..=100.0;
        if !(pct.contains(&self.clip_lo_pct) && pct.contains(&self.clip_hi_pct) && self.clip_lo_pct < self.clip_hi_pct) {
            return Err(Error::Config(format!(
                "preprocess.clip_lo_pct/clip_hi_pct must satisfy 0 <= lo < hi <= 100, got {}/{}",
                self.clip_lo_pct, self.clip_hi_pct
            )));
        }
        if self.pad_multiple == 0 {
            return Err(Error::Config("preprocess.pad_multiple must be at least 1".into()));
        }
        if self.target_train_patch.iter().any(|&p| p == 0 || p % self.pad_multiple != 0) {
            return Err(Error::Config(format!(
                "preprocess.target_train_patch {:?} must be positive multiples of {}",
                self.target_train_patch, self.pad_multiple
            )));
        }
        if !(0.0..=1.0).contains(&self.foreground_patch_prob) {
            return Err(Error::Config("preprocess.foreground_patch_prob must lie in [0, 1]".into()));
        }
        Ok(())
    }
}

/// Per channel: clip the nonzero voxels to the configured percentiles of the
/// nonzero voxels, then min-max scale the whole channel to `[0, 1]`.
/// Zero voxels are left at zero before scaling; a constant channel becomes
/// all zeros.
pub fn normalize(v: &Volume, cfg: &PreprocessConfig) -> Volume {
    let n = v.voxels();
    let mut out = Vec::with_capacity(v.data.len());
    for c in 0..v.channels() {
        let chan = v.channel(c);
        let nz = sorted(chan.iter().filter(|&&x| x != 0.0).map(|&x| x as f64));
        let clipped: Vec<f64> = if nz.is_empty() {
            vec![0.0; n]
        } else {
            let lo = percentile(&nz, cfg.clip_lo_pct);
            let hi = percentile(&nz, cfg.clip_hi_pct);
            chan.iter().map(|&x| if x == 0.0 { 0.0 } else { (x as f64).clamp(lo, hi) }).collect()
        };
        let (mn, mx) = clipped.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| (a.min(x), b.max(x)));
        if mx > mn {
            out.extend(clipped.iter().map(|&x| ((x - mn) / (mx - mn)) as f32));
        } else {
            out.extend(std::iter::repeat_n(0.0f32, n));
        }
    }
    Volume {
        data: Tensor::new(v.data.shape().to_vec(), out).expect("same shape"),
        spacing: v.spacing,
        case_id: v.case_id.clone(),
    }
}

/// Padding applied by [`crop_or_pad`], enough to undo it exactly.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PadInfo {
    pub original: [usize; 3],
    pub before: [usize; 3],
    pub padded: [usize; 3],
}

impl PadInfo {
    pub fn for_dims(dims: [usize; 3], multiple: usize) -> Self {
        let m = multiple.max(1);
        let padded = dims.map(|d| d.div_ceil(m) * m);
        let before = std::array::from_fn(|a| (padded[a] - dims[a]) / 2);
        PadInfo { original: dims, before, padded }
    }

    pub fn after(&self) -> [usize; 3] {
        std::array::from_fn(|a| self.padded[a] - self.original[a] - self.before[a])
    }

    /// Zero-pads a `(C, D, H, W)` tensor from the original to the padded dims.
    pub fn pad<T: advseg_tensor::Element>(&self, t: &Tensor<T>) -> Result<Tensor<T>> {
        copy_box(t, self.original, self.padded, self.before, true)
    }

    /// Crops a `(C, D, H, W)` tensor from the padded back to the original dims.
    pub fn crop<T: advseg_tensor::Element>(&self, t: &Tensor<T>) -> Result<Tensor<T>> {
        copy_box(t, self.padded, self.original, self.before, false)
    }
}

/// Copies between a big and a small box offset by `offset`. With `grow` the
/// input is the small box; otherwise the input is the big box.
fn copy_box<T: advseg_tensor::Element>(
    t: &Tensor<T>,
    from: [usize; 3],
    to: [usize; 3],
    offset: [usize; 3],
    grow: bool,
) -> Result<Tensor<T>> {
    let s = t.shape();
    if s.len() != 4 || s[1..] != from {
        return Err(Error::Shape(format!("expected (C, {}, {}, {}), got {s:?}", from[0], from[1], from[2])));
    }
    let c = s[0];
    let (small, big) = if grow { (from, to) } else { (to, from) };
    let mut out = Tensor::zeros(vec![c, to[0], to[1], to[2]]);
    let src = t.data();
    let dst = out.data_mut();
    for ci in 0..c {
        for z in 0..small[0] {
            for y in 0..small[1] {
                let small_row = (((ci * small[0]) + z) * small[1] + y) * small[2];
                let big_row = (((ci * big[0]) + z + offset[0]) * big[1] + y + offset[1]) * big[2] + offset[2];
                let w = small[2];
                if grow {
                    dst[big_row..big_row + w].copy_from_slice(&src[small_row..small_row + w]);
                } else {
                    dst[small_row..small_row + w].copy_from_slice(&src[big_row..big_row + w]);
                }
            }
        }
    }
    Ok(out)
}

/// Zero-pads every spatial dim up to the next multiple of `multiple`,
/// centred with any odd voxel on the high side.
pub fn crop_or_pad(v: &Volume, multiple: usize) -> (Volume, PadInfo) {
    let info = PadInfo::for_dims(v.dims(), multiple);
    let data = info.pad(&v.data).expect("volume is (C, D, H, W)");
    (Volume { data, spacing: v.spacing, case_id: v.case_id.clone() }, info)
}

/// Cuts an aligned image/label patch of `cfg.target_train_patch`.
///
/// With probability `foreground_patch_prob` the patch is centred on a
/// uniformly drawn tumor voxel, otherwise on a uniformly drawn voxel, then
/// shifted to lie inside the volume.
pub fn extract_training_patch(v: &Volume, lm: &LabelMap, cfg: &PreprocessConfig, seed: u64) -> Result<(Volume, LabelMap)> {
    let patch = cfg.target_train_patch;
    let dims = v.dims();
    if (0..3).any(|a| patch[a] > dims[a]) {
        return Err(Error::PatchExceedsVolume { patch, volume: dims });
    }
    if lm.dims != dims {
        return Err(Error::InconsistentGeometry(format!("labels {:?} vs image {dims:?}", lm.dims)));
    }
    let mut rng = stream(seed, Purpose::Patch, 0);
    let want_fg = rng.random::<f64>() < cfg.foreground_patch_prob;
    let fg: Vec<usize> = if want_fg {
        lm.data.iter().enumerate().filter(|(_, &l)| l != 0).map(|(i, _)| i).collect()
    } else {
        Vec::new()
    };
    let flat = if fg.is_empty() { rng.random_range(0..lm.data.len()) } else { fg[rng.random_range(0..fg.len())] };
    let centre = [flat / (dims[1] * dims[2]), (flat / dims[2]) % dims[1], flat % dims[2]];
    let start: [usize; 3] = std::array::from_fn(|a| centre[a].saturating_sub(patch[a] / 2).min(dims[a] - patch[a]));

    let c = v.channels();
    let mut img = Vec::with_capacity(c * patch.iter().product::<usize>());
    for ci in 0..c {
        let chan = v.channel(ci);
        for z in 0..patch[0] {
            for y in 0..patch[1] {
                let row = ((start[0] + z) * dims[1] + start[1] + y) * dims[2] + start[2];
                img.extend_from_slice(&chan[row..row + patch[2]]);
            }
        }
    }
    let mut lab = Vec::with_capacity(patch.iter().product());
    for z in 0..patch[0] {
        for y in 0..patch[1] {
            let row = ((start[0] + z) * dims[1] + start[1] + y) * dims[2] + start[2];
            lab.extend_from_slice(&lm.data[row..row + patch[2]]);
        }
    }
    let image = Volume { data: Tensor::new(vec![c, patch[0], patch[1], patch[2]], img)?, spacing: v.spacing, case_id: v.case_id.clone() };
    Ok((image, LabelMap { data: lab, dims: patch, case_id: lm.case_id.clone() }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn vol(c: usize, dims: [usize; 3], data: Vec<f32>) -> Volume {
        Volume::new(Tensor::new(vec![c, dims[0], dims[1], dims[2]], data).unwrap(), [1.0; 3], "v").unwrap()
    }

    fn full_range() -> PreprocessConfig {
        PreprocessConfig { clip_lo_pct: 0.0, clip_hi_pct: 100.0, ..Default::default() }
    }

    #[test]
    fn min_max_of_three_values() {
        let v = vol(1, [1, 1, 3], vec![2.0, 4.0, 6.0]);
        assert_eq!(normalize(&v, &full_range()).data.data(), &[0.0, 0.5, 1.0]);
    }

    #[test]
    fn constant_channel_is_zero() {
        let v = vol(2, [1, 1, 3], vec![5.0, 5.0, 5.0, 1.0, 2.0, 3.0]);
        let n = normalize(&v, &PreprocessConfig::default());
        assert_eq!(&n.data.data()[..3], &[0.0; 3]);
    }

    #[test]
    fn percentiles_ignore_background_zeros() {
        // nonzero values 1..=100; the 99.5th percentile is 99.505
        let mut data = vec![0.0f32; 100];
        data.extend((1..=100).map(|v| v as f32));
        let v = vol(1, [1, 1, 200], data);
        let n = normalize(&v, &PreprocessConfig::default());
        assert_eq!(n.data.data()[0], 0.0);
        assert_eq!(n.data.data()[199], 1.0);
        let hi = 99.505;
        assert!((n.data.data()[198] as f64 - 99.0 / hi).abs() < 1e-6);
    }

    #[test]
    fn pad_155_to_160() {
        let info = PadInfo::for_dims([240, 240, 155], 16);
        assert_eq!(info.padded, [240, 240, 160]);
        assert_eq!(info.before, [0, 0, 2]);
        assert_eq!(info.after(), [0, 0, 3]);
        assert_eq!(PadInfo::for_dims([128; 3], 16).padded, [128; 3]);
    }

    #[test]
    fn patch_shapes_and_foreground() {
        let cfg = crate::volume_io::PhantomConfig { size: 64, num_cases: 1, noise_sigma: 0.05, seed: 3 };
        let case = crate::volume_io::generate_phantom(&cfg).unwrap().cases.remove(0);
        let pc = PreprocessConfig { target_train_patch: [32; 3], foreground_patch_prob: 1.0, ..Default::default() };
        for seed in 0..5 {
            let (img, lab) = extract_training_patch(&case.image, &case.labels, &pc, seed).unwrap();
            assert_eq!(img.data.shape(), &[4, 32, 32, 32]);
            assert_eq!(lab.dims, [32; 3]);
            assert!(lab.data.iter().any(|&l| l != 0));
            assert_eq!(extract_training_patch(&case.image, &case.labels, &pc, seed).unwrap(), (img, lab));
        }
        let big = PreprocessConfig { target_train_patch: [80; 3], ..pc };
        assert!(matches!(
            extract_training_patch(&case.image, &case.labels, &big, 0),
            Err(Error::PatchExceedsVolume { .. })
        ));
    }

    proptest! {
        #[test]
        fn output_in_unit_range(data in proptest::collection::vec(-50.0f32..50.0, 24), lo in 0.0f64..49.0, hi in 51.0f64..100.0) {
            let cfg = PreprocessConfig { clip_lo_pct: lo, clip_hi_pct: hi, ..Default::default() };
            let n = normalize(&vol(2, [2, 3, 2], data), &cfg);
            prop_assert!(n.data.data().iter().all(|&x| (0.0..=1.0).contains(&x)));
        }

        #[test]
        fn idempotent_at_full_range(data in proptest::collection::vec(prop_oneof![Just(0.0f32), -10.0f32..10.0], 24)) {
            let once = normalize(&vol(2, [2, 3, 2], data), &full_range());
            let twice = normalize(&once, &full_range());
            for (a, b) in once.data.data().iter().zip(twice.data.data()) {
                prop_assert!((a - b).abs() <= 1e-6);
            }
        }

        #[test]
        fn pad_then_crop_is_identity(d in 1usize..20, h in 1usize..20, w in 1usize..20, m in 1usize..17) {
            let t = Tensor::<f32>::from_fn(vec![3, d, h, w], |i| i as f32 * 0.5);
            let info = PadInfo::for_dims([d, h, w], m);
            let padded = info.pad(&t).unwrap();
            prop_assert!(info.padded.iter().all(|p| p % m == 0));
            prop_assert_eq!(info.crop(&padded).unwrap(), t);
        }
    }
}
