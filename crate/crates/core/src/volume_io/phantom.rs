//! Nested-ellipsoid tumor phantoms.
//!
//! Each case places three axis-aligned, concentric ellipsoids WT ⊇ TC ⊇ ET
//! around an interior voxel. Radii are drawn per axis: WT from
//! `[0.14, 0.26] * size`, TC from `[0.55, 0.75]` of WT, ET from
//! `[0.45, 0.65]` of TC. The modality intensities are a flat background of
//! 0.2 plus the region offsets below plus Gaussian noise.

use advseg_tensor::Tensor;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{Case, Dataset, LabelMap, Volume};
use crate::error::{Error, Result};
use crate::rng::{stream, Purpose};

pub const BACKGROUND: f32 = 0.2;

/// Additive offsets in [`super::MODALITIES`] order for edema (label 2),
/// necrotic core (label 1) and enhancing tumor (label 4).
pub const OFFSETS: [(u8, [f32; 4]); 3] = [
    (2, [0.5, 0.0, 0.0, 0.5]),
    (1, [0.4, -0.15, 0.0, 0.2]),
    (4, [0.4, -0.15, 0.6, 0.1]),
];

const WT_RANGE: (f64, f64) = (0.14, 0.26);
const TC_RANGE: (f64, f64) = (0.55, 0.75);
const ET_RANGE: (f64, f64) = (0.45, 0.65);
const MAX_ATTEMPTS: usize = 1000;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PhantomConfig {
    pub size: usize,
    pub num_cases: usize,
    pub noise_sigma: f64,
    pub seed: u64,
}

impl Default for PhantomConfig {
    fn default() -> Self {
        PhantomConfig { size: 64, num_cases: 4, noise_sigma: 0.05, seed: 0 }
    }
}

impl PhantomConfig {
    pub fn validate(&self) -> Result<()> {
        if self.size < 16 {
            return Err(Error::PhantomTooSmall { size: self.size });
        }
        if self.num_cases == 0 {
            return Err(Error::Config("num_cases must be at least 1".into()));
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return Err(Error::Config(format!("noise_sigma must be a finite value >= 0, got {}", self.noise_sigma)));
        }
        Ok(())
    }
}

pub fn generate_phantom(cfg: &PhantomConfig) -> Result<Dataset> {
    cfg.validate()?;
    let cases = (0..cfg.num_cases).map(|i| phantom_case(cfg, i)).collect::<Result<Vec<_>>>()?;
    Dataset::new(cases)
}

fn phantom_case(cfg: &PhantomConfig, index: usize) -> Result<Case> {
    let mut rng = stream(cfg.seed, Purpose::Phantom, index as u64);
    let s = cfg.size;
    let id = format!("phantom_{index:04}");
    let labels = (0..MAX_ATTEMPTS)
        .map(|_| sample_labels(&mut rng, s))
        .find(|l| has_all_regions(l))
        .ok_or(Error::PhantomTooSmall { size: s })?;

    let n = s * s * s;
    let mut data = vec![BACKGROUND; 4 * n];
    for (c, chan) in data.chunks_mut(n).enumerate() {
        for (v, &l) in chan.iter_mut().zip(&labels) {
            if let Some((_, off)) = OFFSETS.iter().find(|(lab, _)| *lab == l) {
                *v += off[c];
            }
            let z: f64 = rng.sample(StandardNormal);
            *v += (cfg.noise_sigma * z) as f32;
        }
    }
    let image = Volume::new(Tensor::new(vec![4, s, s, s], data)?, [1.0; 3], id.clone())?;
    Ok(Case { image, labels: LabelMap::new(labels, [s, s, s], id)? })
}

fn uniform3(rng: &mut impl Rng, (lo, hi): (f64, f64)) -> [f64; 3] {
    [rng.random_range(lo..hi), rng.random_range(lo..hi), rng.random_range(lo..hi)]
}

fn sample_labels(rng: &mut impl Rng, s: usize) -> Vec<u8> {
    let wt = uniform3(rng, WT_RANGE).map(|u| u * s as f64);
    let tc_f = uniform3(rng, TC_RANGE);
    let et_f = uniform3(rng, ET_RANGE);
    let tc = [wt[0] * tc_f[0], wt[1] * tc_f[1], wt[2] * tc_f[2]];
    let et = [tc[0] * et_f[0], tc[1] * et_f[1], tc[2] * et_f[2]];
    let centre: [f64; 3] = std::array::from_fn(|a| {
        let margin = wt[a].ceil() as usize + 1;
        rng.random_range(margin..=s - 1 - margin) as f64
    });
    let inside = |p: [f64; 3], r: &[f64; 3]| -> bool {
        (0..3).map(|a| ((p[a] - centre[a]) / r[a]).powi(2)).sum::<f64>() <= 1.0
    };
    let mut labels = vec![0u8; s * s * s];
    for z in 0..s {
        for y in 0..s {
            for x in 0..s {
                let p = [z as f64, y as f64, x as f64];
                labels[(z * s + y) * s + x] = if inside(p, &et) {
                    4
                } else if inside(p, &tc) {
                    1
                } else if inside(p, &wt) {
                    2
                } else {
                    0
                };
            }
        }
    }
    labels
}

fn has_all_regions(labels: &[u8]) -> bool {
    [4u8, 1, 2].iter().all(|l| labels.contains(l))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::volume_io::labels_to_channels;

    #[test]
    fn generation_is_deterministic() {
        let cfg = PhantomConfig { size: 16, num_cases: 2, noise_sigma: 0.05, seed: 42 };
        assert_eq!(generate_phantom(&cfg).unwrap(), generate_phantom(&cfg).unwrap());
        let other = PhantomConfig { seed: 43, ..cfg.clone() };
        assert_ne!(generate_phantom(&cfg).unwrap(), generate_phantom(&other).unwrap());
    }

    #[test]
    fn smallest_size_has_every_region() {
        let cfg = PhantomConfig { size: 16, num_cases: 20, noise_sigma: 0.0, seed: 1 };
        for case in generate_phantom(&cfg).unwrap().cases {
            assert!(has_all_regions(&case.labels.data));
            let rc = labels_to_channels(&case.labels).unwrap();
            let n = case.labels.data.len();
            let d = rc.data.data();
            assert!((0..n).all(|i| d[i] <= d[n + i] && d[n + i] <= d[2 * n + i]));
        }
    }

    #[test]
    fn too_small_is_rejected() {
        let cfg = PhantomConfig { size: 8, ..Default::default() };
        assert!(matches!(generate_phantom(&cfg), Err(Error::PhantomTooSmall { size: 8 })));
    }

    #[test]
    fn noiseless_intensities_follow_the_offset_table() {
        let cfg = PhantomConfig { size: 16, num_cases: 1, noise_sigma: 0.0, seed: 5 };
        let case = &generate_phantom(&cfg).unwrap().cases[0];
        let n = case.labels.data.len();
        for (i, &l) in case.labels.data.iter().enumerate() {
            let flair = case.image.data.data()[i];
            let t1ce = case.image.data.data()[2 * n + i];
            match l {
                0 => assert_eq!(flair, BACKGROUND),
                4 => assert!((t1ce - 0.8).abs() < 1e-6),
                _ => assert!(flair > 0.55),
            }
        }
    }
}
