//! Builds the segmenter and the critic and runs one forward pass of each.

use advseg::critic::{build_critic, critic_predict, CriticConfig, RunningStats};
use advseg::segnet::{build_segnet, predict, SegNetConfig};
use advseg::tensor::Tensor;

fn main() -> advseg::Result<()> {
    let seg_cfg = SegNetConfig { base_features: 8, levels: 4, norm_groups: 4, ..Default::default() };
    let seg = build_segnet::<f32>(&seg_cfg, 0)?;
    println!("segmenter: {} tensors, {} parameters, input divisor {}", seg.len(), seg.num_elements(), seg_cfg.divisor());

    let x = Tensor::from_fn(vec![1, 4, 16, 16, 16], |i| ((i * 31) % 97) as f32 / 97.0);
    let p = predict(&seg_cfg, &seg, x)?;
    println!("probabilities {:?}, mean {:.4}", p.shape(), p.data().iter().sum::<f32>() / p.len() as f32);

    let critic_cfg = CriticConfig { widths: vec![8, 16, 16], ..Default::default() };
    let critic = build_critic::<f32>(&critic_cfg, 0)?;
    let stats = RunningStats::new(&critic_cfg);
    let q = critic_predict(&critic_cfg, &critic, &stats, p, None)?;
    println!("critic: {} parameters, confidence map {:?}", critic.num_elements(), q.shape());

    // odd shapes are rejected before any work is done
    let bad = Tensor::zeros(vec![1, 4, 12, 16, 16]);
    println!("12x16x16 input: {}", predict(&seg_cfg, &seg, bad).unwrap_err());
    Ok(())
}
