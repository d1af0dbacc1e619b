//! The three training objectives on a small random batch.

use advseg::critic::{build_critic, CriticConfig, CriticMode};
use advseg::losses::{compute_r_adv, critic_loss, dice_loss, generator_adv_loss, total_loss, vat_loss, LossConfig, VatConfig};
use advseg::segnet::{build_segnet, predict, SegNetConfig};
use advseg::tensor::Tensor;

fn main() -> advseg::Result<()> {
    let model = SegNetConfig { base_features: 4, levels: 3, norm_groups: 2, ..Default::default() };
    let params = build_segnet::<f32>(&model, 1)?;
    let x = Tensor::from_fn(vec![2, 4, 16, 16, 16], |i| ((i * 13) % 29) as f32 / 29.0);
    let y = Tensor::from_fn(vec![2, 3, 16, 16, 16], |i| ((i / 7) % 5 == 0) as u8 as f32);
    let yhat = predict(&model, &params, x.clone())?;

    let loss = LossConfig::default();
    let dice = dice_loss(&y, &yhat, &loss.dice())?;

    let vat = VatConfig::default();
    let r = compute_r_adv(&model, &params, &x, &y, &vat, 7)?;
    let norms: Vec<f64> = r.r.data().chunks(r.r.len() / 2).map(|c| c.iter().map(|v| (*v as f64).powi(2)).sum::<f64>().sqrt()).collect();
    println!("r_adv per-sample norms {norms:?} (eps_adv {})", vat.eps_adv);
    let smooth = vat_loss(&model, &params, &x, &y, &vat, 7)?;

    let critic_cfg = CriticConfig { widths: vec![4, 8, 8], ..Default::default() };
    let critic = build_critic::<f32>(&critic_cfg, 1)?;
    let adv = generator_adv_loss(&critic_cfg, &critic, CriticMode::Train, &yhat, None)?;
    let c = critic_loss(&critic_cfg, &critic, CriticMode::Train, &y, &yhat, None)?;

    println!("dice {dice:.4}  vat {smooth:.4}  adv {adv:.4}  critic {c:.4}");
    println!("total {:.4}", total_loss(dice, smooth, adv, &loss.weights()));
    Ok(())
}
