//! 95th-percentile Hausdorff distance between two shifted spheres, with
//! isotropic and anisotropic voxel spacing.

use advseg::metrics::{dice_score, hd95};

fn sphere(d: usize, c: [f64; 3], r: f64) -> Vec<bool> {
    let mut m = Vec::with_capacity(d * d * d);
    for z in 0..d {
        for y in 0..d {
            for x in 0..d {
                let q = [z as f64 - c[0], y as f64 - c[1], x as f64 - c[2]];
                m.push(q.iter().map(|v| v * v).sum::<f64>() <= r * r);
            }
        }
    }
    m
}

fn main() -> advseg::Result<()> {
    let d = 32;
    let a = sphere(d, [16.0, 16.0, 16.0], 8.0);
    for shift in [0.0, 1.0, 3.0] {
        let b = sphere(d, [16.0 + shift, 16.0, 16.0], 8.0);
        println!(
            "shift {shift}: dice {:.4}  hd95 1mm {:.3}  hd95 2x1x1mm {:.3}",
            dice_score(&a, &b)?,
            hd95(&a, &b, [d; 3], [1.0; 3])?,
            hd95(&a, &b, [d; 3], [2.0, 1.0, 1.0])?
        );
    }
    println!("empty vs sphere: {}", hd95(&vec![false; d * d * d], &a, [d; 3], [1.0; 3])?);
    Ok(())
}
