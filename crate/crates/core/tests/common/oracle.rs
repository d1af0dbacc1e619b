//! Brute-force metric oracles.

use advseg::metrics::HD95_EMPTY_SENTINEL;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub fn idx(z: usize, y: usize, x: usize, d: [usize; 3]) -> usize {
    (z * d[1] + y) * d[2] + x
}

pub fn oracle_boundary(m: &[bool], d: [usize; 3]) -> Vec<[usize; 3]> {
    let mut out = Vec::new();
    for z in 0..d[0] {
        for y in 0..d[1] {
            for x in 0..d[2] {
                if !m[idx(z, y, x, d)] {
                    continue;
                }
                let p = [z as isize, y as isize, x as isize];
                let edge = (0..3).any(|a| {
                    [-1isize, 1].iter().any(|s| {
                        let mut q = p;
                        q[a] += s;
                        q.iter().zip(&d).any(|(&c, &n)| c < 0 || c >= n as isize)
                            || !m[idx(q[0] as usize, q[1] as usize, q[2] as usize, d)]
                    })
                });
                if edge {
                    out.push([z, y, x]);
                }
            }
        }
    }
    out
}

pub fn oracle_percentile(mut v: Vec<f64>, p: f64) -> f64 {
    v.sort_by(f64::total_cmp);
    let rank = p / 100.0 * (v.len() - 1) as f64;
    let lo = rank.floor() as usize;
    let hi = rank.ceil() as usize;
    v[lo] + (v[hi] - v[lo]) * (rank - lo as f64)
}

pub fn directed(a: &[[usize; 3]], b: &[[usize; 3]], s: [f64; 3]) -> Vec<f64> {
    a.iter()
        .map(|p| {
            b.iter()
                .map(|q| {
                    (0..3)
                        .map(|k| {
                            let t = (p[k] as f64 - q[k] as f64) * s[k];
                            t * t
                        })
                        .sum::<f64>()
                })
                .fold(f64::INFINITY, f64::min)
                .sqrt()
        })
        .collect()
}

pub fn oracle_hd95(a: &[bool], b: &[bool], d: [usize; 3], s: [f64; 3]) -> f64 {
    let (ba, bb) = (oracle_boundary(a, d), oracle_boundary(b, d));
    match (ba.is_empty(), bb.is_empty()) {
        (true, true) => 0.0,
        (true, false) | (false, true) => HD95_EMPTY_SENTINEL,
        _ => oracle_percentile(directed(&ba, &bb, s), 95.0).max(oracle_percentile(directed(&bb, &ba, s), 95.0)),
    }
}

/// Random blobs: a few boxes, sometimes nothing at all.
pub fn random_mask(rng: &mut ChaCha8Rng, d: [usize; 3]) -> Vec<bool> {
    let mut m = vec![false; d.iter().product()];
    let boxes = rng.random_range(0..4);
    for _ in 0..boxes {
        let lo: Vec<usize> = d.iter().map(|&n| rng.random_range(0..n)).collect();
        let hi: Vec<usize> = lo.iter().zip(&d).map(|(&l, &n)| rng.random_range(l + 1..=n)).collect();
        for z in lo[0]..hi[0] {
            for y in lo[1]..hi[1] {
                for x in lo[2]..hi[2] {
                    m[idx(z, y, x, d)] = true;
                }
            }
        }
    }
    // salt noise so boundaries are not just box faces
    for v in m.iter_mut() {
        if rng.random_bool(0.03) {
            *v = !*v;
        }
    }
    m
}
