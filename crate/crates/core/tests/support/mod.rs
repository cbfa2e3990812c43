//! Independent reference implementations used as test oracles.
#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Per-pixel histogram then per-bin absolute difference, all in integers.
pub fn naive_abs_hist_diff(a: &[u8], b: &[u8], n_bins: usize) -> u64 {
    let mut ha = vec![0i64; n_bins];
    let mut hb = vec![0i64; n_bins];
    for &p in a {
        ha[p as usize * n_bins / 256] += 1;
    }
    for &p in b {
        hb[p as usize * n_bins / 256] += 1;
    }
    let mut total = 0u64;
    for k in 0..n_bins {
        let d = ha[k] - hb[k];
        total += if d < 0 { (-d) as u64 } else { d as u64 };
    }
    total
}

/// Straightforward HOG: each block recomputes its four cells pixel by
/// pixel, gradients read through a clamping accessor.
pub fn naive_hog(px: &[u8], w: usize, h: usize) -> Vec<f64> {
    const CELL: usize = 8;
    const BINS: usize = 9;
    let at = |x: isize, y: isize| -> f64 {
        let cx = x.clamp(0, w as isize - 1) as usize;
        let cy = y.clamp(0, h as isize - 1) as usize;
        px[cy * w + cx] as f64
    };
    let cell_hist = |cx: usize, cy: usize| -> [f64; BINS] {
        let mut hist = [0.0; BINS];
        for y in cy * CELL..(cy + 1) * CELL {
            for x in cx * CELL..(cx + 1) * CELL {
                let (xi, yi) = (x as isize, y as isize);
                let gx = at(xi + 1, yi) - at(xi - 1, yi);
                let gy = at(xi, yi + 1) - at(xi, yi - 1);
                let mag = (gx * gx + gy * gy).sqrt();
                if mag == 0.0 {
                    continue;
                }
                let mut deg = gy.atan2(gx) * 180.0 / std::f64::consts::PI;
                while deg < 0.0 {
                    deg += 180.0;
                }
                while deg >= 180.0 {
                    deg -= 180.0;
                }
                let bin = ((deg / 20.0).floor() as usize) % BINS;
                hist[bin] += mag;
            }
        }
        hist
    };
    let (ncx, ncy) = (w / CELL, h / CELL);
    let mut out = Vec::new();
    for by in 0..ncy - 1 {
        for bx in 0..ncx - 1 {
            let mut block = Vec::with_capacity(4 * BINS);
            for dy in 0..2 {
                for dx in 0..2 {
                    block.extend(cell_hist(bx + dx, by + dy));
                }
            }
            let eps2 = 1e-6 * 1e-6;
            let n1 = (block.iter().map(|v| v * v).sum::<f64>() + eps2).sqrt();
            for v in block.iter_mut() {
                *v = (*v / n1).min(0.2);
            }
            let n2 = (block.iter().map(|v| v * v).sum::<f64>() + eps2).sqrt();
            out.extend(block.iter().map(|v| v / n2));
        }
    }
    out
}

/// A literal transliteration of the stroke-extraction pseudocode, with
/// `-1` sentinels and explicit index arithmetic.
pub fn pseudocode_localize(cuts: &[u64], n_frames: u64, preds: &dyn Fn(u64) -> (u8, u8)) -> Vec<(u64, u64)> {
    let mut vid_segments = Vec::new();
    let mut start_frame: i64 = -1;
    let mut end_frame: i64;
    for (i, &cut) in cuts.iter().enumerate() {
        let (cam1_pred, cam2_pred) = preds(cut);
        if start_frame == -1 {
            if cam1_pred == 1 {
                start_frame = cut as i64;
            }
        } else if start_frame >= 0 {
            if cam2_pred == 0 {
                end_frame = cut as i64 - 1;
                vid_segments.push((start_frame as u64, end_frame as u64));
                start_frame = -1;
                if cam1_pred == 1 {
                    start_frame = cut as i64;
                }
            } else {
                if i + 1 < cuts.len() {
                    end_frame = cuts[i + 1] as i64 - 1;
                } else {
                    end_frame = n_frames as i64 - 1;
                }
                vid_segments.push((start_frame as u64, end_frame as u64));
                start_frame = -1;
            }
        }
    }
    vid_segments
}

pub fn random_frame(rng: &mut ChaCha8Rng, w: u32, h: u32) -> Vec<u8> {
    (0..w * h).map(|_| rng.random()).collect()
}

/// Strictly increasing cuts in `[1, n_frames - 1]`.
pub fn random_cuts(rng: &mut ChaCha8Rng, n_frames: u64, max_cuts: usize) -> Vec<u64> {
    let k = rng.random_range(0..=max_cuts);
    let mut cuts: Vec<u64> = (0..k).map(|_| rng.random_range(1..n_frames)).collect();
    cuts.sort_unstable();
    cuts.dedup();
    cuts
}

/// Random sorted, disjoint segments inside `[0, n_frames)`.
pub fn random_segments(rng: &mut ChaCha8Rng, n_frames: u64, max_segments: usize) -> Vec<(u64, u64)> {
    let mut bounds: Vec<u64> = (0..2 * rng.random_range(0..=max_segments))
        .map(|_| rng.random_range(0..n_frames))
        .collect();
    bounds.sort_unstable();
    bounds.dedup();
    bounds.chunks_exact(2).map(|c| (c[0], c[1])).collect()
}
