#![allow(dead_code)]
pub mod oracles;
pub mod fixture;

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use vidseg::flow::{gaussian_blur, GrayFrame};

/// Blurred uniform noise rescaled to span [0, 1].
pub fn smooth_texture(width: usize, height: usize, sigma: f64, seed: u64) -> GrayFrame<f32> {
    let mut rng = StdRng::seed_from_u64(seed);
    let noise: Vec<f32> = (0..width * height).map(|_| rng.random::<f32>()).collect();
    let blurred = gaussian_blur(&GrayFrame::new(width, height, noise).unwrap(), sigma);
    let (lo, hi) = blurred
        .data()
        .iter()
        .fold((f32::MAX, f32::MIN), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    let data = blurred.data().iter().map(|v| (v - lo) / (hi - lo)).collect();
    GrayFrame::new(width, height, data).unwrap()
}

/// `out(x, y) = frame((x - sx) mod w, (y - sy) mod h)`: content moves by (+sx, +sy).
pub fn circular_shift(frame: &GrayFrame<f32>, sx: isize, sy: isize) -> GrayFrame<f32> {
    let (w, h) = frame.dims();
    GrayFrame::from_fn(w, h, |x, y| {
        let src_x = (x as isize - sx).rem_euclid(w as isize) as usize;
        let src_y = (y as isize - sy).rem_euclid(h as isize) as usize;
        frame.get(src_x, src_y)
    })
    .unwrap()
}

pub fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

use vidseg::{LabelMap, RgbFrame};

pub fn gray_to_rgb(frame: &GrayFrame<f32>) -> RgbFrame {
    let data = frame
        .data()
        .iter()
        .flat_map(|&v| {
            let b = (v * 255.0).round() as u8;
            [b, b, b]
        })
        .collect();
    RgbFrame::new(frame.width(), frame.height(), data).unwrap()
}

/// A static textured background with a separately textured square moving
/// by `velocity` pixels per frame. Labels: 0 background, 1 square.
pub struct MovingSquare {
    pub frames: Vec<GrayFrame<f32>>,
    pub labels: Vec<LabelMap>,
}

pub fn moving_square(size: usize, n_frames: usize, velocity: (isize, isize), num_classes: u16, seed: u64) -> MovingSquare {
    let bg = smooth_texture(size, size, 1.5, seed);
    let fg = smooth_texture(size, size, 1.5, seed ^ 0xABCD);
    let side = size as isize / 3;
    let mut frames = Vec::new();
    let mut labels = Vec::new();
    for t in 0..n_frames as isize {
        let x0 = size as isize / 4 + velocity.0 * t;
        let y0 = size as isize / 4 + velocity.1 * t;
        let inside = |x: usize, y: usize| {
            let (x, y) = (x as isize, y as isize);
            x >= x0 && x < x0 + side && y >= y0 && y < y0 + side
        };
        frames.push(
            GrayFrame::from_fn(size, size, |x, y| {
                if inside(x, y) {
                    // Texture coordinates travel with the square.
                    let u = (x as isize - x0 + 2) as usize % size;
                    let v = (y as isize - y0 + 2) as usize % size;
                    0.5 * fg.get(u, v) + 0.5
                } else {
                    0.5 * bg.get(x, y)
                }
            })
            .unwrap(),
        );
        labels.push(LabelMap::from_fn(size, size, num_classes, |x, y| u16::from(inside(x, y))));
    }
    MovingSquare { frames, labels }
}

/// Replaces each pixel with probability `rate` by a uniformly drawn class.
pub fn corrupt(labels: &LabelMap, rate: f64, rng: &mut StdRng) -> LabelMap {
    let nc = labels.num_classes();
    let mut out = labels.clone();
    for v in out.data_mut() {
        if rng.random::<f64>() < rate {
            *v = rng.random_range(0..nc);
        }
    }
    out
}

/// Replaces each pixel with probability `rate` by a *different* class.
pub fn corrupt_always_wrong(labels: &LabelMap, rate: f64, rng: &mut StdRng) -> LabelMap {
    let nc = labels.num_classes();
    let mut out = labels.clone();
    for v in out.data_mut() {
        if rng.random::<f64>() < rate {
            *v = (*v + rng.random_range(1..nc)) % nc;
        }
    }
    out
}

pub fn random_map(rng: &mut StdRng, w: usize, h: usize, nc: u16) -> LabelMap {
    LabelMap::from_fn(w, h, nc, |_, _| rng.random_range(0..nc))
}
