//! Generator for the committed pipeline fixture under `tests/fixtures/pipeline`.
//!
//! Scene: textured land on top, textured water below, a textured boat moving
//! across the water. Ground truth labels the water as lake. The "coherent"
//! candidate confuses the water (river on the left half, sea on the right)
//! and misses the boat's leftmost column, identically in every frame. The
//! "flicker" candidate is the coherent one with 30% of the pixels of every
//! variant redrawn at random.

use std::path::{Path, PathBuf};

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use vidseg::flow::GrayFrame;
use vidseg::pipeio::{write_label_png, write_rgb_png};
use vidseg::tta::{flip_horizontal, resize_nearest};
use vidseg::LabelMap;

use super::{gray_to_rgb, smooth_texture};

pub const SIZE: usize = 40;
pub const NUM_CLASSES: u16 = 5;
pub const LAND: u16 = 0;
pub const RIVER: u16 = 1;
pub const LAKE: u16 = 2;
pub const SEA: u16 = 3;
pub const BOAT: u16 = 4;
const SHORE: usize = 14;
const BOAT_SIDE: usize = 10;

/// (video id, frame count, boat start, boat velocity)
pub const VIDEOS: [(&str, usize, (isize, isize), (isize, isize)); 3] = [
    ("clip_a", 10, (5, 20), (2, 0)),
    ("clip_b", 10, (6, 16), (1, 1)),
    ("clip_c", 5, (26, 22), (-2, 1)),
];

/// (directory, scale, flipped, rank)
pub const VARIANTS: [(&str, f64, bool, u32); 3] = [("s1.0", 1.0, false, 0), ("s1.0_flip", 1.0, true, 1), ("s0.5", 0.5, false, 2)];

pub fn fixture_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/pipeline")
}

pub fn stem(t: usize) -> String {
    format!("{t:05}")
}

pub struct Scene {
    pub frames: Vec<GrayFrame<f32>>,
    pub ground_truth: Vec<LabelMap>,
    pub coherent: Vec<LabelMap>,
}

pub fn scene(index: usize) -> Scene {
    let (_, n, (x0, y0), (vx, vy)) = VIDEOS[index];
    let seed = 100 + index as u64;
    let land = smooth_texture(SIZE, SIZE, 1.2, seed);
    let water = smooth_texture(SIZE, SIZE, 2.0, seed + 10);
    let boat = smooth_texture(BOAT_SIDE, BOAT_SIDE, 1.0, seed + 20);
    let mut scene = Scene { frames: Vec::new(), ground_truth: Vec::new(), coherent: Vec::new() };
    for t in 0..n as isize {
        let (bx, by) = (x0 + vx * t, y0 + vy * t);
        let on_boat = |x: usize, y: usize| {
            let (dx, dy) = (x as isize - bx, y as isize - by);
            (0..BOAT_SIDE as isize).contains(&dx) && (0..BOAT_SIDE as isize).contains(&dy)
        };
        scene.frames.push(
            GrayFrame::from_fn(SIZE, SIZE, |x, y| {
                if on_boat(x, y) {
                    0.6 + 0.4 * boat.get((x as isize - bx) as usize, (y as isize - by) as usize)
                } else if y < SHORE {
                    0.45 * land.get(x, y)
                } else {
                    0.2 + 0.35 * water.get(x, y)
                }
            })
            .unwrap(),
        );
        let gt = LabelMap::from_fn(SIZE, SIZE, NUM_CLASSES, |x, y| {
            if on_boat(x, y) {
                BOAT
            } else if y < SHORE {
                LAND
            } else {
                LAKE
            }
        });
        let coherent = LabelMap::from_fn(SIZE, SIZE, NUM_CLASSES, |x, y| {
            let label = gt.get(x, y);
            let missed_edge = label == BOAT && x as isize == bx;
            if label == LAKE || missed_edge {
                if x < SIZE / 2 {
                    RIVER
                } else {
                    SEA
                }
            } else {
                label
            }
        });
        scene.ground_truth.push(gt);
        scene.coherent.push(coherent);
    }
    scene
}

/// The coherent candidate after the water has been resolved to lake.
pub fn expected_output(index: usize) -> Vec<LabelMap> {
    scene(index)
        .coherent
        .into_iter()
        .map(|m| LabelMap::from_fn(SIZE, SIZE, NUM_CLASSES, |x, y| match m.get(x, y) {
            RIVER | SEA => LAKE,
            other => other,
        }))
        .collect()
}

fn variant_map(base: &LabelMap, scale: f64, flipped: bool) -> LabelMap {
    let side = (SIZE as f64 * scale).round() as usize;
    let resized = resize_nearest(base, side, side);
    if flipped {
        flip_horizontal(&resized)
    } else {
        resized
    }
}

fn noisy(map: &LabelMap, rng: &mut StdRng) -> LabelMap {
    let mut out = map.clone();
    for v in out.data_mut() {
        if rng.random::<f64>() < 0.3 {
            *v = rng.random_range(0..NUM_CLASSES);
        }
    }
    out
}

pub const CONFIG: &str = r#"{
  "dataset_root": "dataset",
  "candidates": [
    {"name": "coherent", "root": "preds/coherent"},
    {"name": "flicker", "root": "preds/flicker"}
  ],
  "taxonomy": {
    "class_names": ["land", "river", "lake", "sea", "boat"],
    "confusable_groups": [
      {"stuff": "water", "members": [
        {"id": 1, "name": "river"}, {"id": 2, "name": "lake"}, {"id": 3, "name": "sea"}
      ]}
    ]
  },
  "augmentations": [
    {"dir": "s1.0", "scale": 1.0, "flipped": false, "rank": 0},
    {"dir": "s1.0_flip", "scale": 1.0, "flipped": true, "rank": 1},
    {"dir": "s0.5", "scale": 0.5, "flipped": false, "rank": 2}
  ],
  "metric_ks": [4, 8],
  "vlm": {
    "enabled": true,
    "backend": "mock",
    "mock_answers": {"*": "The water in the image is a lake."}
  },
  "workers": 2
}
"#;

fn mkdir(p: &Path) -> PathBuf {
    std::fs::create_dir_all(p).unwrap();
    p.to_owned()
}

/// Writes the whole fixture (config, dataset, both candidates) under `root`.
pub fn write_fixture(root: &Path) {
    std::fs::create_dir_all(root).unwrap();
    std::fs::write(root.join("config.json"), CONFIG).unwrap();
    for (i, &(video, ..)) in VIDEOS.iter().enumerate() {
        let s = scene(i);
        let frames = mkdir(&root.join("dataset").join(video).join("frames"));
        let masks = mkdir(&root.join("dataset").join(video).join("masks"));
        for (t, (f, g)) in s.frames.iter().zip(&s.ground_truth).enumerate() {
            write_rgb_png(&frames.join(format!("{}.png", stem(t))), &gray_to_rgb(f)).unwrap();
            write_label_png(&masks.join(format!("{}.png", stem(t))), g).unwrap();
        }
        let mut rng = StdRng::seed_from_u64(500 + i as u64);
        for (dir, scale, flipped, _) in VARIANTS {
            let coherent = mkdir(&root.join("preds/coherent").join(video).join(dir));
            let flicker = mkdir(&root.join("preds/flicker").join(video).join(dir));
            for (t, m) in s.coherent.iter().enumerate() {
                let v = variant_map(m, scale, flipped);
                write_label_png(&coherent.join(format!("{}.png", stem(t))), &v).unwrap();
                write_label_png(&flicker.join(format!("{}.png", stem(t))), &noisy(&v, &mut rng)).unwrap();
            }
        }
    }
}
