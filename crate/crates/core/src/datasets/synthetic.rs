use crate::qconv::ImageTensor;
use crate::rng::Rng;

use super::{DatasetPair, LabeledDataset, Sample, Split};

const SIDE: usize = 10;
const PIXELS: usize = SIDE * SIDE;
const CORRUPTED: usize = PIXELS / 5;
const REPLICAS: usize = 400;
const TRAIN_REPLICAS: usize = 320;

/// Nine colors of the noisy-colors task, in class order.
pub const NOISY_COLORS: [(&str, [u8; 3]); 9] = [
    ("blue", [0, 0, 255]),
    ("green", [0, 255, 0]),
    ("red", [255, 0, 0]),
    ("cyan", [0, 255, 255]),
    ("magenta", [255, 0, 255]),
    ("yellow", [255, 255, 0]),
    ("light-cyan", [128, 255, 255]),
    ("pink", [255, 128, 255]),
    ("light-yellow", [255, 255, 128]),
];

/// The six base colors used under the shape designs (the first six above).
pub const BASE_COLORS: usize = 6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Design {
    None,
    Cross,
    X,
    Rounded,
}

impl Design {
    pub const ALL: [Design; 4] = [Design::None, Design::Cross, Design::X, Design::Rounded];

    pub fn name(self) -> &'static str {
        match self {
            Design::None => "none",
            Design::Cross => "cross",
            Design::X => "x",
            Design::Rounded => "rounded",
        }
    }
}

/// 10x10 design mask, row-major.
///
/// * cross: rows 4-5 and columns 4-5 (36 cells)
/// * x: cells with `r - c` in {0, 1} or `r + c` in {9, 10} (36 cells)
/// * rounded: the outer border without its four corners (32 cells)
pub fn shape_mask(design: Design) -> [bool; PIXELS] {
    let mut mask = [false; PIXELS];
    for r in 0..SIDE {
        for c in 0..SIDE {
            let (ri, ci) = (r as isize, c as isize);
            let on = match design {
                Design::None => false,
                Design::Cross => (4..=5).contains(&r) || (4..=5).contains(&c),
                Design::X => matches!(ri - ci, 0 | 1) || matches!(r + c, 9 | 10),
                Design::Rounded => {
                    let edge_r = r == 0 || r == SIDE - 1;
                    let edge_c = c == 0 || c == SIDE - 1;
                    (edge_r || edge_c) && !(edge_r && edge_c)
                }
            };
            mask[r * SIDE + c] = on;
        }
    }
    mask
}

/// Raw RGB pixels -> tensor with channel `c` (1-indexed) scaled by `c / 3`.
fn rgb_image(pixels: &[[u8; 3]; PIXELS]) -> ImageTensor {
    let mut data = Vec::with_capacity(PIXELS * 3);
    for px in pixels {
        for (c, &v) in px.iter().enumerate() {
            data.push((v as f64 / 255.0 * (c + 1) as f64 / 3.0) as f32);
        }
    }
    ImageTensor::new(SIDE, SIDE, 3, data).expect("values in [0, 1]")
}

fn noisy_image(rng: &mut Rng, color: [u8; 3], mask: &[bool; PIXELS]) -> ImageTensor {
    let mut pixels = [color; PIXELS];
    for (p, &on) in pixels.iter_mut().zip(mask) {
        if on {
            *p = [255, 255, 255];
        }
    }
    for idx in rng.choose_distinct(PIXELS, CORRUPTED) {
        pixels[idx] = [0, 0, 0];
    }
    rgb_image(&pixels)
}

/// Per-class stream id: the color index, with the design in the high word,
/// so a design-free class reproduces the plain noisy-color images.
fn class_stream(color: usize, design: Design) -> u64 {
    let d = Design::ALL.iter().position(|&x| x == design).unwrap() as u64;
    color as u64 | (d << 32)
}

fn split_replicas(classes: Vec<(String, Vec<ImageTensor>)>, train_per_class: usize) -> DatasetPair {
    let names: Vec<String> = classes.iter().map(|(n, _)| n.clone()).collect();
    let mut train: Vec<Sample> = Vec::new();
    let mut test: Vec<Sample> = Vec::new();
    for (label, (_, images)) in classes.into_iter().enumerate() {
        for (k, img) in images.into_iter().enumerate() {
            if k < train_per_class {
                train.push((img, label));
            } else {
                test.push((img, label));
            }
        }
    }
    DatasetPair {
        train: LabeledDataset::new(train, names.clone(), Split::Train),
        test: LabeledDataset::new(test, names, Split::Test),
    }
}

/// Nine solid colors with 20 random pixels per image set to black;
/// 320 train / 80 test images per class.
pub fn gen_noisy_colors(seed: u64) -> DatasetPair {
    let empty = shape_mask(Design::None);
    let classes = NOISY_COLORS
        .iter()
        .enumerate()
        .map(|(ci, (name, rgb))| {
            let mut rng = Rng::with_stream(seed, class_stream(ci, Design::None));
            let images = (0..REPLICAS)
                .map(|_| noisy_image(&mut rng, *rgb, &empty))
                .collect();
            (name.to_string(), images)
        })
        .collect();
    split_replicas(classes, TRAIN_REPLICAS)
}

/// Six base colors x four white designs (24 classes), corrupted like the
/// noisy colors; 320 train / 80 test images per class.
pub fn gen_noisy_shapes(seed: u64) -> DatasetPair {
    let mut classes = Vec::with_capacity(BASE_COLORS * Design::ALL.len());
    for (ci, (name, rgb)) in NOISY_COLORS.iter().take(BASE_COLORS).enumerate() {
        for design in Design::ALL {
            let mask = shape_mask(design);
            let mut rng = Rng::with_stream(seed, class_stream(ci, design));
            let images = (0..REPLICAS)
                .map(|_| noisy_image(&mut rng, *rgb, &mask))
                .collect();
            classes.push((format!("{name}/{}", design.name()), images));
        }
    }
    split_replicas(classes, TRAIN_REPLICAS)
}

pub const HIGH_CHANNELS: usize = 12;
const HIGH_CLASSES: usize = 10;
const HIGH_TRAIN: usize = 100;
const HIGH_TEST: usize = 20;
const HIGH_BOOST: f64 = 0.5;

/// 10x10x12 uniform noise; class `i` (0-indexed) adds 0.5 to channels
/// `i..i+3`, then every value is divided by 1.5 to land in `[0, 1]`.
/// 100 train / 20 test samples per class.
pub fn gen_high_channel(seed: u64) -> DatasetPair {
    let scale = 1.0 / (1.0 + HIGH_BOOST);
    let classes = (0..HIGH_CLASSES)
        .map(|class| {
            let mut rng = Rng::with_stream(seed, class as u64);
            let images = (0..HIGH_TRAIN + HIGH_TEST)
                .map(|_| {
                    let mut data = Vec::with_capacity(PIXELS * HIGH_CHANNELS);
                    for _ in 0..PIXELS {
                        for c in 0..HIGH_CHANNELS {
                            let mut v = rng.uniform();
                            if (class..class + 3).contains(&c) {
                                v += HIGH_BOOST;
                            }
                            data.push((v * scale) as f32);
                        }
                    }
                    ImageTensor::new(SIDE, SIDE, HIGH_CHANNELS, data).expect("values in [0, 1]")
                })
                .collect();
            (format!("channels-{}-{}", class + 1, class + 3), images)
        })
        .collect();
    split_replicas(classes, HIGH_TRAIN)
}
