//! Procedural clear scenes with depth.
//!
//! A scene is a vertical colour gradient at constant depth with textured
//! rectangles and disks painted far-to-near on top of it. Every object has
//! its own depth level.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;
use crate::tensor::{Shape, Tensor};

pub const MIN_SCENE_SIZE: usize = 16;

/// Depth of the backdrop. Objects sit strictly in front of it.
pub const BACKGROUND_DEPTH: f32 = 0.35;

const OBJECT_AMPLITUDE: (f32, f32) = (0.2, 0.9);

/// Mostly saturated colours: each has at least one dim channel, as natural
/// haze-free scenes tend to.
pub const DEFAULT_PALETTE: [[f32; 3]; 10] = [
    [0.85, 0.20, 0.15],
    [0.15, 0.60, 0.20],
    [0.10, 0.30, 0.80],
    [0.90, 0.75, 0.10],
    [0.55, 0.25, 0.70],
    [0.10, 0.65, 0.70],
    [0.90, 0.50, 0.10],
    [0.35, 0.25, 0.15],
    [0.20, 0.20, 0.25],
    [0.75, 0.70, 0.60],
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneSpec {
    pub seed: u64,
    pub height: usize,
    pub width: usize,
    pub object_count: usize,
    pub palette: Vec<[f32; 3]>,
}

impl SceneSpec {
    pub fn new(seed: u64, height: usize, width: usize, object_count: usize) -> Self {
        SceneSpec { seed, height, width, object_count, palette: DEFAULT_PALETTE.to_vec() }
    }
}

#[derive(Debug, Clone, Copy)]
enum Outline {
    Rect { y0: f32, x0: f32, y1: f32, x1: f32 },
    Disk { cy: f32, cx: f32, r: f32 },
}

impl Outline {
    fn contains(&self, y: f32, x: f32) -> bool {
        match *self {
            Outline::Rect { y0, x0, y1, x1 } => y >= y0 && y < y1 && x >= x0 && x < x1,
            Outline::Disk { cy, cx, r } => (y - cy).powi(2) + (x - cx).powi(2) <= r * r,
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Texture {
    freq: f32,
    angle: f32,
    phase: f32,
    amplitude: f32,
    checker: bool,
}

impl Texture {
    /// Modulation in `[-1, 1]`.
    fn sample(&self, y: f32, x: f32) -> f32 {
        let (s, c) = self.angle.sin_cos();
        let u = self.freq * (x * c + y * s) + self.phase;
        if self.checker {
            let v = self.freq * (y * c - x * s);
            (u.sin() * v.sin()).signum() * self.amplitude
        } else {
            u.sin() * self.amplitude
        }
    }
}

fn random_texture(rng: &mut rng::Rng, amplitude: (f32, f32)) -> Texture {
    Texture {
        freq: rng.gen_range(0.3..1.4),
        angle: rng.gen_range(0.0..std::f32::consts::PI),
        phase: rng.gen_range(0.0..std::f32::consts::TAU),
        amplitude: rng.gen_range(amplitude.0..amplitude.1),
        checker: rng.gen_bool(0.4),
    }
}

/// Shade a colour channel by a modulation in `[-1, 1]` without leaving `[0, 1]`.
fn shade(base: f32, m: f32) -> f32 {
    base + m * base.min(1.0 - base)
}

/// Render the clear image `(1, 3, H, W)` and its depth map `(1, 1, H, W)`.
pub fn render_clear(spec: &SceneSpec) -> Result<(Tensor, Tensor)> {
    if spec.height < MIN_SCENE_SIZE || spec.width < MIN_SCENE_SIZE {
        return Err(Error::config(format!(
            "scene size {}x{} is below the minimum {MIN_SCENE_SIZE}x{MIN_SCENE_SIZE}",
            spec.height, spec.width
        )));
    }
    if spec.palette.is_empty() {
        return Err(Error::config("scene palette is empty"));
    }
    if spec.palette.iter().flatten().any(|v| !(0.0..=1.0).contains(v)) {
        return Err(Error::config("palette colours must lie in [0, 1]"));
    }
    let (h, w) = (spec.height, spec.width);
    let mut rng = rng::seeded(spec.seed);
    let pick = |rng: &mut rng::Rng| spec.palette[rng.gen_range(0..spec.palette.len())];

    let top = pick(&mut rng);
    let bottom = pick(&mut rng);
    let mut image = Tensor::zeros(Shape::new(1, 3, h, w));
    let mut depth = Tensor::full(Shape::new(1, 1, h, w), BACKGROUND_DEPTH);
    for y in 0..h {
        let f = y as f32 / (h - 1) as f32;
        for c in 0..3 {
            let v = top[c] + (bottom[c] - top[c]) * f;
            for x in 0..w {
                image.data_mut()[(c * h + y) * w + x] = v;
            }
        }
    }

    // Distinct depth levels, painted far to near.
    let mut levels: Vec<usize> = (0..spec.object_count).collect();
    levels.shuffle(&mut rng);
    let step = 0.3 / spec.object_count.max(1) as f32;
    let mut objects = Vec::with_capacity(spec.object_count);
    for &level in &levels {
        let d = 0.02 + step * (level as f32 + rng.gen::<f32>() * 0.8);
        let outline = if rng.gen_bool(0.5) {
            let oh = rng.gen_range(0.2..0.6) * h as f32;
            let ow = rng.gen_range(0.2..0.6) * w as f32;
            let y0 = rng.gen_range(-0.1..0.9) * h as f32;
            let x0 = rng.gen_range(-0.1..0.9) * w as f32;
            Outline::Rect { y0, x0, y1: y0 + oh, x1: x0 + ow }
        } else {
            let r = rng.gen_range(0.1..0.3) * h.min(w) as f32;
            Outline::Disk { cy: rng.gen_range(0.0..1.0) * h as f32, cx: rng.gen_range(0.0..1.0) * w as f32, r }
        };
        let texture = random_texture(&mut rng, OBJECT_AMPLITUDE);
        objects.push((d, outline, pick(&mut rng), texture));
    }
    objects.sort_by(|a, b| b.0.total_cmp(&a.0));

    for (d, outline, colour, texture) in &objects {
        for y in 0..h {
            for x in 0..w {
                let (fy, fx) = (y as f32 + 0.5, x as f32 + 0.5);
                if !outline.contains(fy, fx) {
                    continue;
                }
                let m = texture.sample(fy, fx);
                for c in 0..3 {
                    image.data_mut()[(c * h + y) * w + x] = shade(colour[c], m);
                }
                depth.data_mut()[y * w + x] = *d;
            }
        }
    }
    Ok((image, depth))
}
