//! Seeded dead-leaves test images: random occluding disks with power-law
//! radii and a faint per-disk shading, a common stand-in for natural-image
//! statistics.

use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::error::Result;
use crate::image::{round_clamp, Image};
use crate::phy::rng::{seeded, stream_seed};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeadLeaves {
    pub min_radius: f64,
    pub max_radius: f64,
    /// Disks drawn per image.
    pub disks: usize,
    /// Mean standard deviation of per-pixel grain; each disk draws its own
    /// level in `[0, 2 texture]`.
    pub texture: f64,
    /// Largest amplitude of the oriented sinusoidal pattern a disk carries.
    pub pattern: f64,
}

impl Default for DeadLeaves {
    fn default() -> Self {
        Self {
            min_radius: 2.0,
            max_radius: 80.0,
            disks: 4000,
            texture: 2.0,
            pattern: 24.0,
        }
    }
}

impl DeadLeaves {
    /// Radius with density proportional to `r^-3` on `[min, max]`.
    fn radius(&self, u: f64) -> f64 {
        let (a, b) = (self.min_radius.powi(-2), self.max_radius.powi(-2));
        (a - u * (a - b)).powf(-0.5)
    }

    pub fn render(&self, width: usize, height: usize, channels: usize, seed: u64) -> Result<Image> {
        let mut rng = seeded(seed);
        let mut canvas = vec![f64::NAN; width * height * channels];
        // Front-to-back painting: a pixel is set by the first disk covering it.
        let mut open = width * height;
        for _ in 0..self.disks {
            if open == 0 {
                break;
            }
            let cx = rng.random_range(-0.1..1.1) * width as f64;
            let cy = rng.random_range(-0.1..1.1) * height as f64;
            let r = self.radius(rng.random());
            let base: Vec<f64> = (0..channels).map(|_| rng.random_range(10.0..245.0)).collect();
            let (gx, gy) = (rng.random_range(-0.4..0.4), rng.random_range(-0.4..0.4));
            // most disks are nearly flat, a few strongly patterned
            let amp = self.pattern.max(0.0) * rng.random::<f64>().powi(3);
            let freq = rng.random_range(0.03..0.35);
            let theta = rng.random_range(0.0..std::f64::consts::PI);
            let (fx, fy) = (freq * theta.cos(), freq * theta.sin());
            let phase = rng.random_range(0.0..std::f64::consts::TAU);
            let grain = Normal::new(0.0, self.texture.max(0.0) * rng.random_range(0.0..2.0)).expect("non-negative std");
            let x0 = (cx - r).floor().max(0.0) as usize;
            let y0 = (cy - r).floor().max(0.0) as usize;
            let x1 = ((cx + r).ceil().max(0.0) as usize).min(width);
            let y1 = ((cy + r).ceil().max(0.0) as usize).min(height);
            for y in y0..y1 {
                for x in x0..x1 {
                    let (dx, dy) = (x as f64 + 0.5 - cx, y as f64 + 0.5 - cy);
                    if dx * dx + dy * dy > r * r {
                        continue;
                    }
                    let i = (y * width + x) * channels;
                    if !canvas[i].is_nan() {
                        continue;
                    }
                    let shade = gx * dx
                        + gy * dy
                        + amp * (std::f64::consts::TAU * (fx * dx + fy * dy) + phase).sin()
                        + grain.sample(&mut rng);
                    for c in 0..channels {
                        canvas[i + c] = base[c] + shade;
                    }
                    open -= 1;
                }
            }
        }
        let background: Vec<f64> = (0..channels).map(|_| rng.random_range(60.0..200.0)).collect();
        let samples = canvas
            .iter()
            .enumerate()
            .map(|(i, &v)| round_clamp(if v.is_nan() { background[i % channels] } else { v }, 255))
            .collect();
        Image::new(width, height, channels, 8, samples)
    }
}

/// `n` independent grayscale images of one size. Grain, pattern strength
/// and the smallest leaf size vary from image to image.
pub fn dead_leaves_corpus(n: usize, width: usize, height: usize, seed: u64) -> Result<Vec<Image>> {
    (0..n)
        .map(|i| {
            let mut rng = seeded(stream_seed(seed, i as u64, 1));
            let gen = DeadLeaves {
                min_radius: rng.random_range(1.0..4.0),
                texture: rng.random_range(0.5..4.0),
                pattern: rng.random_range(4.0..40.0),
                ..DeadLeaves::default()
            };
            gen.render(width, height, 1, stream_seed(seed, i as u64, 0))
        })
        .collect()
}
