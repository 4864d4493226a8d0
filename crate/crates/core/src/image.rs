//! In-memory image grid plus PGM/PNG I/O.

use std::path::Path;

use image::{DynamicImage, GrayImage, ImageFormat, RgbImage};

use crate::error::{Error, Result};

/// Rectangular grid of `bit_depth`-bit samples, row-major, channels interleaved.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Image {
    width: usize,
    height: usize,
    channels: usize,
    bit_depth: u8,
    samples: Vec<u16>,
}

impl Image {
    pub fn new(width: usize, height: usize, channels: usize, bit_depth: u8, samples: Vec<u16>) -> Result<Self> {
        if channels != 1 && channels != 3 {
            return Err(Error::InvalidParameter(format!(
                "channels must be 1 or 3, got {channels}"
            )));
        }
        if !(1..=16).contains(&bit_depth) {
            return Err(Error::InvalidParameter(format!(
                "bit depth must be in 1..=16, got {bit_depth}"
            )));
        }
        let expected = width * height * channels;
        if samples.len() != expected {
            return Err(Error::LengthMismatch {
                expected,
                actual: samples.len(),
            });
        }
        let max = max_value(bit_depth);
        if let Some(bad) = samples.iter().find(|&&s| s > max) {
            return Err(Error::InvalidParameter(format!(
                "sample {bad} exceeds {bit_depth}-bit range"
            )));
        }
        Ok(Self {
            width,
            height,
            channels,
            bit_depth,
            samples,
        })
    }

    /// 8-bit image with every sample equal to `value`.
    pub fn filled(width: usize, height: usize, channels: usize, value: u16) -> Result<Self> {
        Self::new(width, height, channels, 8, vec![value; width * height * channels])
    }

    /// 8-bit image from a per-pixel generator `f(x, y, c)`.
    pub fn from_fn(
        width: usize,
        height: usize,
        channels: usize,
        mut f: impl FnMut(usize, usize, usize) -> u16,
    ) -> Result<Self> {
        let mut samples = Vec::with_capacity(width * height * channels);
        for y in 0..height {
            for x in 0..width {
                for c in 0..channels {
                    samples.push(f(x, y, c));
                }
            }
        }
        Self::new(width, height, channels, 8, samples)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn bit_depth(&self) -> u8 {
        self.bit_depth
    }

    pub fn samples(&self) -> &[u16] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<u16> {
        self.samples
    }

    pub fn max_value(&self) -> u16 {
        max_value(self.bit_depth)
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize, c: usize) -> u16 {
        self.samples[(y * self.width + x) * self.channels + c]
    }

    /// Luminance plane rescaled to the 8-bit range `[0, 255]`.
    pub fn luminance(&self) -> Vec<f64> {
        let scale = 255.0 / self.max_value() as f64;
        match self.channels {
            1 => self.samples.iter().map(|&s| s as f64 * scale).collect(),
            _ => self
                .samples
                .chunks_exact(3)
                .map(|p| (0.299 * p[0] as f64 + 0.587 * p[1] as f64 + 0.114 * p[2] as f64) * scale)
                .collect(),
        }
    }

    /// Rotates the image by 90 degrees clockwise.
    pub fn rotate90(&self) -> Image {
        let (w, h, ch) = (self.width, self.height, self.channels);
        let mut out = vec![0u16; self.samples.len()];
        for y in 0..h {
            for x in 0..w {
                let (nx, ny) = (h - 1 - y, x);
                for c in 0..ch {
                    out[(ny * h + nx) * ch + c] = self.get(x, y, c);
                }
            }
        }
        Image {
            width: h,
            height: w,
            channels: ch,
            bit_depth: self.bit_depth,
            samples: out,
        }
    }

    /// Same-size `k`x`k` moving-average filter with edge replication.
    pub fn box_blur(&self, k: usize) -> Image {
        let r = (k / 2) as isize;
        let (w, h, ch) = (self.width as isize, self.height as isize, self.channels);
        let mut out = Vec::with_capacity(self.samples.len());
        let norm = (k * k) as f64;
        for y in 0..h {
            for x in 0..w {
                for c in 0..ch {
                    let mut acc = 0u64;
                    for dy in -r..=r {
                        let yy = (y + dy).clamp(0, h - 1) as usize;
                        for dx in -r..=r {
                            let xx = (x + dx).clamp(0, w - 1) as usize;
                            acc += self.get(xx, yy, c) as u64;
                        }
                    }
                    out.push((acc as f64 / norm).round() as u16);
                }
            }
        }
        Image {
            samples: out,
            ..self.clone()
        }
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Image> {
        let path = path.as_ref();
        let img = image::open(path)?;
        Ok(match img {
            DynamicImage::ImageLuma8(g) => {
                let (w, h) = g.dimensions();
                Image::new(w as usize, h as usize, 1, 8, to_u16(g.into_raw()))?
            }
            DynamicImage::ImageRgb8(rgb) => {
                let (w, h) = rgb.dimensions();
                Image::new(w as usize, h as usize, 3, 8, to_u16(rgb.into_raw()))?
            }
            other if other.color().has_color() => {
                let rgb = other.to_rgb8();
                let (w, h) = rgb.dimensions();
                Image::new(w as usize, h as usize, 3, 8, to_u16(rgb.into_raw()))?
            }
            other => {
                let g = other.to_luma8();
                let (w, h) = g.dimensions();
                Image::new(w as usize, h as usize, 1, 8, to_u16(g.into_raw()))?
            }
        })
    }

    /// Writes PGM for `.pgm`/`.pnm` paths and PNG otherwise. Samples are
    /// rescaled to 8 bits when the depth differs.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let format = match path.extension().and_then(|e| e.to_str()) {
            Some("pgm") | Some("pnm") => ImageFormat::Pnm,
            _ => ImageFormat::Png,
        };
        let bytes = self.to_u8();
        let (w, h) = (self.width as u32, self.height as u32);
        if format == ImageFormat::Pnm && self.channels != 1 {
            return Err(Error::InvalidParameter(
                "PGM output requires a single-channel image".into(),
            ));
        }
        match self.channels {
            1 => GrayImage::from_raw(w, h, bytes)
                .expect("buffer size checked at construction")
                .save_with_format(path, format)?,
            _ => RgbImage::from_raw(w, h, bytes)
                .expect("buffer size checked at construction")
                .save_with_format(path, format)?,
        }
        Ok(())
    }

    /// Encodes as PNG bytes (used for service payloads).
    pub fn to_png_bytes(&self) -> Result<Vec<u8>> {
        let mut buf = std::io::Cursor::new(Vec::new());
        let (w, h) = (self.width as u32, self.height as u32);
        let bytes = self.to_u8();
        match self.channels {
            1 => GrayImage::from_raw(w, h, bytes)
                .expect("buffer size checked at construction")
                .write_to(&mut buf, ImageFormat::Png)?,
            _ => RgbImage::from_raw(w, h, bytes)
                .expect("buffer size checked at construction")
                .write_to(&mut buf, ImageFormat::Png)?,
        }
        Ok(buf.into_inner())
    }

    /// Decodes PNG or PGM bytes.
    pub fn from_encoded_bytes(bytes: &[u8]) -> Result<Image> {
        let img = image::load_from_memory(bytes)?;
        if img.color().has_color() {
            let rgb = img.to_rgb8();
            let (w, h) = rgb.dimensions();
            Image::new(w as usize, h as usize, 3, 8, to_u16(rgb.into_raw()))
        } else {
            let g = img.to_luma8();
            let (w, h) = g.dimensions();
            Image::new(w as usize, h as usize, 1, 8, to_u16(g.into_raw()))
        }
    }

    /// Linearly rescales samples to another bit depth.
    pub fn with_bit_depth(&self, bit_depth: u8) -> Result<Image> {
        if bit_depth == self.bit_depth {
            return Ok(self.clone());
        }
        let (from, to) = (self.max_value(), max_value(bit_depth.clamp(1, 16)));
        let samples = self
            .samples
            .iter()
            .map(|&s| round_clamp(s as f64 * to as f64 / from as f64, to))
            .collect();
        Image::new(self.width, self.height, self.channels, bit_depth, samples)
    }

    fn to_u8(&self) -> Vec<u8> {
        if self.bit_depth == 8 {
            self.samples.iter().map(|&s| s as u8).collect()
        } else {
            let scale = 255.0 / self.max_value() as f64;
            self.samples.iter().map(|&s| (s as f64 * scale).round() as u8).collect()
        }
    }
}

#[inline]
pub fn max_value(bit_depth: u8) -> u16 {
    ((1u32 << bit_depth) - 1) as u16
}

/// Rounds half away from zero and clamps into `[0, max]`.
#[inline]
pub(crate) fn round_clamp(v: f64, max: u16) -> u16 {
    v.round().clamp(0.0, max as f64) as u16
}

fn to_u16(raw: Vec<u8>) -> Vec<u16> {
    raw.into_iter().map(u16::from).collect()
}
