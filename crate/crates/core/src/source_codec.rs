//! Block-mean low-pass source transform, bit-plane partitioning and the
//! `LCR1` compressed-representation file format.
//!
//! The transmitter replaces each non-overlapping `b1 x b2` block with its
//! rounded mean, giving a representation with `r = 1/(b1*b2)` of the original
//! sample count. The representation is then cut into `K` bit planes, plane
//! `k = 1` holding the least-significant bit, and plane `k` carrying the
//! importance weight `4^(k-1)` (the squared place value of that bit).

use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::image::{max_value, Image};

const LCR_MAGIC: &[u8; 4] = b"LCR1";
const FLAG_PADDED: u8 = 0x01;

/// What to do when the image size is not a multiple of the block size.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PadMode {
    #[default]
    Reject,
    /// Replicate the last row/column up to the next multiple; the original
    /// size is kept so reconstruction can crop.
    Replicate,
}

/// Geometry of a compressed representation, everything except the samples.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RepLayout {
    pub block_w: usize,
    pub block_h: usize,
    /// Source image size before any padding.
    pub orig_width: usize,
    pub orig_height: usize,
    /// Representation grid size, `ceil(W / b1) x ceil(H / b2)`.
    pub width: usize,
    pub height: usize,
    pub channels: usize,
    pub bit_depth: u8,
}

impl RepLayout {
    /// Compression rate `1 / (b1 * b2)`.
    pub fn rate(&self) -> f64 {
        1.0 / (self.block_w * self.block_h) as f64
    }

    /// Number of samples `S = S_w * S_h * channels`.
    pub fn sample_count(&self) -> usize {
        self.width * self.height * self.channels
    }

    pub fn padded(&self) -> bool {
        self.width * self.block_w != self.orig_width || self.height * self.block_h != self.orig_height
    }

    pub fn max_value(&self) -> u16 {
        max_value(self.bit_depth)
    }
}

/// Quantized block-mean representation `s`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CompressedRep {
    layout: RepLayout,
    samples: Vec<u16>,
}

impl CompressedRep {
    pub fn new(layout: RepLayout, samples: Vec<u16>) -> Result<Self> {
        if layout.block_w == 0 || layout.block_h == 0 {
            return Err(Error::InvalidParameter("block sizes must be positive".into()));
        }
        if !(1..=16).contains(&layout.bit_depth) {
            return Err(Error::InvalidParameter(format!(
                "bit depth must be in 1..=16, got {}",
                layout.bit_depth
            )));
        }
        if samples.len() != layout.sample_count() {
            return Err(Error::LengthMismatch {
                expected: layout.sample_count(),
                actual: samples.len(),
            });
        }
        let max = layout.max_value();
        if samples.iter().any(|&s| s > max) {
            return Err(Error::InvalidParameter(
                "representation sample exceeds bit-depth range".into(),
            ));
        }
        Ok(Self { layout, samples })
    }

    pub fn layout(&self) -> &RepLayout {
        &self.layout
    }

    pub fn samples(&self) -> &[u16] {
        &self.samples
    }

    pub fn rate(&self) -> f64 {
        self.layout.rate()
    }

    pub fn width(&self) -> usize {
        self.layout.width
    }

    pub fn height(&self) -> usize {
        self.layout.height
    }

    pub fn channels(&self) -> usize {
        self.layout.channels
    }

    pub fn bit_depth(&self) -> u8 {
        self.layout.bit_depth
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize, c: usize) -> u16 {
        self.samples[(y * self.layout.width + x) * self.layout.channels + c]
    }

    /// Views the representation grid itself as an image (no upsampling).
    pub fn as_image(&self) -> Image {
        Image::new(
            self.layout.width,
            self.layout.height,
            self.layout.channels,
            self.layout.bit_depth,
            self.samples.clone(),
        )
        .expect("layout validated at construction")
    }

    pub fn with_samples(&self, samples: Vec<u16>) -> Result<Self> {
        Self::new(self.layout, samples)
    }

    /// Writes the 16-byte `LCR1` header followed by raw samples
    /// (one byte each for `K <= 8`, little-endian `u16` otherwise).
    pub fn write_to(&self, mut w: impl Write) -> Result<()> {
        let l = &self.layout;
        let fits = |v: usize| u16::try_from(v).is_ok();
        if !(fits(l.orig_width) && fits(l.orig_height) && fits(l.block_w) && fits(l.block_h)) {
            return Err(Error::InvalidParameter(
                "dimension exceeds the u16 range of the LCR1 header".into(),
            ));
        }
        let mut header = [0u8; 16];
        header[0..4].copy_from_slice(LCR_MAGIC);
        header[4..6].copy_from_slice(&(l.orig_width as u16).to_le_bytes());
        header[6..8].copy_from_slice(&(l.orig_height as u16).to_le_bytes());
        header[8] = l.channels as u8;
        header[9] = l.bit_depth;
        header[10..12].copy_from_slice(&(l.block_w as u16).to_le_bytes());
        header[12..14].copy_from_slice(&(l.block_h as u16).to_le_bytes());
        header[14] = if l.padded() { FLAG_PADDED } else { 0 };
        w.write_all(&header)?;
        if l.bit_depth <= 8 {
            let bytes: Vec<u8> = self.samples.iter().map(|&s| s as u8).collect();
            w.write_all(&bytes)?;
        } else {
            for s in &self.samples {
                w.write_all(&s.to_le_bytes())?;
            }
        }
        Ok(())
    }

    pub fn read_from(mut r: impl Read, source: &Path) -> Result<Self> {
        let mut header = [0u8; 16];
        r.read_exact(&mut header)
            .map_err(|_| Error::format(source, "truncated LCR1 header"))?;
        if &header[0..4] != LCR_MAGIC {
            return Err(Error::format(source, "bad magic, expected LCR1"));
        }
        let u16_at = |i: usize| u16::from_le_bytes([header[i], header[i + 1]]) as usize;
        let (orig_width, orig_height) = (u16_at(4), u16_at(6));
        let (channels, bit_depth) = (header[8] as usize, header[9]);
        let (block_w, block_h) = (u16_at(10), u16_at(12));
        if block_w == 0 || block_h == 0 {
            return Err(Error::format(source, "zero block size"));
        }
        let layout = RepLayout {
            block_w,
            block_h,
            orig_width,
            orig_height,
            width: orig_width.div_ceil(block_w),
            height: orig_height.div_ceil(block_h),
            channels,
            bit_depth,
        };
        let n = layout.sample_count();
        let samples = if bit_depth <= 8 {
            let mut buf = vec![0u8; n];
            r.read_exact(&mut buf)
                .map_err(|_| Error::format(source, "truncated sample data"))?;
            buf.into_iter().map(u16::from).collect()
        } else {
            let mut buf = vec![0u8; 2 * n];
            r.read_exact(&mut buf)
                .map_err(|_| Error::format(source, "truncated sample data"))?;
            buf.chunks_exact(2).map(|b| u16::from_le_bytes([b[0], b[1]])).collect()
        };
        CompressedRep::new(layout, samples).map_err(|e| Error::format(source, e.to_string()))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let file = std::fs::File::create(path.as_ref())?;
        let mut w = std::io::BufWriter::new(file);
        self.write_to(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = std::fs::File::open(path)?;
        Self::read_from(std::io::BufReader::new(file), path)
    }
}

/// Low-pass block-mean encoder: each output sample is the mean of its
/// `b1 x b2` block rounded half away from zero.
pub fn block_mean_encode(img: &Image, b1: usize, b2: usize, pad: PadMode) -> Result<CompressedRep> {
    if b1 == 0 || b2 == 0 {
        return Err(Error::InvalidParameter("block sizes must be positive".into()));
    }
    let (w, h, ch) = (img.width(), img.height(), img.channels());
    let divisible = w % b1 == 0 && h % b2 == 0;
    if !divisible && pad == PadMode::Reject {
        return Err(Error::DimensionMismatch(format!(
            "{w}x{h} is not divisible by block {b1}x{b2}"
        )));
    }
    let (sw, sh) = (w.div_ceil(b1), h.div_ceil(b2));
    let n = (b1 * b2) as u64;
    let max = img.max_value();
    let mut samples = Vec::with_capacity(sw * sh * ch);
    for by in 0..sh {
        for bx in 0..sw {
            for c in 0..ch {
                let mut sum = 0u64;
                for dy in 0..b2 {
                    let y = (by * b2 + dy).min(h - 1);
                    for dx in 0..b1 {
                        let x = (bx * b1 + dx).min(w - 1);
                        sum += img.get(x, y, c) as u64;
                    }
                }
                // round(sum / n), halves away from zero
                let mean = (2 * sum + n) / (2 * n);
                samples.push(mean.min(max as u64) as u16);
            }
        }
    }
    let layout = RepLayout {
        block_w: b1,
        block_h: b2,
        orig_width: w,
        orig_height: h,
        width: sw,
        height: sh,
        channels: ch,
        bit_depth: img.bit_depth(),
    };
    CompressedRep::new(layout, samples)
}

/// Importance weights `gamma_k = 4^(k-1)` for `k = 1..=K`.
pub fn importance_weights(bit_depth: u8) -> Vec<f64> {
    (0..bit_depth as i32).map(|k| 4f64.powi(k)).collect()
}

/// `K` equal-length bit sequences, index 0 is the least-significant plane.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BitPlaneFrame {
    layout: RepLayout,
    planes: Vec<Vec<u8>>,
}

impl BitPlaneFrame {
    pub fn new(layout: RepLayout, planes: Vec<Vec<u8>>) -> Result<Self> {
        if planes.len() != layout.bit_depth as usize {
            return Err(Error::ShapeMismatch(format!(
                "expected {} planes, got {}",
                layout.bit_depth,
                planes.len()
            )));
        }
        let s = layout.sample_count();
        if let Some(bad) = planes.iter().find(|p| p.len() != s) {
            return Err(Error::LengthMismatch {
                expected: s,
                actual: bad.len(),
            });
        }
        Ok(Self { layout, planes })
    }

    pub fn layout(&self) -> &RepLayout {
        &self.layout
    }

    /// Number of planes `K`.
    pub fn depth(&self) -> usize {
        self.planes.len()
    }

    /// Bits per plane `S`.
    pub fn plane_len(&self) -> usize {
        self.layout.sample_count()
    }

    pub fn planes(&self) -> &[Vec<u8>] {
        &self.planes
    }

    /// Plane `k` in 1-based significance order (`k = 1` is the LSB).
    pub fn plane(&self, k: usize) -> &[u8] {
        &self.planes[k - 1]
    }

    pub fn weights(&self) -> Vec<f64> {
        importance_weights(self.layout.bit_depth)
    }

    pub fn into_planes(self) -> Vec<Vec<u8>> {
        self.planes
    }
}

pub fn split_bitplanes(rep: &CompressedRep) -> BitPlaneFrame {
    let k = rep.bit_depth() as usize;
    let planes = (0..k)
        .map(|bit| rep.samples().iter().map(|&s| ((s >> bit) & 1) as u8).collect())
        .collect();
    BitPlaneFrame {
        layout: *rep.layout(),
        planes,
    }
}

/// Reassembles samples from planes; any nonzero byte counts as a one bit.
pub fn merge_bitplanes(frame: &BitPlaneFrame) -> Result<CompressedRep> {
    let s = frame.plane_len();
    for p in &frame.planes {
        if p.len() != s {
            return Err(Error::LengthMismatch {
                expected: s,
                actual: p.len(),
            });
        }
    }
    let mut samples = vec![0u16; s];
    for (bit, plane) in frame.planes.iter().enumerate() {
        for (out, &b) in samples.iter_mut().zip(plane) {
            *out |= ((b != 0) as u16) << bit;
        }
    }
    CompressedRep::new(frame.layout, samples)
}

/// Reassembles from raw plane vectors, checking they share one length.
pub fn merge_planes(layout: RepLayout, planes: Vec<Vec<u8>>) -> Result<CompressedRep> {
    merge_bitplanes(&BitPlaneFrame::new(layout, planes)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn gray(w: usize, h: usize, samples: Vec<u16>) -> Image {
        Image::new(w, h, 1, 8, samples).unwrap()
    }

    #[test]
    fn constant_image_encodes_to_constant() {
        let img = Image::filled(12, 8, 3, 77).unwrap();
        for (b1, b2) in [(1, 1), (2, 2), (4, 2), (3, 4)] {
            let rep = block_mean_encode(&img, b1, b2, PadMode::Reject).unwrap();
            assert!(rep.samples().iter().all(|&s| s == 77));
            assert_eq!(rep.rate(), 1.0 / (b1 * b2) as f64);
            assert_eq!((rep.width(), rep.height()), (12 / b1, 8 / b2));
        }
    }

    #[test]
    fn exact_and_half_means() {
        let rep = block_mean_encode(&gray(2, 2, vec![1, 3, 5, 7]), 2, 2, PadMode::Reject).unwrap();
        assert_eq!(rep.samples(), &[4]);
        assert_eq!(rep.rate(), 0.25);
        let rep = block_mean_encode(&gray(2, 2, vec![1, 2, 3, 4]), 2, 2, PadMode::Reject).unwrap();
        assert_eq!(rep.samples(), &[3]);
    }

    #[test]
    fn indivisible_dimensions() {
        let img = gray(5, 4, (0..20).collect());
        assert!(matches!(
            block_mean_encode(&img, 2, 2, PadMode::Reject),
            Err(Error::DimensionMismatch(_))
        ));
        let rep = block_mean_encode(&img, 2, 2, PadMode::Replicate).unwrap();
        assert_eq!((rep.width(), rep.height()), (3, 2));
        assert!(rep.layout().padded());
        // last column block replicates x=4: rows 0,1 -> {4,4,9,9}
        assert_eq!(rep.get(2, 0, 0), 7);
    }

    #[test]
    fn binary_expansion_of_single_sample() {
        let layout = RepLayout {
            block_w: 1,
            block_h: 1,
            orig_width: 1,
            orig_height: 1,
            width: 1,
            height: 1,
            channels: 1,
            bit_depth: 8,
        };
        let rep = CompressedRep::new(layout, vec![0b1011_0010]).unwrap();
        let frame = split_bitplanes(&rep);
        let bits: Vec<u8> = (1..=8).map(|k| frame.plane(k)[0]).collect();
        assert_eq!(bits, vec![0, 1, 0, 0, 1, 1, 0, 1]);
        let w = frame.weights();
        assert_eq!(w[0], 1.0);
        assert_eq!(w[7], 4f64.powi(7));
    }

    #[test]
    fn zero_rep_gives_zero_planes() {
        let rep = block_mean_encode(&Image::filled(4, 4, 1, 0).unwrap(), 2, 2, PadMode::Reject).unwrap();
        let frame = split_bitplanes(&rep);
        assert_eq!(frame.depth(), 8);
        assert!(frame.planes().iter().all(|p| p.iter().all(|&b| b == 0)));
    }

    #[test]
    fn merge_rejects_unequal_planes() {
        let rep = block_mean_encode(&Image::filled(4, 4, 1, 9).unwrap(), 2, 2, PadMode::Reject).unwrap();
        let mut planes = split_bitplanes(&rep).into_planes();
        planes[3].pop();
        assert!(matches!(
            merge_planes(*rep.layout(), planes),
            Err(Error::LengthMismatch { .. })
        ));
    }

    #[test]
    fn merge_split_exhaustive_small_depth() {
        // every 2-sample rep at K = 4
        for a in 0..16u16 {
            for b in 0..16u16 {
                let layout = RepLayout {
                    block_w: 1,
                    block_h: 1,
                    orig_width: 2,
                    orig_height: 1,
                    width: 2,
                    height: 1,
                    channels: 1,
                    bit_depth: 4,
                };
                let rep = CompressedRep::new(layout, vec![a, b]).unwrap();
                assert_eq!(merge_bitplanes(&split_bitplanes(&rep)).unwrap(), rep);
            }
        }
    }

    #[test]
    fn lcr_file_round_trip() {
        let img = Image::from_fn(10, 6, 3, |x, y, c| (x * 20 + y * 7 + c) as u16).unwrap();
        let rep = block_mean_encode(&img, 3, 2, PadMode::Replicate).unwrap();
        let mut buf = Vec::new();
        rep.write_to(&mut buf).unwrap();
        assert_eq!(&buf[0..4], b"LCR1");
        assert_eq!(buf.len(), 16 + rep.samples().len());
        let back = CompressedRep::read_from(&buf[..], Path::new("mem")).unwrap();
        assert_eq!(back, rep);
        assert!(CompressedRep::read_from(&buf[..10], Path::new("mem")).is_err());
    }

    proptest! {
        #[test]
        fn merge_inverts_split(
            depth in 1u8..=12,
            w in 1usize..9,
            h in 1usize..9,
            seed in any::<u64>(),
        ) {
            let layout = RepLayout {
                block_w: 2, block_h: 2, orig_width: 2 * w, orig_height: 2 * h,
                width: w, height: h, channels: 1, bit_depth: depth,
            };
            let max = max_value(depth) as u64;
            let samples: Vec<u16> = (0..w * h)
                .map(|i| (crate::phy::rng::stream_seed(seed, i as u64, 0) % (max + 1)) as u16)
                .collect();
            let rep = CompressedRep::new(layout, samples).unwrap();
            prop_assert_eq!(merge_bitplanes(&split_bitplanes(&rep)).unwrap(), rep);
        }

        #[test]
        fn encode_commutes_with_offset(
            base in proptest::collection::vec(20u16..200, 16),
            offset in 0u16..40,
        ) {
            // values stay inside [20, 240), so no clamping
            let img = gray(4, 4, base.clone());
            let shifted = gray(4, 4, base.iter().map(|&v| v + offset).collect());
            let a = block_mean_encode(&img, 2, 2, PadMode::Reject).unwrap();
            let b = block_mean_encode(&shifted, 2, 2, PadMode::Reject).unwrap();
            for (x, y) in a.samples().iter().zip(b.samples()) {
                prop_assert_eq!(*x + offset, *y);
            }
        }
    }
}
