//! Square M-QAM with per-axis Gray labelling, unit average energy.
//!
//! Each symbol carries `log2 M` bits: the first half selects the quadrature
//! level, the second half the in-phase level. Along an axis the Gray-decoded
//! index `i` maps to amplitude `(m - 1 - 2i) * scale`, `m = sqrt(M)`. For QPSK
//! this gives 00 -> (+1+j)/sqrt2, 01 -> (-1+j)/sqrt2, 11 -> (-1-j)/sqrt2,
//! 10 -> (+1-j)/sqrt2.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Modulation {
    order: usize,
}

impl Default for Modulation {
    fn default() -> Self {
        Self::QPSK
    }
}

impl Modulation {
    pub const QPSK: Modulation = Modulation { order: 4 };

    pub fn new(order: usize) -> Result<Self> {
        let bits = order.trailing_zeros() as usize;
        if order < 4 || !order.is_power_of_two() || !bits.is_multiple_of(2) || bits > 16 {
            return Err(Error::InvalidParameter(format!(
                "constellation order {order} is not a square QAM size"
            )));
        }
        Ok(Self { order })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn bits_per_symbol(&self) -> usize {
        self.order.trailing_zeros() as usize
    }

    fn bits_per_axis(&self) -> usize {
        self.bits_per_symbol() / 2
    }

    fn levels_per_axis(&self) -> usize {
        1 << self.bits_per_axis()
    }

    /// Amplitude scale giving `E|x|^2 = 1`: `sqrt(3 / (2 (M - 1)))`.
    pub fn scale(&self) -> f64 {
        (3.0 / (2.0 * (self.order as f64 - 1.0))).sqrt()
    }

    /// Number of symbols produced for `n_bits` input bits (zero-padded).
    pub fn symbols_for(&self, n_bits: usize) -> usize {
        n_bits.div_ceil(self.bits_per_symbol())
    }

    fn level(&self, index: usize) -> f64 {
        (self.levels_per_axis() as f64 - 1.0 - 2.0 * index as f64) * self.scale()
    }

    /// All `M` constellation points indexed by their label.
    pub fn constellation(&self) -> Vec<Complex64> {
        let bps = self.bits_per_symbol();
        (0..self.order)
            .map(|label| {
                let bits: Vec<u8> = (0..bps).map(|i| ((label >> (bps - 1 - i)) & 1) as u8).collect();
                self.map_symbol(&bits)
            })
            .collect()
    }

    fn map_symbol(&self, bits: &[u8]) -> Complex64 {
        let q = self.bits_per_axis();
        let (q_bits, i_bits) = bits.split_at(q);
        Complex64::new(
            self.level(gray_decode(to_int(i_bits))),
            self.level(gray_decode(to_int(q_bits))),
        )
    }

    pub fn modulate(&self, bits: &[u8]) -> Vec<Complex64> {
        let bps = self.bits_per_symbol();
        bits.chunks(bps)
            .map(|chunk| {
                if chunk.len() == bps {
                    self.map_symbol(chunk)
                } else {
                    let mut padded = chunk.to_vec();
                    padded.resize(bps, 0);
                    self.map_symbol(&padded)
                }
            })
            .collect()
    }

    /// Nearest-level axis index for an equalized coordinate.
    fn slice_axis(&self, v: f64) -> usize {
        let m = self.levels_per_axis() as f64;
        let idx = ((m - 1.0 - v / self.scale()) / 2.0).round();
        idx.clamp(0.0, m - 1.0) as usize
    }

    /// Hard bits and max-log LLRs for equalized symbols. `noise_var` is the
    /// complex noise variance after equalization, `sigma^2 / (p |h|^2)`.
    pub fn demodulate(&self, symbols: &[Complex64], noise_var: f64) -> (Vec<u8>, Vec<f64>) {
        let q = self.bits_per_axis();
        let m = self.levels_per_axis();
        let levels: Vec<f64> = (0..m).map(|i| self.level(i)).collect();
        // Gray labels of each level
        let labels: Vec<usize> = (0..m).map(gray_encode).collect();
        let mut hard = Vec::with_capacity(symbols.len() * 2 * q);
        let mut llrs = Vec::with_capacity(symbols.len() * 2 * q);
        let axis = |v: f64, hard: &mut Vec<u8>, llrs: &mut Vec<f64>| {
            let label = labels[self.slice_axis(v)];
            for b in (0..q).rev() {
                hard.push(((label >> b) & 1) as u8);
                let (mut d0, mut d1) = (f64::INFINITY, f64::INFINITY);
                for (lvl, lab) in levels.iter().zip(&labels) {
                    let d = (v - lvl) * (v - lvl);
                    if (lab >> b) & 1 == 0 {
                        d0 = d0.min(d);
                    } else {
                        d1 = d1.min(d);
                    }
                }
                llrs.push((d1 - d0) / noise_var);
            }
        };
        for s in symbols {
            axis(s.im, &mut hard, &mut llrs);
            axis(s.re, &mut hard, &mut llrs);
        }
        (hard, llrs)
    }
}

fn to_int(bits: &[u8]) -> usize {
    bits.iter().fold(0, |acc, &b| (acc << 1) | (b != 0) as usize)
}

fn gray_decode(mut g: usize) -> usize {
    let mut b = g;
    while g > 0 {
        g >>= 1;
        b ^= g;
    }
    b
}

fn gray_encode(b: usize) -> usize {
    b ^ (b >> 1)
}

/// Per-symbol SNR from Eb/N0 (both linear): `snr = EbN0 * log2(M) * Rc`.
pub fn ebno_to_snr(ebno: f64, modulation: &Modulation, code_rate: f64) -> f64 {
    ebno * modulation.bits_per_symbol() as f64 * code_rate
}

pub fn snr_to_ebno(snr: f64, modulation: &Modulation, code_rate: f64) -> f64 {
    snr / (modulation.bits_per_symbol() as f64 * code_rate)
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_to_db(lin: f64) -> f64 {
    10.0 * lin.log10()
}

#[cfg(test)]
mod tests {
    use super::*;

    const R: f64 = std::f64::consts::FRAC_1_SQRT_2;

    #[test]
    fn qpsk_table() {
        let m = Modulation::QPSK;
        let cases = [
            ([0, 0], Complex64::new(R, R)),
            ([0, 1], Complex64::new(-R, R)),
            ([1, 1], Complex64::new(-R, -R)),
            ([1, 0], Complex64::new(R, -R)),
        ];
        for (bits, want) in cases {
            let got = m.modulate(&bits)[0];
            assert!((got - want).norm() < 1e-15, "{bits:?}");
        }
        assert!(m.modulate(&[]).is_empty());
        assert_eq!(m.modulate(&[1]).len(), 1);
    }

    #[test]
    fn unit_energy() {
        for order in [4, 16, 64, 256] {
            let m = Modulation::new(order).unwrap();
            let pts = m.constellation();
            let e: f64 = pts.iter().map(|p| p.norm_sqr()).sum::<f64>() / order as f64;
            assert!((e - 1.0).abs() < 1e-12, "M={order}: {e}");
        }
        assert!(Modulation::new(8).is_err());
        assert!(Modulation::new(2).is_err());
    }

    #[test]
    fn gray_neighbours_differ_in_one_bit() {
        for order in [16, 64] {
            let m = Modulation::new(order).unwrap();
            let pts = m.constellation();
            let dmin = 2.0 * m.scale();
            for a in 0..order {
                for b in 0..order {
                    if ((pts[a] - pts[b]).norm() - dmin).abs() < 1e-9 {
                        assert_eq!((a ^ b).count_ones(), 1);
                    }
                }
            }
        }
    }

    #[test]
    fn demodulate_inverts_modulate_and_llr_signs_agree() {
        for order in [4, 16, 64] {
            let m = Modulation::new(order).unwrap();
            let bps = m.bits_per_symbol();
            let bits: Vec<u8> = (0..order * bps).map(|i| ((i * 7 + i / 3) % 2) as u8).collect();
            let syms = m.modulate(&bits);
            let (hard, llrs) = m.demodulate(&syms, 0.1);
            assert_eq!(hard, bits);
            // perturbed points: sign(llr) must match hard decision
            let noisy: Vec<Complex64> = syms
                .iter()
                .enumerate()
                .map(|(i, s)| {
                    s + Complex64::new(
                        ((i * 37) % 11) as f64 * 0.03 - 0.15,
                        ((i * 53) % 7) as f64 * 0.04 - 0.12,
                    )
                })
                .collect();
            let (hard, llrs2) = m.demodulate(&noisy, 0.2);
            for (h, l) in hard.iter().zip(&llrs2) {
                assert_eq!(*h == 1, *l < 0.0);
            }
            assert!(llrs.iter().all(|l| l.is_finite()));
        }
    }

    #[test]
    fn qpsk_llr_closed_form() {
        // exact QPSK LLR is 4 a y / var with a = 1/sqrt2
        let m = Modulation::QPSK;
        let y = Complex64::new(0.3, -0.8);
        let (_, llr) = m.demodulate(&[y], 0.5);
        assert!((llr[0] - 4.0 * R * y.im / 0.5).abs() < 1e-12);
        assert!((llr[1] - 4.0 * R * y.re / 0.5).abs() < 1e-12);
    }

    #[test]
    fn ebno_conversion() {
        let snr = ebno_to_snr(2.0, &Modulation::QPSK, 4.0 / 7.0);
        assert!((snr - 16.0 / 7.0).abs() < 1e-15);
        assert!((snr_to_ebno(snr, &Modulation::QPSK, 4.0 / 7.0) - 2.0).abs() < 1e-15);
        assert!((linear_to_db(db_to_linear(-3.7)) + 3.7).abs() < 1e-12);
    }
}
