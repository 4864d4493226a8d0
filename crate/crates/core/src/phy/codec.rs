//! Weak channel codes: pass-through, repetition, systematic Hamming(7,4),
//! and the rate-1/2 zero-terminated convolutional code with Viterbi decoding.
//!
//! Hamming(7,4) codewords are `[d1 d2 d3 d4 p1 p2 p3]` with parity
//! `p = d * P` over GF(2) and
//!
//! ```text
//!       p1 p2 p3
//! d1 [  1  1  0 ]
//! d2 [  1  0  1 ]
//! d3 [  0  1  1 ]
//! d4 [  1  1  1 ]
//! ```
//!
//! LLRs follow `ln P(b=0) / P(b=1)`: positive means zero.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Parity rows of the systematic Hamming(7,4) generator, one per data bit.
pub const HAMMING_PARITY: [[u8; 3]; 4] = [[1, 1, 0], [1, 0, 1], [0, 1, 1], [1, 1, 1]];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
#[derive(Default)]
pub enum CodecSpec {
    #[default]
    Uncoded,
    Repetition {
        n: usize,
    },
    Hamming74,
    /// Rate 1/2 feed-forward code; generators are given in octal notation
    /// with the most significant tap on the current input bit.
    Convolutional {
        constraint_length: usize,
        generators: [u32; 2],
    },
}

impl CodecSpec {
    /// The (171, 133) octal, constraint-length 7 code.
    pub fn standard_convolutional() -> Self {
        CodecSpec::Convolutional {
            constraint_length: 7,
            generators: [0o171, 0o133],
        }
    }

    pub fn code_rate(&self) -> f64 {
        match self {
            CodecSpec::Uncoded => 1.0,
            CodecSpec::Repetition { n } => 1.0 / *n as f64,
            CodecSpec::Hamming74 => 4.0 / 7.0,
            CodecSpec::Convolutional { .. } => 0.5,
        }
    }

    pub fn encoded_len(&self, info_len: usize) -> usize {
        match self {
            CodecSpec::Uncoded => info_len,
            CodecSpec::Repetition { n } => n * info_len,
            CodecSpec::Hamming74 => info_len.div_ceil(4) * 7,
            CodecSpec::Convolutional { constraint_length, .. } => 2 * (info_len + constraint_length - 1),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            CodecSpec::Repetition { n } if *n == 0 => {
                Err(Error::InvalidParameter("repetition factor must be at least 1".into()))
            }
            CodecSpec::Convolutional {
                constraint_length,
                generators,
            } => {
                if !(2..=16).contains(constraint_length) {
                    return Err(Error::InvalidParameter(format!(
                        "constraint length {constraint_length} outside 2..=16"
                    )));
                }
                let limit = 1u32 << constraint_length;
                if generators.iter().any(|&g| g == 0 || g >= limit) {
                    return Err(Error::InvalidParameter(
                        "generator polynomial does not fit the constraint length".into(),
                    ));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    pub fn label(&self) -> String {
        match self {
            CodecSpec::Uncoded => "uncoded".into(),
            CodecSpec::Repetition { n } => format!("repetition{n}"),
            CodecSpec::Hamming74 => "hamming74".into(),
            CodecSpec::Convolutional {
                constraint_length,
                generators,
            } => format!("conv_k{constraint_length}_{:o}_{:o}", generators[0], generators[1]),
        }
    }
}

/// What the decoder sees: hard bits or per-bit LLRs.
#[derive(Debug, Clone, Copy)]
pub enum Received<'a> {
    Hard(&'a [u8]),
    Soft(&'a [f64]),
}

impl Received<'_> {
    fn len(&self) -> usize {
        match self {
            Received::Hard(b) => b.len(),
            Received::Soft(l) => l.len(),
        }
    }

    fn hard_bits(&self) -> Vec<u8> {
        match self {
            Received::Hard(b) => b.iter().map(|&x| (x != 0) as u8).collect(),
            Received::Soft(l) => l.iter().map(|&x| (x < 0.0) as u8).collect(),
        }
    }

    fn soft_values(&self) -> Vec<f64> {
        match self {
            Received::Hard(b) => b.iter().map(|&x| if x != 0 { -1.0 } else { 1.0 }).collect(),
            Received::Soft(l) => l.to_vec(),
        }
    }
}

pub fn wcc_encode(bits: &[u8], spec: &CodecSpec) -> Vec<u8> {
    match spec {
        CodecSpec::Uncoded => bits.to_vec(),
        CodecSpec::Repetition { n } => bits.iter().flat_map(|&b| std::iter::repeat_n(b, *n)).collect(),
        CodecSpec::Hamming74 => {
            let mut out = Vec::with_capacity(spec.encoded_len(bits.len()));
            for chunk in bits.chunks(4) {
                let mut d = [0u8; 4];
                d[..chunk.len()].copy_from_slice(chunk);
                out.extend_from_slice(&hamming_codeword(d));
            }
            out
        }
        CodecSpec::Convolutional {
            constraint_length,
            generators,
        } => conv_encode(bits, *constraint_length, *generators),
    }
}

/// Decodes `info_len` information bits from a received block.
pub fn wcc_decode(received: Received<'_>, spec: &CodecSpec, info_len: usize) -> Result<Vec<u8>> {
    let expected = spec.encoded_len(info_len);
    if received.len() != expected {
        return Err(Error::LengthMismatch {
            expected,
            actual: received.len(),
        });
    }
    Ok(match spec {
        CodecSpec::Uncoded => received.hard_bits(),
        CodecSpec::Repetition { n } => received
            .hard_bits()
            .chunks(*n)
            .map(|c| (2 * c.iter().map(|&b| b as usize).sum::<usize>() > *n) as u8)
            .collect(),
        CodecSpec::Hamming74 => {
            let hard = received.hard_bits();
            let mut out: Vec<u8> = hard
                .chunks(7)
                .flat_map(|c| hamming_correct(c.try_into().unwrap()))
                .collect();
            out.truncate(info_len);
            out
        }
        CodecSpec::Convolutional {
            constraint_length,
            generators,
        } => viterbi_decode(&received.soft_values(), info_len, *constraint_length, *generators),
    })
}

fn hamming_codeword(d: [u8; 4]) -> [u8; 7] {
    let mut p = [0u8; 3];
    for (i, row) in HAMMING_PARITY.iter().enumerate() {
        for j in 0..3 {
            p[j] ^= d[i] & row[j];
        }
    }
    [d[0], d[1], d[2], d[3], p[0], p[1], p[2]]
}

/// Syndrome decoding: corrects up to one flipped bit and returns the data.
fn hamming_correct(c: [u8; 7]) -> [u8; 4] {
    let mut c = c;
    let mut syn = [c[4], c[5], c[6]];
    for (i, row) in HAMMING_PARITY.iter().enumerate() {
        for j in 0..3 {
            syn[j] ^= c[i] & row[j];
        }
    }
    if syn != [0, 0, 0] {
        let pos = HAMMING_PARITY
            .iter()
            .position(|r| *r == syn)
            .or(match syn {
                [1, 0, 0] => Some(4),
                [0, 1, 0] => Some(5),
                [0, 0, 1] => Some(6),
                _ => None,
            })
            .expect("every nonzero syndrome maps to a column of H");
        c[pos] ^= 1;
    }
    [c[0], c[1], c[2], c[3]]
}

#[inline]
fn parity(x: u32) -> u8 {
    (x.count_ones() & 1) as u8
}

fn conv_encode(bits: &[u8], k: usize, gens: [u32; 2]) -> Vec<u8> {
    let mut out = Vec::with_capacity(2 * (bits.len() + k - 1));
    let mut state = 0u32;
    let tail = std::iter::repeat_n(0u8, k - 1);
    for b in bits.iter().copied().chain(tail) {
        let reg = (((b != 0) as u32) << (k - 1)) | state;
        out.push(parity(reg & gens[0]));
        out.push(parity(reg & gens[1]));
        state = reg >> 1;
    }
    out
}

/// Soft-input Viterbi over the terminated trellis. Branch metric is the
/// correlation `sum (1 - 2c) * llr`, maximized.
fn viterbi_decode(llrs: &[f64], info_len: usize, k: usize, gens: [u32; 2]) -> Vec<u8> {
    let n_states = 1usize << (k - 1);
    let steps = info_len + k - 1;
    let mask = (n_states - 1) as u32;

    // outputs[reg] for every (input, state) register value
    let outputs: Vec<[f64; 2]> = (0..(2 * n_states) as u32)
        .map(|reg| {
            [
                1.0 - 2.0 * parity(reg & gens[0]) as f64,
                1.0 - 2.0 * parity(reg & gens[1]) as f64,
            ]
        })
        .collect();

    let mut metric = vec![f64::NEG_INFINITY; n_states];
    metric[0] = 0.0;
    let mut next = vec![0.0; n_states];
    let mut decisions = vec![0u8; steps * n_states];

    for t in 0..steps {
        let (l0, l1) = (llrs[2 * t], llrs[2 * t + 1]);
        let dec = &mut decisions[t * n_states..(t + 1) * n_states];
        for ns in 0..n_states as u32 {
            // ns = reg >> 1, reg = (u << (k-1)) | s, so s = (ns << 1 | b) & mask
            let u = ns >> (k - 2);
            let mut best = f64::NEG_INFINITY;
            let mut choice = 0u8;
            for b in 0..2u32 {
                let s = ((ns << 1) | b) & mask;
                let m = metric[s as usize];
                if m == f64::NEG_INFINITY {
                    continue;
                }
                let reg = (u << (k - 1)) | s;
                let o = outputs[reg as usize];
                let cand = m + o[0] * l0 + o[1] * l1;
                if cand > best {
                    best = cand;
                    choice = b as u8;
                }
            }
            next[ns as usize] = best;
            dec[ns as usize] = choice;
        }
        std::mem::swap(&mut metric, &mut next);
    }

    let mut bits = vec![0u8; steps];
    let mut state = 0u32;
    for t in (0..steps).rev() {
        bits[t] = (state >> (k - 2)) as u8 & 1;
        let b = decisions[t * n_states + state as usize] as u32;
        state = ((state << 1) | b) & mask;
    }
    bits.truncate(info_len);
    bits
}
