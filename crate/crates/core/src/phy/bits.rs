//! Bit sequences as `Vec<u8>` of 0/1, and their packed on-disk form:
//! a little-endian `u64` bit count followed by bytes filled LSB-first.

use std::io::{Read, Write};

use crate::error::{Error, Result};

pub fn pack(bits: &[u8]) -> Vec<u8> {
    let mut out = Vec::with_capacity(8 + bits.len().div_ceil(8));
    out.extend_from_slice(&(bits.len() as u64).to_le_bytes());
    for chunk in bits.chunks(8) {
        let byte = chunk
            .iter()
            .enumerate()
            .fold(0u8, |acc, (i, &b)| acc | (((b != 0) as u8) << i));
        out.push(byte);
    }
    out
}

pub fn unpack(bytes: &[u8]) -> Result<Vec<u8>> {
    if bytes.len() < 8 {
        return Err(Error::InvalidParameter("packed bits: missing header".into()));
    }
    let n = u64::from_le_bytes(bytes[..8].try_into().unwrap()) as usize;
    let body = &bytes[8..];
    if body.len() != n.div_ceil(8) {
        return Err(Error::LengthMismatch {
            expected: n.div_ceil(8),
            actual: body.len(),
        });
    }
    Ok((0..n).map(|i| (body[i / 8] >> (i % 8)) & 1).collect())
}

pub fn write_bits(mut w: impl Write, bits: &[u8]) -> Result<()> {
    w.write_all(&pack(bits))?;
    Ok(())
}

pub fn read_bits(mut r: impl Read) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    r.read_to_end(&mut buf)?;
    unpack(&buf)
}

/// Number of positions where `a` and `b` differ (nonzero counts as one).
pub fn hamming_distance(a: &[u8], b: &[u8]) -> usize {
    a.iter().zip(b).filter(|(x, y)| (**x != 0) != (**y != 0)).count()
}
