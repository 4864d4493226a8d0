//! Physical chain: weak channel codes, QAM, AWGN sub-channels, equalization.

pub mod bits;
pub mod channel;
pub mod codec;
pub mod modulation;
pub mod rng;

pub use channel::{equalize_demodulate, transmit_awgn, Demodulated, SubStream};
pub use codec::{wcc_decode, wcc_encode, CodecSpec, Received};
pub use modulation::{db_to_linear, ebno_to_snr, linear_to_db, snr_to_ebno, Modulation};

use num_complex::Complex64;

use crate::error::Result;

/// Result of pushing one bit sequence through code, modulation and channel.
#[derive(Debug, Clone)]
pub struct LinkOutput {
    pub decoded: Vec<u8>,
    /// Channel bit errors on the coded bits, before decoding.
    pub raw_errors: usize,
    pub coded_len: usize,
}

/// Encodes, modulates, transmits over one sub-channel, equalizes and decodes.
/// Soft LLRs feed the convolutional decoder; the others use hard decisions.
pub fn run_link(
    bits: &[u8],
    codec: &CodecSpec,
    modulation: &Modulation,
    gain: Complex64,
    power: f64,
    noise_var: f64,
    seed: u64,
) -> Result<LinkOutput> {
    let coded = wcc_encode(bits, codec);
    let sub = SubStream::new(0, modulation.modulate(&coded), gain, power, noise_var);
    let y = transmit_awgn(&sub, seed)?;
    let demod = equalize_demodulate(&y, &sub, modulation)?;
    let n = coded.len();
    let raw_errors = bits::hamming_distance(&demod.hard[..n], &coded);
    let received = match codec {
        CodecSpec::Convolutional { .. } => Received::Soft(&demod.llrs[..n]),
        _ => Received::Hard(&demod.hard[..n]),
    };
    let decoded = wcc_decode(received, codec, bits.len())?;
    Ok(LinkOutput {
        decoded,
        raw_errors,
        coded_len: n,
    })
}
