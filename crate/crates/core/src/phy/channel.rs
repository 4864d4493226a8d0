//! Orthogonal AWGN sub-channels `y = h sqrt(p) x + n` and zero-forcing
//! equalization with perfect channel knowledge.

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::phy::modulation::Modulation;
use crate::phy::rng::seeded;

/// One sub-stream on its own sub-channel.
#[derive(Debug, Clone)]
pub struct SubStream {
    pub index: usize,
    pub symbols: Vec<Complex64>,
    pub gain: Complex64,
    /// Linear power per symbol.
    pub power: f64,
    /// Complex noise variance, linear.
    pub noise_var: f64,
}

impl SubStream {
    pub fn new(index: usize, symbols: Vec<Complex64>, gain: Complex64, power: f64, noise_var: f64) -> Self {
        Self {
            index,
            symbols,
            gain,
            power,
            noise_var,
        }
    }

    /// Received SNR `p |h|^2 / sigma^2`.
    pub fn snr(&self) -> f64 {
        self.power * self.gain.norm_sqr() / self.noise_var
    }

    fn check(&self) -> Result<()> {
        if !(self.power >= 0.0) {
            return Err(Error::InvalidParameter(format!("negative power {}", self.power)));
        }
        if !(self.noise_var > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "noise variance must be positive, got {}",
                self.noise_var
            )));
        }
        Ok(())
    }
}

/// Passes the stream through its channel with circular Gaussian noise,
/// `sigma^2 / 2` per real component. Same seed, same output.
pub fn transmit_awgn(sub: &SubStream, seed: u64) -> Result<Vec<Complex64>> {
    sub.check()?;
    let mut rng = seeded(seed);
    let amp = sub.gain * sub.power.sqrt();
    let std = (sub.noise_var / 2.0).sqrt();
    Ok(sub
        .symbols
        .iter()
        .map(|&x| {
            let nr: f64 = rng.sample(StandardNormal);
            let ni: f64 = rng.sample(StandardNormal);
            amp * x + Complex64::new(nr * std, ni * std)
        })
        .collect())
}

/// Equalizer output and per-bit decisions.
#[derive(Debug, Clone)]
pub struct Demodulated {
    pub equalized: Vec<Complex64>,
    pub hard: Vec<u8>,
    pub llrs: Vec<f64>,
}

/// `x_hat = y / (h sqrt(p))`, then Gray slicing and max-log LLRs with the
/// post-equalization noise variance `sigma^2 / (p |h|^2)`.
pub fn equalize_demodulate(y: &[Complex64], sub: &SubStream, modulation: &Modulation) -> Result<Demodulated> {
    let amp = sub.gain * sub.power.sqrt();
    if amp.norm_sqr() == 0.0 || !amp.norm_sqr().is_finite() {
        return Err(Error::ZeroGain);
    }
    let inv = amp.inv();
    let equalized: Vec<Complex64> = y.iter().map(|&v| v * inv).collect();
    let eq_var = sub.noise_var / amp.norm_sqr();
    let (hard, llrs) = modulation.demodulate(&equalized, eq_var);
    Ok(Demodulated { equalized, hard, llrs })
}
