//! Analytic residual-error models: uncoded M-QAM BER, the exponential
//! coded-BER fit, importance-weighted MSE, and residual-error injectors
//! for the weak-code (scattered Gaussian) and strong-code (bursty) regimes.

use std::io::{BufRead, Write};
use std::path::Path;

use num_complex::Complex64;
use rand::seq::index::sample;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::round_clamp;
use crate::phy::bits::hamming_distance;
use crate::phy::rng::{seeded, stream_seed};
use crate::phy::{run_link, CodecSpec, Modulation};
use crate::source_codec::{BitPlaneFrame, CompressedRep};

/// Gaussian tail probability `Q(x) = erfc(x / sqrt 2) / 2`.
pub fn q_function(x: f64) -> f64 {
    0.5 * libm::erfc(x / std::f64::consts::SQRT_2)
}

/// `ber = alpha Q(beta sqrt(snr))` for square M-QAM with Gray labelling.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UncodedBerModel {
    pub order: usize,
    pub alpha: f64,
    pub beta: f64,
}

impl UncodedBerModel {
    pub fn new(order: usize) -> Self {
        let m = order as f64;
        Self {
            order,
            alpha: 4.0 / m.log2() * (1.0 - 1.0 / m.sqrt()),
            beta: (3.0 / (m - 1.0)).sqrt(),
        }
    }

    pub fn ber(&self, snr: f64) -> Result<f64> {
        if snr < 0.0 || snr.is_nan() {
            return Err(Error::NegativeSnr(snr));
        }
        Ok(self.ber_unchecked(snr))
    }

    pub(crate) fn ber_unchecked(&self, snr: f64) -> f64 {
        self.alpha * q_function(self.beta * snr.max(0.0).sqrt())
    }

    /// `d ber / d snr`, unbounded as `snr -> 0`.
    pub fn derivative(&self, snr: f64) -> f64 {
        -self.alpha * self.beta / (2.0 * (2.0 * std::f64::consts::PI * snr).sqrt())
            * (-self.beta * self.beta * snr / 2.0).exp()
    }
}

/// `ber = alpha exp(beta snr)` with `alpha >= 0`, `beta <= 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CodedBerModel {
    pub alpha: f64,
    pub beta: f64,
}

impl CodedBerModel {
    pub fn new(alpha: f64, beta: f64) -> Result<Self> {
        if !(alpha >= 0.0) || !(beta <= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "coded BER model needs alpha >= 0 and beta <= 0, got ({alpha}, {beta})"
            )));
        }
        Ok(Self { alpha, beta })
    }

    pub fn ber(&self, snr: f64) -> f64 {
        self.alpha * (self.beta * snr).exp()
    }

    pub fn derivative(&self, snr: f64) -> f64 {
        self.alpha * self.beta * (self.beta * snr).exp()
    }
}

/// Outcome of a log-linear coded-BER fit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CodedBerFit {
    pub model: CodedBerModel,
    /// Largest `|fit - measured| / measured` over the samples used.
    pub max_rel_err: f64,
    /// Set when the unconstrained slope came out positive and was forced to 0.
    pub clamped: bool,
    pub samples_used: usize,
}

/// Least-squares fit of `ln ber = ln alpha + beta snr`. Samples with zero
/// measured BER carry no log-domain information and are skipped.
pub fn fit_coded_ber(samples: &[(f64, f64)]) -> Result<CodedBerFit> {
    let used: Vec<(f64, f64)> = samples
        .iter()
        .copied()
        .filter(|&(s, b)| b > 0.0 && s.is_finite() && b.is_finite())
        .collect();
    if used.len() < 2 {
        if !samples.is_empty() && samples.iter().all(|&(_, b)| b == 0.0) {
            return Err(Error::AllZeroBer);
        }
        return Err(Error::InsufficientData(used.len()));
    }
    let n = used.len() as f64;
    let mx = used.iter().map(|p| p.0).sum::<f64>() / n;
    let my = used.iter().map(|p| p.1.ln()).sum::<f64>() / n;
    let sxx: f64 = used.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = used.iter().map(|p| (p.0 - mx) * (p.1.ln() - my)).sum();
    if sxx == 0.0 {
        return Err(Error::InsufficientData(1));
    }
    let mut beta = sxy / sxx;
    let mut intercept = my - beta * mx;
    let clamped = beta > 0.0;
    if clamped {
        log::warn!("fitted coded-BER slope {beta} is positive; clamping to 0");
        beta = 0.0;
        intercept = my;
    }
    let model = CodedBerModel {
        alpha: intercept.exp(),
        beta,
    };
    let max_rel_err = used
        .iter()
        .map(|&(s, b)| (model.ber(s) - b).abs() / b)
        .fold(0.0, f64::max);
    Ok(CodedBerFit {
        model,
        max_rel_err,
        clamped,
        samples_used: used.len(),
    })
}

/// Monte-Carlo bit-error count at one operating point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BerMeasurement {
    pub snr: f64,
    pub bits: usize,
    pub errors: usize,
}

impl BerMeasurement {
    pub fn ber(&self) -> f64 {
        self.errors as f64 / self.bits as f64
    }

    /// Binomial standard deviation of the estimate at probability `p`.
    pub fn std_dev(&self, p: f64) -> f64 {
        (p * (1.0 - p) / self.bits as f64).sqrt()
    }
}

const SIM_CHUNK: usize = 1 << 16;

/// Sends `n_bits` uniform random bits through code, modulation and a unit
/// gain AWGN channel at per-symbol `snr` (linear) and counts decoded errors.
/// Chunks run in parallel; the count does not depend on scheduling.
pub fn simulate_ber(
    codec: &CodecSpec,
    modulation: &Modulation,
    snr: f64,
    n_bits: usize,
    seed: u64,
) -> Result<BerMeasurement> {
    if !(snr >= 0.0) {
        return Err(Error::NegativeSnr(snr));
    }
    codec.validate()?;
    let chunks = n_bits.div_ceil(SIM_CHUNK);
    let errors = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let len = SIM_CHUNK.min(n_bits - c * SIM_CHUNK);
            let mut rng = seeded(stream_seed(seed, c as u64, 0));
            let bits: Vec<u8> = (0..len).map(|_| rng.random::<bool>() as u8).collect();
            if snr == 0.0 {
                // no signal: the receiver's output is independent of the bits
                let mut guess = seeded(stream_seed(seed, c as u64, 1));
                return Ok(bits.iter().filter(|&&b| b != guess.random::<bool>() as u8).count());
            }
            let out = run_link(
                &bits,
                codec,
                modulation,
                Complex64::new(1.0, 0.0),
                snr,
                1.0,
                stream_seed(seed, c as u64, 1),
            )?;
            Ok(hamming_distance(&out.decoded, &bits))
        })
        .collect::<Result<Vec<usize>>>()?
        .into_iter()
        .sum();
    Ok(BerMeasurement {
        snr,
        bits: n_bits,
        errors,
    })
}

/// Measures BER at each snr and fits the exponential coded model.
pub fn fit_simulated_ber(
    codec: &CodecSpec,
    modulation: &Modulation,
    snrs: &[f64],
    n_bits: usize,
    seed: u64,
) -> Result<(Vec<BerMeasurement>, CodedBerFit)> {
    let points = snrs
        .iter()
        .enumerate()
        .map(|(i, &s)| simulate_ber(codec, modulation, s, n_bits, stream_seed(seed, i as u64, 2)))
        .collect::<Result<Vec<_>>>()?;
    let samples: Vec<(f64, f64)> = points.iter().map(|m| (m.snr, m.ber())).collect();
    Ok((points, fit_coded_ber(&samples)?))
}

/// Reads `snr_linear,ber` rows (header required).
pub fn read_ber_csv(path: impl AsRef<Path>) -> Result<Vec<(f64, f64)>> {
    let path = path.as_ref();
    let file = std::io::BufReader::new(std::fs::File::open(path)?);
    let mut lines = file.lines();
    let header = lines.next().transpose()?.unwrap_or_default();
    if header.trim() != "snr_linear,ber" {
        return Err(Error::format(path, "expected header `snr_linear,ber`"));
    }
    let mut out = Vec::new();
    for (i, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let mut parts = line.split(',').map(str::trim);
        let parse = |v: Option<&str>| -> Result<f64> {
            v.and_then(|s| s.parse().ok())
                .ok_or_else(|| Error::format(path, format!("bad number on row {}", i + 2)))
        };
        out.push((parse(parts.next())?, parse(parts.next())?));
    }
    Ok(out)
}

pub fn write_ber_csv(mut w: impl Write, samples: &[(f64, f64)]) -> Result<()> {
    writeln!(w, "snr_linear,ber")?;
    for (s, b) in samples {
        writeln!(w, "{s},{b}")?;
    }
    Ok(())
}

/// `alpha_c,beta_c,max_rel_err` header plus one value row.
pub fn write_fit_record(mut w: impl Write, fit: &CodedBerFit) -> Result<()> {
    writeln!(w, "alpha_c,beta_c,max_rel_err")?;
    writeln!(w, "{},{},{}", fit.model.alpha, fit.model.beta, fit.max_rel_err)?;
    Ok(())
}

pub fn read_fit_record(path: impl AsRef<Path>) -> Result<(CodedBerModel, f64)> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)?;
    let row = text
        .lines()
        .map(str::trim)
        .find(|l| !l.is_empty() && !l.starts_with("alpha_c"))
        .ok_or_else(|| Error::format(path, "missing value row"))?;
    let v: Vec<f64> = row
        .split(',')
        .map(|s| s.trim().parse::<f64>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| Error::format(path, e.to_string()))?;
    if v.len() != 3 {
        return Err(Error::format(path, "expected three fields"));
    }
    Ok((CodedBerModel::new(v[0], v[1])?, v[2]))
}

/// Empirical importance-weighted MSE, `sum_k gamma_k d_H(s_hat_k, s_k) / S`.
pub fn imse(frame_hat: &BitPlaneFrame, frame: &BitPlaneFrame) -> Result<f64> {
    if frame_hat.depth() != frame.depth() || frame_hat.plane_len() != frame.plane_len() {
        return Err(Error::ShapeMismatch(format!(
            "{}x{} vs {}x{} planes",
            frame_hat.depth(),
            frame_hat.plane_len(),
            frame.depth(),
            frame.plane_len()
        )));
    }
    let s = frame.plane_len() as f64;
    Ok(frame
        .weights()
        .iter()
        .zip(frame_hat.planes().iter().zip(frame.planes()))
        .map(|(g, (a, b))| g * hamming_distance(a, b) as f64 / s)
        .sum())
}

/// Predicted IMSE `sum_k gamma_k ber_k`.
pub fn imse_predicted(bers: &[f64], weights: &[f64]) -> f64 {
    bers.iter().zip(weights).map(|(b, g)| b * g).sum()
}

/// IMSE divided by `sum_k gamma_k`, in dB.
pub fn normalized_imse_db(imse: f64, weights: &[f64]) -> f64 {
    10.0 * (imse / weights.iter().sum::<f64>()).log10()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ResidualErrorSpec {
    /// Every sample perturbed by i.i.d. `N(0, variance)`.
    WeakGaussian { variance: f64 },
    /// Disjoint runs of `burst_len` consecutive samples perturbed by
    /// `N(0, variance)` until `budget` samples are corrupted.
    StrongBurst {
        variance: f64,
        burst_len: usize,
        budget: usize,
    },
}

/// Returns `s_hat = s + e` in the quantized domain (rounded, clamped).
pub fn inject_residual_error(rep: &CompressedRep, spec: &ResidualErrorSpec, seed: u64) -> Result<CompressedRep> {
    let mut rng = seeded(seed);
    let max = rep.layout().max_value();
    let n = rep.samples().len();
    let mut out = rep.samples().to_vec();
    let perturb = |v: u16, std: f64, rng: &mut rand_chacha::ChaCha8Rng| {
        let z: f64 = rng.sample(StandardNormal);
        round_clamp(v as f64 + std * z, max)
    };
    match *spec {
        ResidualErrorSpec::WeakGaussian { variance } => {
            if !(variance >= 0.0) {
                return Err(Error::InvalidParameter("variance must be non-negative".into()));
            }
            if variance > 0.0 {
                let std = variance.sqrt();
                for v in &mut out {
                    *v = perturb(*v, std, &mut rng);
                }
            }
        }
        ResidualErrorSpec::StrongBurst {
            variance,
            burst_len,
            budget,
        } => {
            if !(variance >= 0.0) {
                return Err(Error::InvalidParameter("variance must be non-negative".into()));
            }
            if burst_len == 0 {
                return Err(Error::InvalidParameter("burst length must be at least 1".into()));
            }
            if burst_len > n {
                return Err(Error::BurstTooLong {
                    burst: burst_len,
                    samples: n,
                });
            }
            if budget > n {
                return Err(Error::InvalidParameter(format!(
                    "corruption budget {budget} exceeds sample count {n}"
                )));
            }
            if variance > 0.0 && budget > 0 {
                let std = variance.sqrt();
                for (start, len) in burst_runs(n, burst_len, budget, &mut rng) {
                    for v in &mut out[start..start + len] {
                        *v = perturb(*v, std, &mut rng);
                    }
                }
            }
        }
    }
    rep.with_samples(out)
}

/// Uniformly placed disjoint runs covering exactly `budget` positions; the
/// last run is shortened when `budget` is not a multiple of `len`.
fn burst_runs(n: usize, len: usize, budget: usize, rng: &mut impl Rng) -> Vec<(usize, usize)> {
    let runs = budget.div_ceil(len);
    let mut lens = vec![len; runs];
    if let Some(last) = lens.last_mut() {
        *last = budget - (runs - 1) * len;
    }
    // place `runs` blocks among `n - budget` free slots: choose run slots
    // from `free + runs` positions
    let free = n - budget;
    let mut slots = sample(rng, free + runs, runs).into_vec();
    slots.sort_unstable();
    let mut out = Vec::with_capacity(runs);
    let mut consumed = 0;
    for (i, (slot, l)) in slots.into_iter().zip(lens).enumerate() {
        let start = slot - i + consumed;
        out.push((start, l));
        consumed += l;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::image::Image;
    use crate::source_codec::{block_mean_encode, split_bitplanes, PadMode, RepLayout};

    #[test]
    fn q_values() {
        assert_eq!(q_function(0.0), 0.5);
        assert!((q_function(-1.7) - (1.0 - q_function(1.7))).abs() < 1e-15);
        assert!((q_function(2.0) - 0.0227501).abs() < 1e-6);
        // independent oracle: Simpson quadrature of the Gaussian density
        let n = 20_000;
        let (a, b) = (2.0, 12.0);
        let h = (b - a) / n as f64;
        let pdf = |t: f64| (-t * t / 2.0).exp() / (2.0 * std::f64::consts::PI).sqrt();
        let simpson: f64 = (0..=n)
            .map(|i| {
                let w = if i == 0 || i == n {
                    1.0
                } else if i % 2 == 1 {
                    4.0
                } else {
                    2.0
                };
                w * pdf(a + i as f64 * h)
            })
            .sum::<f64>()
            * h
            / 3.0;
        assert!((q_function(2.0) - simpson).abs() < 1e-12);
    }

    #[test]
    fn uncoded_ber_values() {
        assert_eq!(UncodedBerModel::new(4).ber(0.0).unwrap(), 0.5);
        assert!((UncodedBerModel::new(16).ber(0.0).unwrap() - 0.375).abs() < 1e-15);
        assert!((UncodedBerModel::new(4).ber(4.0).unwrap() - 0.0227501).abs() < 1e-6);
        assert!(matches!(UncodedBerModel::new(4).ber(-1.0), Err(Error::NegativeSnr(_))));
    }

    #[test]
    fn uncoded_ber_decreasing_convex() {
        for order in [4, 16, 64] {
            let m = UncodedBerModel::new(order);
            let h = 1e-3;
            let mut prev = m.alpha / 2.0;
            for i in 1..4000 {
                let s = i as f64 * 0.01;
                let f = m.ber(s).unwrap();
                assert!(f < prev && f <= m.alpha / 2.0);
                prev = f;
                let second = m.ber(s + h).unwrap() - 2.0 * f + m.ber(s - h).unwrap();
                assert!(second >= -1e-15, "M={order} snr={s}");
                let hd = s * 1e-4;
                let fd = (m.ber(s + hd).unwrap() - m.ber(s - hd).unwrap()) / (2.0 * hd);
                assert!((fd - m.derivative(s)).abs() <= 1e-5 * fd.abs().max(1e-12));
            }
        }
    }

    #[test]
    fn fit_recovers_planted_model() {
        let samples: Vec<(f64, f64)> = (0..8)
            .map(|i| {
                let s = 0.5 + i as f64;
                (s, 0.5 * (-2.0 * s).exp())
            })
            .collect();
        let fit = fit_coded_ber(&samples).unwrap();
        assert!((fit.model.alpha - 0.5).abs() < 1e-9);
        assert!((fit.model.beta + 2.0).abs() < 1e-9);
        assert!(fit.max_rel_err < 1e-9 && !fit.clamped);
    }

    #[test]
    fn fit_two_points_interpolates() {
        let fit = fit_coded_ber(&[(1.0, 0.1), (3.0, 0.001)]).unwrap();
        assert!((fit.model.ber(1.0) - 0.1).abs() < 1e-14);
        assert!((fit.model.ber(3.0) - 0.001).abs() < 1e-16);
    }

    #[test]
    fn fit_errors_and_clamp() {
        assert!(matches!(
            fit_coded_ber(&[(1.0, 0.0), (2.0, 0.0)]),
            Err(Error::AllZeroBer)
        ));
        assert!(matches!(fit_coded_ber(&[(1.0, 0.1)]), Err(Error::InsufficientData(1))));
        assert!(matches!(
            fit_coded_ber(&[(1.0, 0.1), (2.0, 0.0)]),
            Err(Error::InsufficientData(1))
        ));
        let fit = fit_coded_ber(&[(1.0, 0.01), (2.0, 0.02)]).unwrap();
        assert!(fit.clamped);
        assert_eq!(fit.model.beta, 0.0);
    }

    #[test]
    fn csv_and_record_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("s.csv");
        let samples = vec![(2.0, 0.1), (4.0, 0.01), (6.0, 0.0011)];
        write_ber_csv(std::fs::File::create(&p).unwrap(), &samples).unwrap();
        assert_eq!(read_ber_csv(&p).unwrap(), samples);
        let fit = fit_coded_ber(&samples).unwrap();
        let q = dir.path().join("m.txt");
        write_fit_record(std::fs::File::create(&q).unwrap(), &fit).unwrap();
        let (m, e) = read_fit_record(&q).unwrap();
        assert_eq!(m, fit.model);
        assert_eq!(e, fit.max_rel_err);
    }

    fn frame_of(samples: Vec<u16>) -> BitPlaneFrame {
        let n = samples.len();
        let layout = RepLayout {
            block_w: 1,
            block_h: 1,
            orig_width: n,
            orig_height: 1,
            width: n,
            height: 1,
            channels: 1,
            bit_depth: 8,
        };
        split_bitplanes(&CompressedRep::new(layout, samples).unwrap())
    }

    #[test]
    fn imse_examples() {
        let base: Vec<u16> = (0..100).map(|i| (i * 2) as u16).collect();
        let f = frame_of(base.clone());
        assert_eq!(imse(&f, &f).unwrap(), 0.0);
        let mut flipped = base.clone();
        flipped[17] ^= 1 << 2; // plane k = 3
        assert!((imse(&frame_of(flipped), &f).unwrap() - 0.16).abs() < 1e-15);
        assert!(matches!(
            imse(&frame_of(base[..50].to_vec()), &f),
            Err(Error::ShapeMismatch(_))
        ));
    }

    #[test]
    fn predicted_imse_examples() {
        let w = crate::source_codec::importance_weights(8);
        assert_eq!(imse_predicted(&[0.0; 8], &w), 0.0);
        assert_eq!(imse_predicted(&[1.0; 8], &w), 21845.0);
        assert!((normalized_imse_db(21845.0, &w)).abs() < 1e-12);
    }

    #[test]
    fn empirical_imse_matches_expectation() {
        let s = 100_000;
        let bers = [0.3, 0.2, 0.1, 0.05, 0.02, 0.01, 0.005, 0.001];
        let f = frame_of(vec![0; s]);
        let mut rng = seeded(2024);
        let planes: Vec<Vec<u8>> = bers
            .iter()
            .map(|&p| (0..s).map(|_| rng.random_bool(p) as u8).collect())
            .collect();
        let hat = BitPlaneFrame::new(*f.layout(), planes).unwrap();
        let w = f.weights();
        let expected = imse_predicted(&bers, &w);
        let sd = (bers.iter().zip(&w).map(|(p, g)| g * g * p * (1.0 - p)).sum::<f64>() / s as f64).sqrt();
        let got = imse(&hat, &f).unwrap();
        assert!((got - expected).abs() <= 3.0 * sd, "{got} vs {expected} ± {sd}");
    }

    fn mid_rep(n: usize) -> CompressedRep {
        let img = Image::from_fn(n, 1, 1, |x, _, _| 100 + (x % 50) as u16).unwrap();
        block_mean_encode(&img, 1, 1, PadMode::Reject).unwrap()
    }

    #[test]
    fn zero_variance_is_identity() {
        let rep = mid_rep(1000);
        for spec in [
            ResidualErrorSpec::WeakGaussian { variance: 0.0 },
            ResidualErrorSpec::StrongBurst {
                variance: 0.0,
                burst_len: 10,
                budget: 100,
            },
        ] {
            assert_eq!(inject_residual_error(&rep, &spec, 1).unwrap(), rep);
        }
    }

    #[test]
    fn weak_gaussian_variance() {
        let rep = mid_rep(1_000_000);
        let out = inject_residual_error(&rep, &ResidualErrorSpec::WeakGaussian { variance: 4.0 }, 8).unwrap();
        let d: Vec<f64> = out
            .samples()
            .iter()
            .zip(rep.samples())
            .map(|(a, b)| *a as f64 - *b as f64)
            .collect();
        let mean = d.iter().sum::<f64>() / d.len() as f64;
        let var = d.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / d.len() as f64;
        // rounding to integers adds ~1/12
        assert!((var - 4.0).abs() <= 0.02 * 4.0 + 1.0 / 12.0, "{var}");
        assert!((var - (4.0 + 1.0 / 12.0)).abs() <= 0.02 * 4.0, "{var}");
    }

    #[test]
    fn burst_budget_equal_to_length_is_one_run() {
        let rep = mid_rep(500);
        for seed in 0..20 {
            let spec = ResidualErrorSpec::StrongBurst {
                variance: 1e6,
                burst_len: 37,
                budget: 37,
            };
            let out = inject_residual_error(&rep, &spec, seed).unwrap();
            let changed: Vec<usize> = (0..500).filter(|&i| out.samples()[i] != rep.samples()[i]).collect();
            // huge variance: essentially every corrupted sample moves
            let (first, last) = (changed[0], *changed.last().unwrap());
            assert!(last - first < 37, "seed {seed}: spread {}", last - first);
            assert!(changed.len() >= 30);
        }
        let runs = burst_runs(500, 37, 37, &mut seeded(3));
        assert_eq!(runs.len(), 1);
        assert_eq!(runs[0].1, 37);
    }

    #[test]
    fn burst_runs_are_disjoint_and_exact() {
        let mut rng = seeded(4);
        for _ in 0..200 {
            let n = rng.random_range(1..300);
            let len = rng.random_range(1..=n);
            let budget = rng.random_range(0..=n);
            let runs = burst_runs(n, len, budget, &mut rng);
            let mut hit = vec![false; n];
            for (s, l) in runs {
                assert!(l <= len);
                for h in &mut hit[s..s + l] {
                    assert!(!*h);
                    *h = true;
                }
            }
            assert_eq!(hit.iter().filter(|h| **h).count(), budget);
        }
    }

    #[test]
    fn burst_errors() {
        let rep = mid_rep(10);
        let spec = ResidualErrorSpec::StrongBurst {
            variance: 1.0,
            burst_len: 11,
            budget: 5,
        };
        assert!(matches!(
            inject_residual_error(&rep, &spec, 0),
            Err(Error::BurstTooLong { .. })
        ));
    }

    #[test]
    fn weak_and_burst_match_at_equal_total_variance() {
        let n = 400_000;
        let rep = mid_rep(n);
        let msd = |out: &CompressedRep| {
            out.samples()
                .iter()
                .zip(rep.samples())
                .map(|(a, b)| (*a as f64 - *b as f64).powi(2))
                .sum::<f64>()
                / n as f64
        };
        let weak = inject_residual_error(&rep, &ResidualErrorSpec::WeakGaussian { variance: 16.0 }, 1).unwrap();
        let burst = inject_residual_error(
            &rep,
            &ResidualErrorSpec::StrongBurst {
                variance: 64.0,
                burst_len: 64,
                budget: n / 4,
            },
            2,
        )
        .unwrap();
        let (a, b) = (msd(&weak), msd(&burst));
        assert!((a - b).abs() / a < 0.05, "{a} vs {b}");
    }
}
