//! One end-to-end trial: encode, frame, allocate, code, modulate, transmit,
//! decode, merge, reconstruct, score.

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::coverage::{Block, CellEvaluator, CellSample};
use crate::error::{Error, Result};
use crate::image::Image;
use crate::link_models::{imse, CodedBerModel};
use crate::phy::rng::{seeded, stream_seed};
use crate::phy::{bits::hamming_distance, run_link, CodecSpec, Modulation};
use crate::power_alloc::{allocate, AllocationProblem, AllocationResult, Allocator, BerMode};
use crate::qoe::{qoe_evaluate, EmbeddingProvider, PristineModel, QoEScore, QoEThresholds};
use crate::reconstruction::{reconstruct, Reconstructor};
use crate::source_codec::{block_mean_encode, merge_planes, split_bitplanes, PadMode};

/// Fitted exponential BER of Hamming(7,4) with QPSK against per-symbol snr
/// over `[2, 8]` (4e6 bits per point).
pub const HAMMING74_QPSK: CodedBerModel = CodedBerModel {
    alpha: 0.4288,
    beta: -1.1415,
};

/// Physical-layer setup shared by every trial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkSetup {
    #[serde(default)]
    pub codec: CodecSpec,
    #[serde(default = "qpsk")]
    pub modulation: usize,
    /// Complex noise variance, linear.
    #[serde(default = "unit")]
    pub noise_var: f64,
    /// Per-plane `|h_k|^2`, linear; unit gains when absent.
    #[serde(default)]
    pub gains: Option<Vec<f64>>,
    #[serde(default = "default_allocator")]
    pub allocator: Allocator,
    /// Coded BER model used for allocation; required for coded links other
    /// than Hamming(7,4) with QPSK.
    #[serde(default)]
    pub ber_model: Option<CodedBerModel>,
}

fn qpsk() -> usize {
    4
}

fn unit() -> f64 {
    1.0
}

fn default_allocator() -> Allocator {
    Allocator::Wf
}

impl Default for LinkSetup {
    fn default() -> Self {
        Self {
            codec: CodecSpec::Uncoded,
            modulation: 4,
            noise_var: 1.0,
            gains: None,
            allocator: Allocator::Wf,
            ber_model: None,
        }
    }
}

impl LinkSetup {
    pub fn modulation(&self) -> Result<Modulation> {
        Modulation::new(self.modulation)
    }

    /// BER model the allocator optimizes against.
    pub fn ber_mode(&self) -> Result<BerMode> {
        match (&self.codec, self.ber_model) {
            (CodecSpec::Uncoded, _) => Ok(BerMode::Uncoded { order: self.modulation }),
            (_, Some(m)) => Ok(BerMode::Coded {
                alpha: m.alpha,
                beta: m.beta,
            }),
            (CodecSpec::Hamming74, None) if self.modulation == 4 => Ok(BerMode::Coded {
                alpha: HAMMING74_QPSK.alpha,
                beta: HAMMING74_QPSK.beta,
            }),
            (c, None) => Err(Error::config(
                "link.ber_model",
                format!(
                    "no built-in BER model for {} with {}-QAM; fit one with fit-ber",
                    c.label(),
                    self.modulation
                ),
            )),
        }
    }

    pub fn gains(&self, k: usize) -> Result<Vec<f64>> {
        match &self.gains {
            None => Ok(vec![1.0; k]),
            Some(g) if g.len() == k => Ok(g.clone()),
            Some(g) => Err(Error::LengthMismatch {
                expected: k,
                actual: g.len(),
            }),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.codec.validate()?;
        self.modulation()?;
        if !(self.noise_var > 0.0) {
            return Err(Error::config("link.noise_var", "must be positive"));
        }
        if let Some(g) = &self.gains {
            if g.iter().any(|v| !(*v > 0.0)) {
                return Err(Error::config("link.gains", "gains must be positive"));
            }
        }
        self.ber_mode().map(|_| ())
    }

    /// Total power for an average per-stream snr `P / (K sigma^2)` in dB.
    pub fn power_for_snr_db(&self, snr_db: f64, k: usize) -> f64 {
        k as f64 * self.noise_var * 10f64.powf(snr_db / 10.0)
    }

    pub fn allocation_problem(&self, k: usize, total_power: f64) -> Result<AllocationProblem> {
        Ok(AllocationProblem {
            gains: self.gains(k)?,
            noise_var: self.noise_var,
            weights: (0..k as i32).map(|i| 4f64.powi(i)).collect(),
            total_power,
            mode: self.ber_mode()?,
        })
    }
}

/// Receiver-side scoring setup.
pub struct Scoring<'a> {
    pub reconstructor: &'a Reconstructor,
    pub model: &'a PristineModel,
    pub provider: &'a dyn EmbeddingProvider,
    pub thresholds: QoEThresholds,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialRecord {
    pub trial: usize,
    pub seed: u64,
    pub block: Block,
    pub total_power: f64,
    /// Received snr of each plane, dB (`-inf` for unpowered planes).
    pub snr_db: Vec<f64>,
    pub ber: Vec<f64>,
    /// Measured IMSE, `sum_k gamma_k d_H / S`.
    pub imse: f64,
    pub imse_pred: f64,
    pub weight_sum: f64,
    pub qoe: QoEScore,
    pub pass: bool,
}

#[derive(Debug, Clone)]
pub struct TrialOutcome {
    pub record: TrialRecord,
    pub allocation: AllocationResult,
    pub reconstructed: Image,
}

/// Runs one trial with total transmit power `total_power`.
pub fn run_trial(
    img: &Image,
    block: Block,
    total_power: f64,
    trial: usize,
    seed: u64,
    link: &LinkSetup,
    scoring: &Scoring<'_>,
) -> Result<TrialOutcome> {
    let modulation = link.modulation()?;
    let rep = block_mean_encode(img, block.b1, block.b2, PadMode::Replicate)?;
    let frame = split_bitplanes(&rep);
    let k = frame.depth();
    let problem = link.allocation_problem(k, total_power)?;
    let allocation = allocate(&problem, link.allocator)?;
    let mut planes = Vec::with_capacity(k);
    let mut ber = Vec::with_capacity(k);
    let mut snr_db = Vec::with_capacity(k);
    for (i, plane) in frame.planes().iter().enumerate() {
        let p = allocation.powers[i];
        let stream = stream_seed(seed, trial as u64, 1 + i as u64);
        let decoded = if p > 0.0 {
            let gain = Complex64::new(problem.gains[i].sqrt(), 0.0);
            run_link(plane, &link.codec, &modulation, gain, p, link.noise_var, stream)?.decoded
        } else {
            // unpowered plane: the receiver guesses
            let mut rng = seeded(stream);
            (0..plane.len()).map(|_| rng.random::<bool>() as u8).collect()
        };
        ber.push(hamming_distance(&decoded, plane) as f64 / plane.len().max(1) as f64);
        snr_db.push(10.0 * problem.snr(i, p).log10());
        planes.push(decoded);
    }
    let rep_hat = merge_planes(*rep.layout(), planes)?;
    let frame_hat = split_bitplanes(&rep_hat);
    let measured = imse(&frame_hat, &frame)?;
    let reconstructed = reconstruct(&rep_hat, scoring.reconstructor)?;
    let qoe = qoe_evaluate(img, &reconstructed, scoring.model, scoring.provider)?;
    let record = TrialRecord {
        trial,
        seed,
        block,
        total_power,
        snr_db,
        ber,
        imse: measured,
        imse_pred: allocation.imse,
        weight_sum: problem.weights.iter().sum(),
        pass: qoe.meets(&scoring.thresholds),
        qoe,
    };
    Ok(TrialOutcome {
        record,
        allocation,
        reconstructed,
    })
}

/// Coverage evaluator running the full chain; trial `t` uses image
/// `t mod n`.
pub struct ChainEvaluator<'a> {
    pub images: &'a [Image],
    pub link: &'a LinkSetup,
    pub scoring: Scoring<'a>,
}

impl CellEvaluator for ChainEvaluator<'_> {
    fn evaluate(&self, snr_db: f64, block: Block, trial: usize, seed: u64) -> Result<CellSample> {
        let img = &self.images[trial % self.images.len()];
        let k = img.bit_depth() as usize;
        let power = self.link.power_for_snr_db(snr_db, k);
        let out = run_trial(img, block, power, trial, seed, self.link, &self.scoring)?;
        let r = &out.record;
        Ok(CellSample {
            d_niqe: r.qoe.d_niqe,
            d_clip: r.qoe.d_clip,
            imse_pred: r.imse_pred / r.weight_sum,
            imse: r.imse / r.weight_sum,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qoe::{niqe::default_pristine_model, BuiltinHistogram};
    use crate::reconstruction::Interpolation;
    use crate::synth::dead_leaves_corpus;

    fn scoring<'a>(rec: &'a Reconstructor) -> Scoring<'a> {
        Scoring {
            reconstructor: rec,
            model: default_pristine_model(),
            provider: &BuiltinHistogram,
            thresholds: QoEThresholds::default(),
        }
    }

    #[test]
    fn noiseless_identity_chain_is_lossless() {
        let img = &dead_leaves_corpus(1, 96, 96, 5).unwrap()[0];
        let rec = Reconstructor::Builtin(Interpolation::Bilinear);
        let link = LinkSetup {
            noise_var: 1e-12,
            ..Default::default()
        };
        let out = run_trial(img, Block::square(1), 8.0, 0, 1, &link, &scoring(&rec)).unwrap();
        assert!(out.record.ber.iter().all(|&b| b == 0.0));
        assert_eq!(out.record.imse, 0.0);
        assert_eq!(&out.reconstructed, img);
        assert_eq!(out.record.qoe.d_clip, 0.0);
    }

    #[test]
    fn deterministic_per_seed() {
        let img = &dead_leaves_corpus(1, 96, 96, 6).unwrap()[0];
        let rec = Reconstructor::Builtin(Interpolation::Bilinear);
        let link = LinkSetup::default();
        let a = run_trial(img, Block::square(2), 40.0, 3, 9, &link, &scoring(&rec)).unwrap();
        let b = run_trial(img, Block::square(2), 40.0, 3, 9, &link, &scoring(&rec)).unwrap();
        assert_eq!(a.record, b.record);
        let c = run_trial(img, Block::square(2), 40.0, 3, 10, &link, &scoring(&rec)).unwrap();
        assert_ne!(a.record.ber, c.record.ber);
    }

    #[test]
    fn coded_links_need_a_model() {
        let mut link = LinkSetup {
            codec: CodecSpec::Repetition { n: 3 },
            ..Default::default()
        };
        assert!(link.validate().is_err());
        link.ber_model = Some(CodedBerModel { alpha: 0.5, beta: -1.0 });
        assert!(link.validate().is_ok());
        link.codec = CodecSpec::Hamming74;
        link.ber_model = None;
        assert!(matches!(link.ber_mode().unwrap(), BerMode::Coded { .. }));
    }

    #[test]
    fn power_from_average_snr() {
        let link = LinkSetup {
            noise_var: 2.0,
            ..Default::default()
        };
        assert!((link.power_for_snr_db(10.0, 8) - 160.0).abs() < 1e-9);
    }
}
