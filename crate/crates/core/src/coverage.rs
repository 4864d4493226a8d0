//! Perceived coverage over an `(snr, rate)` grid: the set of cells whose
//! mean QoE meets the requirement, its rate-SNR frontier, limit points and
//! the power/bandwidth decomposition of coverage gain.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::phy::rng::stream_seed;
use crate::qoe::QoEThresholds;

/// Square-or-rectangular block factors; rate `1 / (b1 b2)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Block {
    pub b1: usize,
    pub b2: usize,
}

impl Block {
    pub fn square(b: usize) -> Self {
        Self { b1: b, b2: b }
    }

    pub fn rate(&self) -> f64 {
        1.0 / (self.b1 * self.b2) as f64
    }
}

/// Per-trial outcome of one grid cell.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct CellSample {
    pub d_niqe: f64,
    pub d_clip: f64,
    /// Predicted IMSE normalized by the total importance weight.
    pub imse_pred: f64,
    /// Measured IMSE, same normalization.
    pub imse: f64,
}

/// Runs one trial at `(snr_db, block)` with the given seed.
pub trait CellEvaluator: Sync {
    fn evaluate(&self, snr_db: f64, block: Block, trial: usize, seed: u64) -> Result<CellSample>;
}

impl<F> CellEvaluator for F
where
    F: Fn(f64, Block, usize, u64) -> Result<CellSample> + Sync,
{
    fn evaluate(&self, snr_db: f64, block: Block, trial: usize, seed: u64) -> Result<CellSample> {
        self(snr_db, block, trial, seed)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PassCriterion {
    /// Both mean QoE components within thresholds.
    Qoe(QoEThresholds),
    /// Mean normalized predicted IMSE at or below `max_db`.
    PredictedImse { max_db: f64 },
}

impl Default for PassCriterion {
    fn default() -> Self {
        Self::Qoe(QoEThresholds::default())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoverageGrid {
    pub snr_db: Vec<f64>,
    pub blocks: Vec<Block>,
}

impl CoverageGrid {
    pub fn new(mut snr_db: Vec<f64>, mut blocks: Vec<Block>) -> Result<Self> {
        if snr_db.is_empty() || blocks.is_empty() {
            return Err(Error::InvalidParameter("coverage grids must be nonempty".into()));
        }
        if snr_db.iter().any(|s| !s.is_finite()) || blocks.iter().any(|b| b.b1 == 0 || b.b2 == 0) {
            return Err(Error::InvalidParameter("invalid grid entry".into()));
        }
        snr_db.sort_by(f64::total_cmp);
        snr_db.dedup();
        // ascending rate
        blocks.sort_by(|a, b| a.rate().total_cmp(&b.rate()).then(a.cmp(b)));
        blocks.dedup();
        Ok(Self { snr_db, blocks })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoverageCell {
    pub snr_db: f64,
    pub block: Block,
    pub d_niqe_mean: f64,
    pub d_clip_mean: f64,
    pub imse_pred_mean: f64,
    pub imse_mean: f64,
    pub pass: bool,
    pub n_trials: usize,
    /// First trial error, if any. Such cells never pass.
    pub error: Option<String>,
}

impl CoverageCell {
    pub fn rate(&self) -> f64 {
        self.block.rate()
    }

    pub fn is_valid(&self) -> bool {
        self.error.is_none()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LimitPoints {
    /// Lowest passing snr and the smallest passing rate there.
    pub snr_min_db: f64,
    pub rate_at_snr_min: f64,
    /// Smallest passing rate anywhere and the lowest snr reaching it.
    pub rate_min: f64,
    pub snr_at_rate_min_db: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoverageMap {
    pub grid: CoverageGrid,
    pub criterion: PassCriterion,
    pub trials: usize,
    /// Row-major: snr outer, rate inner (ascending).
    pub cells: Vec<CoverageCell>,
}

/// Evaluates every cell with `trials` independent trials in parallel.
/// Trial `t` uses the same seed in every cell, so neighbouring cells see
/// common random numbers. Aggregation order is fixed.
pub fn sweep_coverage(
    grid: &CoverageGrid,
    evaluator: &dyn CellEvaluator,
    criterion: PassCriterion,
    trials: usize,
    base_seed: u64,
) -> Result<CoverageMap> {
    if trials == 0 {
        return Err(Error::InvalidParameter("trials per cell must be at least 1".into()));
    }
    let nr = grid.blocks.len();
    let jobs = grid.snr_db.len() * nr * trials;
    let samples: Vec<Result<CellSample>> = (0..jobs)
        .into_par_iter()
        .map(|j| {
            let (cell, t) = (j / trials, j % trials);
            let (snr, block) = (grid.snr_db[cell / nr], grid.blocks[cell % nr]);
            evaluator.evaluate(snr, block, t, stream_seed(base_seed, t as u64, 0))
        })
        .collect();
    let cells = samples
        .chunks(trials)
        .enumerate()
        .map(|(cell, chunk)| aggregate(grid.snr_db[cell / nr], grid.blocks[cell % nr], chunk, &criterion))
        .collect();
    Ok(CoverageMap {
        grid: grid.clone(),
        criterion,
        trials,
        cells,
    })
}

fn aggregate(snr_db: f64, block: Block, samples: &[Result<CellSample>], criterion: &PassCriterion) -> CoverageCell {
    let n = samples.len();
    let error = samples.iter().find_map(|s| s.as_ref().err().map(|e| e.to_string()));
    let mean = |f: fn(&CellSample) -> f64| -> f64 {
        if error.is_some() {
            return f64::NAN;
        }
        samples
            .iter()
            .map(|s| f(s.as_ref().expect("checked above")))
            .sum::<f64>()
            / n as f64
    };
    let (d_niqe_mean, d_clip_mean) = (mean(|s| s.d_niqe), mean(|s| s.d_clip));
    let (imse_pred_mean, imse_mean) = (mean(|s| s.imse_pred), mean(|s| s.imse));
    let pass = error.is_none()
        && match criterion {
            PassCriterion::Qoe(th) => d_niqe_mean <= th.niqe && d_clip_mean <= th.clip,
            PassCriterion::PredictedImse { max_db } => 10.0 * imse_pred_mean.log10() <= *max_db,
        };
    CoverageCell {
        snr_db,
        block,
        d_niqe_mean,
        d_clip_mean,
        imse_pred_mean,
        imse_mean,
        pass,
        n_trials: n,
        error,
    }
}

impl CoverageMap {
    pub fn cell(&self, snr_idx: usize, rate_idx: usize) -> &CoverageCell {
        &self.cells[snr_idx * self.grid.blocks.len() + rate_idx]
    }

    fn column(&self, snr_idx: usize) -> &[CoverageCell] {
        let nr = self.grid.blocks.len();
        &self.cells[snr_idx * nr..(snr_idx + 1) * nr]
    }

    /// Smallest passing rate in each snr column.
    pub fn frontier(&self) -> Vec<Option<f64>> {
        (0..self.grid.snr_db.len())
            .map(|i| self.column(i).iter().find(|c| c.pass).map(|c| c.rate()))
            .collect()
    }

    pub fn limit_points(&self) -> Option<LimitPoints> {
        let frontier = self.frontier();
        let first = frontier.iter().position(Option::is_some)?;
        let rate_min = frontier.iter().flatten().copied().fold(f64::INFINITY, f64::min);
        let at_min = frontier.iter().position(|r| *r == Some(rate_min))?;
        Some(LimitPoints {
            snr_min_db: self.grid.snr_db[first],
            rate_at_snr_min: frontier[first]?,
            rate_min,
            snr_at_rate_min_db: self.grid.snr_db[at_min],
        })
    }

    /// Columns whose pass set is not closed upward in rate.
    pub fn non_monotone_columns(&self) -> Vec<f64> {
        (0..self.grid.snr_db.len())
            .filter(|&i| {
                let col = self.column(i);
                col.iter().skip_while(|c| !c.pass).any(|c| !c.pass)
            })
            .map(|i| self.grid.snr_db[i])
            .collect()
    }

    /// Whether every rate row's pass set is closed upward in snr.
    pub fn upward_closed_in_snr(&self) -> bool {
        (0..self.grid.blocks.len())
            .all(|r| (1..self.grid.snr_db.len()).all(|s| !self.cell(s - 1, r).pass || self.cell(s, r).pass))
    }

    pub fn invalid_cells(&self) -> usize {
        self.cells.iter().filter(|c| !c.is_valid()).count()
    }

    pub fn write_csv(&self, mut w: impl Write) -> Result<()> {
        writeln!(w, "snr_db,rate,d_niqe_mean,d_clip_mean,pass,n_trials")?;
        for c in &self.cells {
            writeln!(
                w,
                "{},{},{},{},{},{}",
                c.snr_db,
                c.rate(),
                c.d_niqe_mean,
                c.d_clip_mean,
                c.pass as u8,
                c.n_trials
            )?;
        }
        Ok(())
    }

    pub fn write_summary(&self, mut w: impl Write) -> Result<()> {
        writeln!(w, "criterion: {:?}", self.criterion)?;
        writeln!(
            w,
            "grid: {} snr x {} rates, {} trials per cell",
            self.grid.snr_db.len(),
            self.grid.blocks.len(),
            self.trials
        )?;
        writeln!(
            w,
            "passing cells: {}/{}",
            self.cells.iter().filter(|c| c.pass).count(),
            self.cells.len()
        )?;
        writeln!(w, "invalid cells: {}", self.invalid_cells())?;
        writeln!(w, "frontier (snr_db -> min passing rate):")?;
        for (s, r) in self.grid.snr_db.iter().zip(self.frontier()) {
            match r {
                Some(r) => writeln!(w, "  {s} -> {r}")?,
                None => writeln!(w, "  {s} -> none")?,
            }
        }
        match self.limit_points() {
            Some(lp) => {
                writeln!(w, "snr limit point: ({} dB, {})", lp.snr_min_db, lp.rate_at_snr_min)?;
                writeln!(w, "rate limit point: ({} dB, {})", lp.snr_at_rate_min_db, lp.rate_min)?;
            }
            None => writeln!(w, "limit points: none (no passing cell)")?,
        }
        let nm = self.non_monotone_columns();
        if !nm.is_empty() {
            writeln!(w, "non-monotone columns (snr_db): {nm:?}")?;
        }
        Ok(())
    }

    /// Gnuplot `matrix nonuniform` block: first row rates, first column snr.
    pub fn write_matrix(&self, mut w: impl Write, value: impl Fn(&CoverageCell) -> f64) -> Result<()> {
        let nr = self.grid.blocks.len();
        write!(w, "{nr}")?;
        for b in &self.grid.blocks {
            write!(w, " {}", b.rate())?;
        }
        writeln!(w)?;
        for (i, s) in self.grid.snr_db.iter().enumerate() {
            write!(w, "{s}")?;
            for c in self.column(i) {
                write!(w, " {}", value(c))?;
            }
            writeln!(w)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoverageGain {
    pub total_db: f64,
    pub power_db: f64,
    pub bandwidth_db: f64,
}

/// `G = G_power + G_bw` with `G_power = snr_conv - snr` (dB) and
/// `G_bw = 10 log10(r / r_conv)`.
pub fn coverage_gain(snr_db: f64, snr_conv_db: f64, r: f64, r_conv: f64) -> Result<CoverageGain> {
    if !snr_db.is_finite() || !snr_conv_db.is_finite() || !(r > 0.0) || !(r_conv > 0.0) {
        return Err(Error::NonPositiveInput);
    }
    let power_db = snr_conv_db - snr_db;
    let bandwidth_db = 10.0 * (r / r_conv).log10();
    Ok(CoverageGain {
        total_db: power_db + bandwidth_db,
        power_db,
        bandwidth_db,
    })
}

/// [`coverage_gain`] with linear snr values.
pub fn coverage_gain_linear(snr: f64, snr_conv: f64, r: f64, r_conv: f64) -> Result<CoverageGain> {
    if !(snr > 0.0) || !(snr_conv > 0.0) {
        return Err(Error::NonPositiveInput);
    }
    let power_db = 10.0 * (snr_conv / snr).log10();
    let bandwidth_db = if r > 0.0 && r_conv > 0.0 {
        10.0 * (r / r_conv).log10()
    } else {
        return Err(Error::NonPositiveInput);
    };
    Ok(CoverageGain {
        total_db: power_db + bandwidth_db,
        power_db,
        bandwidth_db,
    })
}
