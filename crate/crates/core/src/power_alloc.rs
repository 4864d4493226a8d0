//! Importance-aware power allocation over `K` bit-plane sub-streams.
//!
//! Minimizes the predicted IMSE `sum_k gamma_k ber_k(p_k)` subject to
//! `sum_k p_k <= P`. Both waterfilling variants share the form
//! `p_k = W_k (H_level - H_k)^+` with the water level found by bisection:
//!
//! * coded (`ber = alpha exp(beta snr)`): exact KKT solution with
//!   `W_k = -sigma^2 / (beta |h_k|^2)`, `H_k = ln(sigma^2 / (gamma_k |h_k|^2))`;
//! * uncoded (`ber = alpha Q(beta sqrt snr)`): the stationarity condition is
//!   transcendental, so `sqrt(snr_k)` on its right-hand side is frozen at the
//!   importance-proportional guess `p~_k = gamma_k P / sum gamma`, giving
//!   `W_k = 2 sigma^2 / (beta^2 |h_k|^2)` and
//!   `H_k = ln(sigma^2 sqrt(snr~_k) / (gamma_k |h_k|^2))`. This is a cheap
//!   sub-optimal allocation, not the exact optimum.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::link_models::{CodedBerModel, UncodedBerModel};

pub const DEFAULT_TOLERANCE: f64 = 1e-6;
pub const MAX_ITERATIONS: usize = 200;
/// Upper bound on simplex points visited by [`oracle_grid_search`].
pub const GRID_POINT_LIMIT: u64 = 50_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BerMode {
    Uncoded { order: usize },
    Coded { alpha: f64, beta: f64 },
}

impl BerMode {
    pub fn ber(&self, snr: f64) -> f64 {
        match *self {
            BerMode::Uncoded { order } => UncodedBerModel::new(order).ber_unchecked(snr),
            BerMode::Coded { alpha, beta } => CodedBerModel { alpha, beta }.ber(snr),
        }
    }

    pub fn derivative(&self, snr: f64) -> f64 {
        match *self {
            BerMode::Uncoded { order } => UncodedBerModel::new(order).derivative(snr),
            BerMode::Coded { alpha, beta } => CodedBerModel { alpha, beta }.derivative(snr),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AllocationProblem {
    /// Channel power gains `|h_k|^2`, linear.
    pub gains: Vec<f64>,
    /// Complex noise variance, linear.
    pub noise_var: f64,
    pub weights: Vec<f64>,
    /// Total power budget, linear.
    pub total_power: f64,
    pub mode: BerMode,
}

impl AllocationProblem {
    /// `K` streams with unit gains and weights `4^(k-1)`.
    pub fn bit_planes(k: usize, noise_var: f64, total_power: f64, mode: BerMode) -> Self {
        Self {
            gains: vec![1.0; k],
            noise_var,
            weights: (0..k as i32).map(|i| 4f64.powi(i)).collect(),
            total_power,
            mode,
        }
    }

    pub fn k(&self) -> usize {
        self.gains.len()
    }

    pub fn validate(&self) -> Result<()> {
        let k = self.gains.len();
        if k == 0 {
            return Err(Error::InvalidParameter("at least one stream required".into()));
        }
        if self.weights.len() != k {
            return Err(Error::LengthMismatch {
                expected: k,
                actual: self.weights.len(),
            });
        }
        if !(self.total_power > 0.0) || !self.total_power.is_finite() {
            return Err(Error::InvalidParameter("total power must be positive".into()));
        }
        if !(self.noise_var > 0.0) {
            return Err(Error::InvalidParameter("noise variance must be positive".into()));
        }
        if self.gains.iter().any(|g| !(*g > 0.0) || !g.is_finite()) {
            return Err(Error::InvalidParameter("channel gains must be positive".into()));
        }
        if self.weights.iter().any(|g| !(*g > 0.0) || !g.is_finite()) {
            return Err(Error::InvalidParameter("importance weights must be positive".into()));
        }
        match self.mode {
            BerMode::Coded { alpha, beta } if !(beta < 0.0) || !(alpha >= 0.0) => Err(Error::InvalidParameter(
                format!("coded mode needs alpha >= 0, beta < 0, got ({alpha}, {beta})"),
            )),
            BerMode::Uncoded { order } if crate::phy::Modulation::new(order).is_err() => Err(Error::InvalidParameter(
                format!("unsupported constellation order {order}"),
            )),
            _ => Ok(()),
        }
    }

    pub fn snr(&self, k: usize, power: f64) -> f64 {
        power * self.gains[k] / self.noise_var
    }

    pub fn predicted_bers(&self, powers: &[f64]) -> Vec<f64> {
        powers
            .iter()
            .enumerate()
            .map(|(k, &p)| self.mode.ber(self.snr(k, p)))
            .collect()
    }

    /// Objective `sum_k gamma_k ber_k(p_k)` with the exact BER model.
    pub fn predicted_imse(&self, powers: &[f64]) -> f64 {
        self.predicted_bers(powers)
            .iter()
            .zip(&self.weights)
            .map(|(b, g)| b * g)
            .sum()
    }

    /// `gamma_k d ber_k / d p_k`; equal across active streams at a KKT point.
    pub fn marginal_costs(&self, powers: &[f64]) -> Vec<f64> {
        powers
            .iter()
            .enumerate()
            .map(|(k, &p)| self.weights[k] * self.mode.derivative(self.snr(k, p)) * self.gains[k] / self.noise_var)
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Allocator {
    /// Equal power.
    Ep,
    /// Importance-aware waterfilling for the problem's mode.
    Wf,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AllocationResult {
    pub powers: Vec<f64>,
    /// `None` for allocators that have no water level.
    pub water_level: Option<f64>,
    pub widths: Vec<f64>,
    pub heights: Vec<f64>,
    pub bers: Vec<f64>,
    pub imse: f64,
    pub iterations: usize,
}

impl AllocationResult {
    fn from_powers(problem: &AllocationProblem, powers: Vec<f64>) -> Self {
        let bers = problem.predicted_bers(&powers);
        let imse = bers.iter().zip(&problem.weights).map(|(b, g)| b * g).sum();
        Self {
            powers,
            water_level: None,
            widths: Vec::new(),
            heights: Vec::new(),
            bers,
            imse,
            iterations: 0,
        }
    }

    pub fn total_power(&self) -> f64 {
        self.powers.iter().sum()
    }

    /// `k,gamma,gain,power,ber_pred` rows followed by a `#` summary line.
    pub fn write_csv(&self, problem: &AllocationProblem, mut w: impl Write) -> Result<()> {
        writeln!(w, "k,gamma,gain,power,ber_pred")?;
        for k in 0..self.powers.len() {
            writeln!(
                w,
                "{},{},{},{},{}",
                k + 1,
                problem.weights[k],
                problem.gains[k],
                self.powers[k],
                self.bers[k]
            )?;
        }
        match self.water_level {
            Some(h) => writeln!(w, "# water_level={h},imse={},iterations={}", self.imse, self.iterations)?,
            None => writeln!(w, "# water_level=none,imse={}", self.imse)?,
        }
        Ok(())
    }
}

pub fn allocate(problem: &AllocationProblem, allocator: Allocator) -> Result<AllocationResult> {
    match (allocator, problem.mode) {
        (Allocator::Ep, _) => allocate_equal(problem),
        (Allocator::Wf, BerMode::Uncoded { .. }) => allocate_wf_uncoded(problem, DEFAULT_TOLERANCE),
        (Allocator::Wf, BerMode::Coded { .. }) => allocate_wf_coded(problem, DEFAULT_TOLERANCE),
    }
}

/// `p_k = P / K`.
pub fn allocate_equal(problem: &AllocationProblem) -> Result<AllocationResult> {
    problem.validate()?;
    let k = problem.k();
    Ok(AllocationResult::from_powers(
        problem,
        vec![problem.total_power / k as f64; k],
    ))
}

/// Relaxed waterfilling for uncoded M-QAM.
pub fn allocate_wf_uncoded(problem: &AllocationProblem, tolerance: f64) -> Result<AllocationResult> {
    problem.validate()?;
    let BerMode::Uncoded { order } = problem.mode else {
        return Err(Error::InvalidMode(
            "uncoded waterfilling needs an uncoded problem".into(),
        ));
    };
    let model = UncodedBerModel::new(order);
    let sigma2 = problem.noise_var;
    let gamma_sum: f64 = problem.weights.iter().sum();
    let (widths, heights): (Vec<f64>, Vec<f64>) = problem
        .gains
        .iter()
        .zip(&problem.weights)
        .map(|(&g2, &gamma)| {
            let p_guess = gamma * problem.total_power / gamma_sum;
            let snr_guess = p_guess * g2 / sigma2;
            let width = 2.0 * sigma2 / (model.beta * model.beta * g2);
            let height = (sigma2 * snr_guess.sqrt() / (gamma * g2)).ln();
            (width, height)
        })
        .unzip();
    waterfill(problem, widths, heights, tolerance)
}

/// Exact waterfilling for the exponential coded-BER model.
pub fn allocate_wf_coded(problem: &AllocationProblem, tolerance: f64) -> Result<AllocationResult> {
    problem.validate()?;
    let BerMode::Coded { beta, .. } = problem.mode else {
        return Err(Error::InvalidMode("coded waterfilling needs a coded problem".into()));
    };
    let sigma2 = problem.noise_var;
    let (widths, heights): (Vec<f64>, Vec<f64>) = problem
        .gains
        .iter()
        .zip(&problem.weights)
        .map(|(&g2, &gamma)| (-sigma2 / (beta * g2), (sigma2 / (gamma * g2)).ln()))
        .unzip();
    waterfill(problem, widths, heights, tolerance)
}

/// `f(H) = sum_k W_k (H - H_k)^+`, nondecreasing in `H`.
pub fn water_volume(widths: &[f64], heights: &[f64], level: f64) -> f64 {
    widths.iter().zip(heights).map(|(w, h)| w * (level - h).max(0.0)).sum()
}

fn waterfill(
    problem: &AllocationProblem,
    widths: Vec<f64>,
    heights: Vec<f64>,
    tolerance: f64,
) -> Result<AllocationResult> {
    let p = problem.total_power;
    let k = widths.len() as f64;
    let min_w = widths.iter().copied().fold(f64::INFINITY, f64::min);
    let min_h = heights.iter().copied().fold(f64::INFINITY, f64::min);
    let max_h = heights.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut lo = min_h;
    let mut hi = p / (k * min_w) + max_h;
    if !lo.is_finite() || !hi.is_finite() {
        return Err(Error::NonConvergence {
            iterations: 0,
            reason: "non-finite water-level bracket".into(),
        });
    }
    if water_volume(&widths, &heights, hi) < p * (1.0 - tolerance) {
        return Err(Error::NonConvergence {
            iterations: 0,
            reason: "upper water level does not exhaust the power budget".into(),
        });
    }
    let target = tolerance * p;
    for it in 1..=MAX_ITERATIONS {
        let level = 0.5 * (lo + hi);
        let used = water_volume(&widths, &heights, level);
        if (used - p).abs() <= target {
            let powers: Vec<f64> = widths
                .iter()
                .zip(&heights)
                .map(|(w, h)| w * (level - h).max(0.0))
                .collect();
            let mut result = AllocationResult::from_powers(problem, powers);
            result.water_level = Some(level);
            result.widths = widths;
            result.heights = heights;
            result.iterations = it;
            return Ok(result);
        }
        if used <= p {
            lo = level;
        } else {
            hi = level;
        }
    }
    Err(Error::NonConvergence {
        iterations: MAX_ITERATIONS,
        reason: format!("power mismatch above tolerance {tolerance}"),
    })
}

/// Exhaustive minimization of the exact predicted IMSE over the simplex
/// `{p : sum p_k = P, p_k in step * N}`. A test oracle; `K <= 4`.
pub fn oracle_grid_search(problem: &AllocationProblem, step: f64) -> Result<AllocationResult> {
    problem.validate()?;
    let k = problem.k();
    if k > 4 {
        return Err(Error::TooLarge(format!("K = {k} exceeds 4")));
    }
    if !(step > 0.0) {
        return Err(Error::InvalidParameter("grid step must be positive".into()));
    }
    let n = (problem.total_power / step).round().max(1.0) as u64;
    // number of compositions of n into k parts: C(n + k - 1, k - 1)
    let points = (1..k as u64).fold(1u64, |acc, i| acc.saturating_mul(n + i) / i);
    if points > GRID_POINT_LIMIT {
        return Err(Error::TooLarge(format!("{points} grid points")));
    }
    let unit = problem.total_power / n as f64;
    // per-stream cost tables: cost[k][i] = gamma_k ber_k(i * unit)
    let cost: Vec<Vec<f64>> = (0..k)
        .map(|s| {
            (0..=n)
                .map(|i| problem.weights[s] * problem.mode.ber(problem.snr(s, i as f64 * unit)))
                .collect()
        })
        .collect();
    let mut best = (f64::INFINITY, vec![0u64; k]);
    let mut current = vec![0u64; k];
    search(&cost, 0, n, 0.0, &mut current, &mut best);
    let powers = best.1.iter().map(|&i| i as f64 * unit).collect();
    Ok(AllocationResult::from_powers(problem, powers))
}

fn search(cost: &[Vec<f64>], idx: usize, left: u64, acc: f64, cur: &mut [u64], best: &mut (f64, Vec<u64>)) {
    if idx + 1 == cost.len() {
        cur[idx] = left;
        let total = acc + cost[idx][left as usize];
        if total < best.0 {
            best.0 = total;
            best.1.copy_from_slice(cur);
        }
        return;
    }
    for i in 0..=left {
        cur[idx] = i;
        search(cost, idx + 1, left - i, acc + cost[idx][i as usize], cur, best);
    }
}

/// Allocation problem as written in a TOML table. Gains may be in dB.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AllocationConfig {
    pub gains: Vec<f64>,
    #[serde(default)]
    pub gains_in_db: bool,
    /// Defaults to `4^(k-1)`.
    #[serde(default)]
    pub weights: Option<Vec<f64>>,
    #[serde(default = "one")]
    pub noise_var: f64,
    pub total_power: f64,
    #[serde(default)]
    pub power_in_db: bool,
    pub mode: BerMode,
}

fn one() -> f64 {
    1.0
}

impl AllocationConfig {
    pub fn to_problem(&self) -> Result<AllocationProblem> {
        let gains: Vec<f64> = if self.gains_in_db {
            self.gains.iter().map(|&g| crate::phy::db_to_linear(g)).collect()
        } else {
            self.gains.clone()
        };
        let k = gains.len();
        let weights = self
            .weights
            .clone()
            .unwrap_or_else(|| (0..k as i32).map(|i| 4f64.powi(i)).collect());
        let total_power = if self.power_in_db {
            crate::phy::db_to_linear(self.total_power)
        } else {
            self.total_power
        };
        let problem = AllocationProblem {
            gains,
            noise_var: self.noise_var,
            weights,
            total_power,
            mode: self.mode,
        };
        problem.validate()?;
        Ok(problem)
    }
}
