//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any
//! failure. Oracles are computed here independently of the library where
//! possible (closed forms, brute-force grids, direct sample arithmetic).

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use lightcom::chain::{run_trial, ChainEvaluator, LinkSetup, Scoring};
use lightcom::coverage::{coverage_gain, sweep_coverage, Block, CellSample, CoverageGrid, CoverageMap, PassCriterion};
use lightcom::link_models::{fit_coded_ber, fit_simulated_ber, imse, simulate_ber};
use lightcom::phy::{CodecSpec, Modulation};
use lightcom::power_alloc::{allocate, AllocationProblem, Allocator, BerMode};
use lightcom::qoe::niqe::default_pristine_model;
use lightcom::qoe::{fit_pristine_model, niqe_score, BuiltinHistogram, QoEThresholds};
use lightcom::reconstruction::{Interpolation, Reconstructor};
use lightcom::source_codec::{block_mean_encode, merge_bitplanes, split_bitplanes, BitPlaneFrame, PadMode};
use lightcom::synth::dead_leaves_corpus;

type Outcome = Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

/// Gray-mapped QPSK bit error probability `Q(sqrt(snr))`.
fn qpsk_ber(snr: f64) -> f64 {
    0.5 * libm::erfc((snr / 2.0).sqrt())
}

fn analytic_ber() -> Outcome {
    let start = Instant::now();
    let qpsk = Modulation::new(4).unwrap();
    let mut worst = 0.0f64;
    let mut lines = Vec::new();
    for (i, snr) in [0.0, 2.0, 4.0, 8.0].into_iter().enumerate() {
        let m = simulate_ber(&CodecSpec::Uncoded, &qpsk, snr, 1_000_000, 1000 + i as u64).map_err(|e| e.to_string())?;
        let p = qpsk_ber(snr);
        let z = (m.ber() - p).abs() / m.std_dev(p);
        worst = worst.max(z);
        lines.push(format!("snr={snr}: {:.5} vs {:.5} ({z:.2} sd)", m.ber(), p));
    }
    let secs = start.elapsed().as_secs_f64();
    check(worst <= 4.0 && secs < 30.0, format!("{}; {secs:.1}s", lines.join(", ")))
}

fn coded_ber_fit() -> Outcome {
    let snrs: Vec<f64> = (2..=8).map(f64::from).collect();
    let qpsk = Modulation::new(4).unwrap();
    let (points, fit) =
        fit_simulated_ber(&CodecSpec::Hamming74, &qpsk, &snrs, 2_000_000, 77).map_err(|e| e.to_string())?;
    let rel = points
        .iter()
        .filter(|m| m.errors > 0)
        .map(|m| (fit.model.alpha * (fit.model.beta * m.snr).exp() - m.ber()).abs() / m.ber())
        .fold(0.0, f64::max);
    let (a0, b0) = (0.37, -0.83);
    let planted: Vec<(f64, f64)> = snrs.iter().map(|&s| (s, a0 * (b0 * s).exp())).collect();
    let p = fit_coded_ber(&planted).map_err(|e| e.to_string())?;
    let (da, db) = ((p.model.alpha - a0).abs(), (p.model.beta - b0).abs());
    check(
        fit.model.beta < 0.0 && rel <= 0.30 && da <= 1e-9 && db <= 1e-9,
        format!(
            "alpha={:.4} beta={:.4} max rel err {:.1}%; planted recovery error ({da:.1e}, {db:.1e})",
            fit.model.alpha,
            fit.model.beta,
            100.0 * rel
        ),
    )
}

fn random_problem(rng: &mut ChaCha8Rng, k: usize, mode: BerMode) -> AllocationProblem {
    AllocationProblem {
        gains: (0..k).map(|_| 10f64.powf(rng.random_range(-1.0..1.0))).collect(),
        noise_var: 10f64.powf(rng.random_range(-0.5..0.5)),
        weights: (0..k)
            .map(|i| 4f64.powi(i as i32) * rng.random_range(0.5..2.0))
            .collect(),
        total_power: 10f64.powf(rng.random_range(-0.5..2.0)),
        mode,
    }
}

fn coded_mode(rng: &mut ChaCha8Rng) -> BerMode {
    BerMode::Coded {
        alpha: rng.random_range(0.1..1.0),
        beta: -rng.random_range(0.3..2.0),
    }
}

fn wf_conservation() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst = 0.0f64;
    for i in 0..200 {
        let k = rng.random_range(1..=8);
        let mode = if i % 2 == 0 {
            coded_mode(&mut rng)
        } else {
            BerMode::Uncoded {
                order: [4, 16, 64][rng.random_range(0..3)],
            }
        };
        let p = random_problem(&mut rng, k, mode);
        let r = allocate(&p, Allocator::Wf).map_err(|e| e.to_string())?;
        if r.powers.iter().any(|&x| x < 0.0) {
            return Err(format!("negative power on instance {i}"));
        }
        worst = worst.max((r.powers.iter().sum::<f64>() - p.total_power).abs() / p.total_power);
    }
    check(
        worst <= 1e-6,
        format!("200 instances (100 per mode), worst |sum p - P|/P = {worst:.2e}"),
    )
}

fn wf_two_stream_closed_form() -> Outcome {
    let p = AllocationProblem {
        gains: vec![1.0, 1.0],
        noise_var: 1.0,
        weights: vec![1.0, 4.0],
        total_power: 3.0,
        mode: BerMode::Coded { alpha: 0.5, beta: -1.0 },
    };
    let r = allocate(&p, Allocator::Wf).map_err(|e| e.to_string())?;
    // equal marginals: p2 - p1 = ln(gamma2 / gamma1) / -beta
    let p1 = (3.0 - 4f64.ln()) / 2.0;
    let exact = [p1, 3.0 - p1];
    let ok = (r.powers[0] - 0.807).abs() <= 1e-3
        && (r.powers[1] - 2.193).abs() <= 1e-3
        && (r.powers[0] - exact[0]).abs() <= 1e-5;
    check(
        ok,
        format!(
            "p = ({:.6}, {:.6}), closed form ({:.6}, {:.6})",
            r.powers[0], r.powers[1], exact[0], exact[1]
        ),
    )
}

/// Exhaustive search over the simplex with `n` steps per unit of power.
fn grid_optimum(p: &AllocationProblem, n: usize) -> f64 {
    let obj = |powers: &[f64]| -> f64 {
        let BerMode::Coded { alpha, beta } = p.mode else {
            unreachable!()
        };
        powers
            .iter()
            .enumerate()
            .map(|(k, &x)| p.weights[k] * alpha * (beta * x * p.gains[k] / p.noise_var).exp())
            .sum()
    };
    let step = p.total_power / n as f64;
    let mut best = f64::INFINITY;
    match p.gains.len() {
        1 => best = obj(&[p.total_power]),
        2 => {
            for i in 0..=n {
                best = best.min(obj(&[i as f64 * step, p.total_power - i as f64 * step]));
            }
        }
        _ => {
            for i in 0..=n {
                for j in 0..=n - i {
                    let (a, b) = (i as f64 * step, j as f64 * step);
                    best = best.min(obj(&[a, b, (p.total_power - a - b).max(0.0)]));
                }
            }
        }
    }
    best
}

fn wf_grid_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let k = rng.random_range(1..=3);
        let mode = coded_mode(&mut rng);
        let p = random_problem(&mut rng, k, mode);
        let r = allocate(&p, Allocator::Wf).map_err(|e| e.to_string())?;
        let grid = grid_optimum(&p, 600);
        worst = worst.max((r.imse - grid).abs() / grid);
    }
    check(
        worst <= 0.01,
        format!("20 instances K<=3, worst relative objective gap {worst:.2e}"),
    )
}

fn wf_kkt() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst = 0.0f64;
    let mut checked = 0;
    for _ in 0..100 {
        let k = rng.random_range(2..=8);
        let mode = coded_mode(&mut rng);
        let BerMode::Coded { alpha, beta } = mode else {
            unreachable!()
        };
        let p = random_problem(&mut rng, k, mode);
        let r = allocate(&p, Allocator::Wf).map_err(|e| e.to_string())?;
        // gamma_k |d ber / d p_k| evaluated from the closed-form derivative
        let marginal: Vec<f64> = (0..k)
            .map(|i| {
                let c = p.gains[i] / p.noise_var;
                p.weights[i] * alpha * -beta * c * (beta * c * r.powers[i]).exp()
            })
            .collect();
        let active: Vec<f64> = (0..k).filter(|&i| r.powers[i] > 0.0).map(|i| marginal[i]).collect();
        let lambda = active.iter().sum::<f64>() / active.len() as f64;
        for m in &active {
            worst = worst.max((m - lambda).abs() / lambda);
        }
        for i in (0..k).filter(|&i| r.powers[i] == 0.0) {
            if marginal[i] > lambda * (1.0 + 1e-6) {
                return Err(format!("inactive stream with marginal {} above {lambda}", marginal[i]));
            }
        }
        checked += active.len();
    }
    check(
        worst <= 1e-6,
        format!("{checked} active streams, worst relative marginal spread {worst:.2e}"),
    )
}

fn imse_consistency() -> Outcome {
    // 1000 x 100 single-channel source, S = 1e5 samples at r = 1
    let img = &dead_leaves_corpus(1, 1000, 100, 5).map_err(|e| e.to_string())?[0];
    let rep = block_mean_encode(img, 1, 1, PadMode::Reject).map_err(|e| e.to_string())?;
    let frame = split_bitplanes(&rep);
    let s = frame.plane_len();
    let bers = [0.3, 0.2, 0.1, 0.05, 0.02, 0.01, 0.005, 0.002];
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let flipped: Vec<Vec<u8>> = frame
        .planes()
        .iter()
        .zip(bers)
        .map(|(plane, b)| plane.iter().map(|&x| x ^ rng.random_bool(b) as u8).collect())
        .collect();
    let hat = BitPlaneFrame::new(*frame.layout(), flipped).map_err(|e| e.to_string())?;
    let measured = imse(&hat, &frame).map_err(|e| e.to_string())?;
    let gamma = |k: usize| 4f64.powi(k as i32);
    let expected: f64 = bers.iter().enumerate().map(|(k, b)| gamma(k) * b).sum();
    let sd = (bers
        .iter()
        .enumerate()
        .map(|(k, b)| gamma(k).powi(2) * b * (1.0 - b))
        .sum::<f64>()
        / s as f64)
        .sqrt();
    let z = (measured - expected).abs() / sd;

    // one flipped bit in plane k moves one sample by 2^(k-1)
    let mut exact = true;
    for k in 0..frame.depth() {
        let mut planes = frame.planes().to_vec();
        planes[k][12345] ^= 1;
        let one = BitPlaneFrame::new(*frame.layout(), planes).map_err(|e| e.to_string())?;
        let v = imse(&one, &frame).map_err(|e| e.to_string())?;
        let merged = merge_bitplanes(&one).map_err(|e| e.to_string())?;
        let sq: f64 = merged
            .samples()
            .iter()
            .zip(rep.samples())
            .map(|(&a, &b)| (a as f64 - b as f64).powi(2))
            .sum();
        exact &= v == gamma(k) / s as f64 && v == sq / s as f64;
    }
    check(
        z <= 3.0 && exact,
        format!("S={s}: measured {measured:.5} vs {expected:.5} ({z:.2} sd); single-flip values exact: {exact}"),
    )
}

fn chain_round_trip() -> Outcome {
    let rec = Reconstructor::Builtin(Interpolation::Bilinear);
    let scoring = Scoring {
        reconstructor: &rec,
        model: default_pristine_model(),
        provider: &BuiltinHistogram,
        thresholds: QoEThresholds::default(),
    };
    let link = LinkSetup {
        noise_var: 1e-12,
        ..Default::default()
    };
    let mut images = dead_leaves_corpus(2, 128, 96, 8).map_err(|e| e.to_string())?;
    images.push(
        lightcom::synth::DeadLeaves::default()
            .render(160, 128, 3, 9)
            .map_err(|e| e.to_string())?,
    );
    for (i, img) in images.iter().enumerate() {
        let out = run_trial(img, Block::square(1), 8.0, i, 1, &link, &scoring).map_err(|e| e.to_string())?;
        let r = &out.record;
        if r.ber.iter().any(|&b| b != 0.0) || r.imse != 0.0 || &out.reconstructed != img {
            return Err(format!("image {i}: ber {:?}, imse {}", r.ber, r.imse));
        }
    }
    Ok(format!(
        "{} images (gray and RGB): zero bit errors, IMSE 0, bit-identical output",
        images.len()
    ))
}

fn coverage_machinery() -> Outcome {
    let snr: Vec<f64> = (-4..=6).map(|v| 2.0 * v as f64).collect();
    let blocks: Vec<Block> = [1, 2, 3, 4, 5, 8, 10].into_iter().map(Block::square).collect();
    let grid = CoverageGrid::new(snr.clone(), blocks.clone()).map_err(|e| e.to_string())?;
    let (s0, r0) = (1.0, 0.05);
    // QoE stub monotone in both snr and rate; passes iff snr >= s0 and r >= r0
    let stub = |snr_db: f64, block: Block, _t: usize, _seed: u64| -> lightcom::Result<CellSample> {
        let good = snr_db >= s0 && block.rate() >= r0;
        Ok(CellSample {
            d_niqe: if good { 1.0 } else { 20.0 } - snr_db * 0.01 - block.rate(),
            d_clip: if good { 0.02 } else { 0.5 },
            imse_pred: 0.0,
            imse: 0.0,
        })
    };
    let map =
        sweep_coverage(&grid, &stub, PassCriterion::Qoe(QoEThresholds::default()), 3, 0).map_err(|e| e.to_string())?;
    let mut rect = true;
    for (i, &s) in map.grid.snr_db.iter().enumerate() {
        for (j, b) in map.grid.blocks.iter().enumerate() {
            rect &= map.cell(i, j).pass == (s >= s0 && b.rate() >= r0);
        }
    }
    let rmin = map
        .grid
        .blocks
        .iter()
        .map(Block::rate)
        .filter(|&r| r >= r0)
        .fold(f64::INFINITY, f64::min);
    let frontier_ok = map
        .frontier()
        .iter()
        .zip(&map.grid.snr_db)
        .all(|(f, &s)| *f == if s >= s0 { Some(rmin) } else { None });
    let lp = map.limit_points().ok_or("no limit points")?;
    let limits_ok =
        lp.snr_min_db == 2.0 && lp.rate_at_snr_min == rmin && lp.rate_min == rmin && lp.snr_at_rate_min_db == 2.0;

    let g = coverage_gain(-4.0, 0.5, 1.0, 10f64.powf(0.377)).map_err(|e| e.to_string())?;
    let gain_ok = (g.power_db - 4.5).abs() <= 4.0 * f64::EPSILON * 4.5
        && (g.bandwidth_db + 3.77).abs() <= 4.0 * f64::EPSILON * 3.77
        && (g.total_db - 0.73).abs() <= 16.0 * f64::EPSILON;
    check(
        rect && frontier_ok && limits_ok && gain_ok,
        format!(
            "rectangle {rect}, frontier {frontier_ok}, limit points {limits_ok}; gain {:.15} = {:.15} + ({:.15}) dB",
            g.total_db, g.power_db, g.bandwidth_db
        ),
    )
}

fn niqe_sanity() -> Outcome {
    let corpus = dead_leaves_corpus(10, 288, 288, 99).map_err(|e| e.to_string())?;
    let model = default_pristine_model();
    let mut margins = Vec::new();
    for (i, img) in corpus.iter().enumerate() {
        let sharp = niqe_score(img, model).map_err(|e| e.to_string())?.value;
        let blurred = niqe_score(&img.box_blur(9), model).map_err(|e| e.to_string())?.value;
        if blurred <= sharp || blurred.is_nan() {
            return Err(format!("image {i}: blurred {blurred:.3} <= sharp {sharp:.3}"));
        }
        margins.push(blurred - sharp);
    }
    let bytes = |m: &lightcom::qoe::PristineModel| {
        let mut v = Vec::new();
        m.write_to(&mut v).map(|_| v)
    };
    let a = fit_pristine_model(&corpus, "acceptance").map_err(|e| e.to_string())?;
    let b = fit_pristine_model(&corpus, "acceptance").map_err(|e| e.to_string())?;
    let identical = bytes(&a).map_err(|e| e.to_string())? == bytes(&b).map_err(|e| e.to_string())?;
    let min = margins.iter().copied().fold(f64::INFINITY, f64::min);
    check(
        identical,
        format!("10/10 images score worse blurred (min margin {min:.2}); refit bit-identical: {identical}"),
    )
}

fn desk_scale_sweep(allocator: Allocator) -> lightcom::Result<CoverageMap> {
    let images = dead_leaves_corpus(2, 192, 192, 21)?;
    let link = LinkSetup {
        codec: CodecSpec::Hamming74,
        allocator,
        ..Default::default()
    };
    let rec = Reconstructor::Builtin(Interpolation::Bilinear);
    let eval = ChainEvaluator {
        images: &images,
        link: &link,
        scoring: Scoring {
            reconstructor: &rec,
            model: default_pristine_model(),
            provider: &BuiltinHistogram,
            thresholds: QoEThresholds::default(),
        },
    };
    let grid = CoverageGrid::new(
        (-3..=7).map(|v| 2.0 * v as f64).collect(),
        [1, 2, 3, 4, 6, 8].into_iter().map(Block::square).collect(),
    )?;
    sweep_coverage(&grid, &eval, PassCriterion::PredictedImse { max_db: -20.0 }, 2, 5)
}

fn desk_scale(wf: &CoverageMap, ep: &CoverageMap) -> (Outcome, Outcome) {
    let rows: Vec<usize> = (0..wf.grid.snr_db.len())
        .map(|i| (0..wf.grid.blocks.len()).filter(|&j| wf.cell(i, j).pass).count())
        .collect();
    let growing = rows.windows(2).all(|w| w[0] <= w[1]);
    let nontrivial = rows.first() != rows.last();
    let first = wf
        .frontier()
        .iter()
        .position(Option::is_some)
        .map(|i| wf.grid.snr_db[i]);
    let i = check(
        growing && nontrivial && wf.upward_closed_in_snr() && wf.invalid_cells() == 0,
        format!("passing cells per snr row {rows:?}; first passing snr {first:?} dB"),
    );
    let mut worst = f64::NEG_INFINITY;
    for (a, b) in wf.cells.iter().zip(&ep.cells) {
        worst = worst.max((a.imse_pred_mean - b.imse_pred_mean) / b.imse_pred_mean);
    }
    let ii = check(
        worst <= 1e-9 && wf.invalid_cells() + ep.invalid_cells() == 0,
        format!("{} cells, max relative (WF - EP) / EP = {worst:.3e}", wf.cells.len()),
    );
    (i, ii)
}

fn main() {
    let mut results: Vec<(&str, Outcome)> = vec![
        ("analytic uncoded BER", analytic_ber()),
        ("coded BER fit", coded_ber_fit()),
        ("waterfilling (a) power conservation", wf_conservation()),
        ("waterfilling (b) K=2 closed form", wf_two_stream_closed_form()),
        ("waterfilling (c) grid-search oracle", wf_grid_oracle()),
        ("waterfilling (d) KKT stationarity", wf_kkt()),
        ("IMSE consistency", imse_consistency()),
        ("chain round trip", chain_round_trip()),
        ("coverage machinery and gain decomposition", coverage_machinery()),
        ("NIQE sanity and determinism", niqe_sanity()),
    ];
    match (desk_scale_sweep(Allocator::Wf), desk_scale_sweep(Allocator::Ep)) {
        (Ok(wf), Ok(ep)) => {
            let (i, ii) = desk_scale(&wf, &ep);
            results.push(("desk scale (i) pass region grows with snr", i));
            results.push(("desk scale (ii) WF predicted IMSE <= EP per cell", ii));
        }
        (a, b) => {
            let e = a.err().or(b.err()).map(|e| e.to_string()).unwrap_or_default();
            results.push(("desk scale (i) pass region grows with snr", Err(e.clone())));
            results.push(("desk scale (ii) WF predicted IMSE <= EP per cell", Err(e)));
        }
    }
    let mut failed = 0;
    for (name, r) in &results {
        match r {
            Ok(d) => println!("PASS  {name}: {d}"),
            Err(d) => {
                failed += 1;
                println!("FAIL  {name}: {d}")
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", results.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
