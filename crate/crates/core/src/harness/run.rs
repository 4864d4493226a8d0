//! Orchestration of end-to-end runs and coverage sweeps, and persistence of
//! their artifacts. Every artifact is a pure function of the config and
//! seed: no timestamps, fixed aggregation order.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::chain::{run_trial, ChainEvaluator, Scoring, TrialRecord};
use crate::coverage::{sweep_coverage, Block, CoverageGrid, CoverageMap};
use crate::error::{Error, Result};
use crate::harness::config::{OperatingPoint, RunConfig};
use crate::image::Image;
use crate::phy::rng::stream_seed;
use crate::qoe::niqe::default_pristine_model;
use crate::qoe::PristineModel;

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub points: Vec<OperatingPoint>,
    /// Ordered by operating point, then trial.
    pub records: Vec<TrialRecord>,
    pub artifacts: Vec<PathBuf>,
}

/// Loaded inputs shared by runs and sweeps.
struct Prepared {
    images: Vec<Image>,
    model: PristineModel,
    reconstructor: crate::reconstruction::Reconstructor,
    provider: Box<dyn crate::qoe::EmbeddingProvider>,
}

fn prepare(cfg: &RunConfig) -> Result<Prepared> {
    cfg.validate()?;
    Ok(Prepared {
        images: cfg.load_images()?,
        model: match &cfg.qoe.pristine_model {
            Some(p) => PristineModel::load(p)?,
            None => default_pristine_model().clone(),
        },
        reconstructor: cfg.reconstructor.build()?,
        provider: cfg.embedding.build()?,
    })
}

fn pool(threads: Option<usize>) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads.unwrap_or(0))
        .build()
        .map_err(|e| Error::config("run.threads", e.to_string()))
}

/// Runs `trials` chain trials at every operating point and writes
/// `trials.csv`, `summary.txt`, `ber.dat`, `ber.gp`, `config.toml` and
/// `manifest.json` under `out_dir`.
pub fn run_end_to_end(cfg: &RunConfig, out_dir: &Path) -> Result<RunOutput> {
    let prep = prepare(cfg)?;
    let block = cfg.source.block()?;
    let k = prep.images[0].bit_depth() as usize;
    let points = cfg.operating_points.resolve(&cfg.link, k)?;
    let scoring = Scoring {
        reconstructor: &prep.reconstructor,
        model: &prep.model,
        provider: prep.provider.as_ref(),
        thresholds: cfg.qoe.thresholds,
    };
    let trials = cfg.run.trials;
    let jobs: Vec<(usize, usize)> = (0..points.len())
        .flat_map(|p| (0..trials).map(move |t| (p, t)))
        .collect();
    let records = pool(cfg.run.threads)?.install(|| {
        jobs.par_iter()
            .map(|&(p, t)| {
                let img = &prep.images[t % prep.images.len()];
                let seed = stream_seed(cfg.run.base_seed, t as u64, 0);
                run_trial(img, block, points[p].total_power, t, seed, &cfg.link, &scoring).map(|o| o.record)
            })
            .collect::<Result<Vec<_>>>()
    })?;

    std::fs::create_dir_all(out_dir)?;
    let mut files = BTreeMap::new();
    files.insert("trials.csv", trials_csv(&points, &records, trials, prep.images.len()));
    files.insert("summary.txt", run_summary(cfg, &points, &records, trials, block));
    files.insert("ber.dat", ber_table(&points, &records, trials, k));
    files.insert("ber.gp", ber_script(k));
    let artifacts = write_with_manifest(cfg, out_dir, files)?;
    Ok(RunOutput {
        points,
        records,
        artifacts,
    })
}

fn join(v: &[f64]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(";")
}

fn trials_csv(points: &[OperatingPoint], records: &[TrialRecord], trials: usize, n_images: usize) -> String {
    let mut s = String::from(
        "point_snr_db,trial,image,seed,total_power,snr_db_per_stream,ber_per_plane,imse,imse_pred,d_niqe,d_clip,pass\n",
    );
    for (i, r) in records.iter().enumerate() {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            points[i / trials].snr_db,
            r.trial,
            r.trial % n_images,
            r.seed,
            r.total_power,
            join(&r.snr_db),
            join(&r.ber),
            r.imse,
            r.imse_pred,
            r.qoe.d_niqe,
            r.qoe.d_clip,
            r.pass as u8
        );
    }
    s
}

fn mean(v: impl Iterator<Item = f64>) -> f64 {
    let (s, n) = v.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    s / n as f64
}

fn run_summary(
    cfg: &RunConfig,
    points: &[OperatingPoint],
    records: &[TrialRecord],
    trials: usize,
    block: Block,
) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "codec {} | {}-QAM | allocator {:?} | block {}x{} (rate {}) | {} trials per point | base seed {}",
        cfg.link.codec.label(),
        cfg.link.modulation,
        cfg.link.allocator,
        block.b1,
        block.b2,
        block.rate(),
        trials,
        cfg.run.base_seed
    );
    let _ = writeln!(
        s,
        "snr_db,mean_imse_db,mean_imse_pred_db,mean_d_niqe,mean_d_clip,pass_rate"
    );
    for (p, chunk) in points.iter().zip(records.chunks(trials)) {
        let w = chunk[0].weight_sum;
        let _ = writeln!(
            s,
            "{},{},{},{},{},{}",
            p.snr_db,
            10.0 * (mean(chunk.iter().map(|r| r.imse)) / w).log10(),
            10.0 * (mean(chunk.iter().map(|r| r.imse_pred)) / w).log10(),
            mean(chunk.iter().map(|r| r.qoe.d_niqe)),
            mean(chunk.iter().map(|r| r.qoe.d_clip)),
            mean(chunk.iter().map(|r| r.pass as u8 as f64))
        );
    }
    s
}

fn ber_table(points: &[OperatingPoint], records: &[TrialRecord], trials: usize, k: usize) -> String {
    let mut s = String::from("# snr_db");
    for i in 1..=k {
        let _ = write!(s, " ber_plane{i}");
    }
    s.push('\n');
    for (p, chunk) in points.iter().zip(records.chunks(trials)) {
        let _ = write!(s, "{}", p.snr_db);
        for i in 0..k {
            let _ = write!(s, " {}", mean(chunk.iter().map(|r| r.ber[i])));
        }
        s.push('\n');
    }
    s
}

fn ber_script(k: usize) -> String {
    let mut s = String::from(
        "set terminal pngcairo size 800,600\nset output 'ber.png'\nset logscale y\n\
         set xlabel 'average snr per stream (dB)'\nset ylabel 'measured BER'\nplot ",
    );
    let series: Vec<String> = (1..=k)
        .map(|i| format!("'ber.dat' using 1:{} with linespoints title 'plane {i}'", i + 1))
        .collect();
    s.push_str(&series.join(", \\\n     "));
    s.push('\n');
    s
}

/// Runs the coverage sweep from `cfg.coverage` and writes `coverage.csv`,
/// `coverage_summary.txt`, gnuplot matrices and script, config and manifest.
pub fn run_coverage(cfg: &RunConfig, out_dir: &Path) -> Result<CoverageMap> {
    let cov = cfg
        .coverage
        .as_ref()
        .ok_or_else(|| Error::config("coverage", "missing [coverage] section"))?;
    let prep = prepare(cfg)?;
    let grid = CoverageGrid::new(
        cov.snr_db.clone(),
        cov.blocks.iter().map(|&b| Block::square(b)).collect(),
    )?;
    let eval = ChainEvaluator {
        images: &prep.images,
        link: &cfg.link,
        scoring: Scoring {
            reconstructor: &prep.reconstructor,
            model: &prep.model,
            provider: prep.provider.as_ref(),
            thresholds: cfg.qoe.thresholds,
        },
    };
    let trials = cov.trials.unwrap_or(cfg.run.trials);
    let map =
        pool(cfg.run.threads)?.install(|| sweep_coverage(&grid, &eval, cov.criterion, trials, cfg.run.base_seed))?;

    std::fs::create_dir_all(out_dir)?;
    let text = |f: &dyn Fn(&mut Vec<u8>) -> Result<()>| -> Result<String> {
        let mut buf = Vec::new();
        f(&mut buf)?;
        Ok(String::from_utf8(buf).expect("writers emit UTF-8"))
    };
    let mut files = BTreeMap::new();
    files.insert("coverage.csv", text(&|b| map.write_csv(b))?);
    files.insert("coverage_summary.txt", text(&|b| map.write_summary(b))?);
    files.insert(
        "coverage_pass.dat",
        text(&|b| map.write_matrix(b, |c| c.pass as u8 as f64))?,
    );
    files.insert("coverage_niqe.dat", text(&|b| map.write_matrix(b, |c| c.d_niqe_mean))?);
    files.insert("coverage_clip.dat", text(&|b| map.write_matrix(b, |c| c.d_clip_mean))?);
    files.insert("coverage.gp", coverage_script());
    write_with_manifest(cfg, out_dir, files)?;
    Ok(map)
}

fn coverage_script() -> String {
    "set terminal pngcairo size 900,600\nset output 'coverage.png'\n\
     set xlabel 'compression rate r'\nset ylabel 'average snr per stream (dB)'\n\
     set logscale x\nset view map\n\
     splot 'coverage_niqe.dat' nonuniform matrix with image title 'mean d_niqe', \\\n\
     \x20     'coverage_pass.dat' nonuniform matrix with points pt 7 ps 0.6 lc rgb 'white' title 'pass'\n"
        .into()
}

#[derive(Serialize)]
struct Manifest<'a> {
    tool: &'a str,
    version: &'a str,
    config_sha256: String,
    artifacts: BTreeMap<&'a str, String>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn write_with_manifest(cfg: &RunConfig, out_dir: &Path, mut files: BTreeMap<&str, String>) -> Result<Vec<PathBuf>> {
    let config = cfg.to_toml()?;
    let config_sha256 = sha256_hex(config.as_bytes());
    files.insert("config.toml", config);
    let mut artifacts = BTreeMap::new();
    let mut paths = Vec::new();
    for (name, body) in &files {
        let path = out_dir.join(name);
        std::fs::write(&path, body)?;
        artifacts.insert(*name, sha256_hex(body.as_bytes()));
        paths.push(path);
    }
    let manifest = Manifest {
        tool: env!("CARGO_PKG_NAME"),
        version: env!("CARGO_PKG_VERSION"),
        config_sha256,
        artifacts,
    };
    let path = out_dir.join("manifest.json");
    let mut body = serde_json::to_string_pretty(&manifest).map_err(|e| Error::format(&path, e.to_string()))?;
    body.push('\n');
    std::fs::write(&path, body)?;
    paths.push(path);
    Ok(paths)
}
