//! Command-line surface. Exit codes: 0 success, 1 usage error, 2 runtime
//! error. Power and snr flags are in dB unless their name ends in `-lin`.

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::coverage::Block;
use crate::error::{Error, Result};
use crate::harness::config::{rate_to_block, RunConfig};
use crate::harness::run::{run_coverage, run_end_to_end};
use crate::image::Image;
use crate::link_models::{fit_coded_ber, fit_simulated_ber, read_ber_csv, write_ber_csv, write_fit_record};
use crate::phy::{db_to_linear, CodecSpec, Modulation};
use crate::power_alloc::{allocate, AllocationConfig, AllocationProblem, Allocator, BerMode};
use crate::qoe::niqe::default_pristine_model;
use crate::qoe::{fit_pristine_model, niqe_score, semantic_distance, EmbeddingConfig, PristineModel};
use crate::reconstruction::{reconstruct, Interpolation, Reconstructor, ReconstructorConfig};
use crate::remote::ServiceConfig;
use crate::source_codec::{block_mean_encode, CompressedRep, PadMode};
use crate::synth::dead_leaves_corpus;

#[derive(Debug, Parser)]
#[command(name = "lightcom", version, about = "Importance-aware image link simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Block-mean encode an image into a compressed representation file.
    Encode(EncodeArgs),
    /// Upscale a compressed representation back to full resolution.
    Reconstruct(ReconstructArgs),
    /// Run the end-to-end chain over every operating point of a config.
    Simulate(ConfigArgs),
    /// Solve one power allocation problem and print the per-plane CSV.
    Allocate(AllocateArgs),
    /// Fit `ber = alpha exp(beta snr)` to samples or to a Monte-Carlo run.
    FitBer(FitBerArgs),
    /// Score an image against a pristine model.
    Niqe(NiqeArgs),
    /// Fit a pristine model from a corpus of sharp images.
    FitPristine(FitPristineArgs),
    /// Sweep the (snr, rate) grid of a config and derive the coverage map.
    SweepCoverage(ConfigArgs),
    /// Semantic distance between two images.
    EmbedDistance(EmbedArgs),
}

#[derive(Debug, Args)]
struct EncodeArgs {
    /// Source image (PNG or PGM/PPM).
    #[arg(long)]
    input: PathBuf,
    /// Compression rate of the form 1/b^2.
    #[arg(long, conflicts_with = "block", required_unless_present = "block")]
    rate: Option<f64>,
    /// Explicit block factors, `b1xb2`.
    #[arg(long, value_parser = parse_block)]
    block: Option<Block>,
    /// Replicate edges instead of rejecting sizes not divisible by the block.
    #[arg(long)]
    pad: bool,
    /// Output representation file; only the block choice is printed when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write the low-resolution image as PNG/PGM.
    #[arg(long)]
    preview: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ReconstructArgs {
    /// Compressed representation file written by `encode`.
    #[arg(long)]
    input: PathBuf,
    /// Output image (PNG, or PGM for `.pgm`).
    #[arg(long)]
    out: PathBuf,
    /// Reconstructor kind.
    #[arg(long, value_enum, default_value_t = Kind::Bilinear)]
    kind: Kind,
    /// Restoration service base URL, required for `--kind remote`.
    #[arg(long)]
    endpoint: Option<String>,
    /// Optional text prompt forwarded to the restoration service.
    #[arg(long)]
    prompt: Option<String>,
    /// Built-in kind to fall back to when the service fails.
    #[arg(long, value_enum)]
    fallback: Option<Kind>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Kind {
    Nearest,
    Bilinear,
    Bicubic,
    Remote,
}

impl Kind {
    fn interpolation(self) -> Option<Interpolation> {
        match self {
            Kind::Nearest => Some(Interpolation::Nearest),
            Kind::Bilinear => Some(Interpolation::Bilinear),
            Kind::Bicubic => Some(Interpolation::Bicubic),
            Kind::Remote => None,
        }
    }
}

#[derive(Debug, Args)]
struct ConfigArgs {
    /// TOML run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides `run.out_dir`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads; overrides `run.threads`.
    #[arg(long)]
    threads: Option<usize>,
    /// Base seed; overrides `run.base_seed`.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Mode {
    Uncoded,
    Coded,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum AllocatorArg {
    Ep,
    Wf,
}

#[derive(Debug, Args)]
struct AllocateArgs {
    /// TOML allocation problem; replaces the problem flags below.
    #[arg(long, conflicts_with_all = ["k", "gains", "gains_db", "weights", "power", "power_lin", "mode"])]
    config: Option<PathBuf>,
    /// Number of streams; defaults to the length of `--gains`.
    #[arg(long)]
    k: Option<usize>,
    /// Channel power gains |h_k|^2, linear, comma separated. Unit gains when absent.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    gains: Option<Vec<f64>>,
    /// Channel power gains in dB, comma separated.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, conflicts_with = "gains")]
    gains_db: Option<Vec<f64>>,
    /// Importance weights; `4^(k-1)` when absent.
    #[arg(long, value_delimiter = ',')]
    weights: Option<Vec<f64>>,
    /// Total power budget, dB.
    #[arg(long, allow_hyphen_values = true, required_unless_present_any = ["power_lin", "config"])]
    power: Option<f64>,
    /// Total power budget, linear.
    #[arg(long, conflicts_with = "power")]
    power_lin: Option<f64>,
    /// Noise variance, dB.
    #[arg(long, allow_hyphen_values = true, default_value_t = 0.0)]
    noise_var: f64,
    /// Noise variance, linear.
    #[arg(long, conflicts_with = "noise_var")]
    noise_var_lin: Option<f64>,
    /// BER model the allocation optimizes.
    #[arg(long, value_enum, default_value_t = Mode::Coded)]
    mode: Mode,
    /// Constellation size for uncoded mode.
    #[arg(long, default_value_t = 4)]
    order: usize,
    /// Coded model scale.
    #[arg(long, default_value_t = crate::chain::HAMMING74_QPSK.alpha)]
    alpha: f64,
    /// Coded model slope (negative).
    #[arg(long, allow_hyphen_values = true, default_value_t = crate::chain::HAMMING74_QPSK.beta)]
    beta: f64,
    /// Equal power or importance-aware waterfilling.
    #[arg(long, value_enum, default_value_t = AllocatorArg::Wf)]
    allocator: AllocatorArg,
    /// Write the CSV here instead of standard output.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct FitBerArgs {
    /// CSV with header `snr_linear,ber`; skips the simulation.
    #[arg(long)]
    samples: Option<PathBuf>,
    /// Codec to simulate: uncoded, hamming74, repetition:N, conv or conv:K:G1:G2 (octal).
    #[arg(long, value_parser = parse_codec, default_value = "hamming74")]
    codec: CodecSpec,
    /// Constellation size.
    #[arg(long, default_value_t = 4)]
    modulation: usize,
    /// Per-symbol snr points, dB.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, conflicts_with = "snr_lin")]
    snr: Option<Vec<f64>>,
    /// Per-symbol snr points, linear; default 2,3,...,8.
    #[arg(long, value_delimiter = ',')]
    snr_lin: Option<Vec<f64>>,
    /// Bits simulated per point.
    #[arg(long, default_value_t = 1_000_000)]
    bits: usize,
    /// Monte-Carlo seed.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Fit record output, `alpha_c,beta_c,max_rel_err`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write the measured samples as `snr_linear,ber`.
    #[arg(long)]
    samples_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct NiqeArgs {
    /// Pristine model file; the built-in synthetic model when absent.
    #[arg(long)]
    model: Option<PathBuf>,
    /// Image to score.
    #[arg(long)]
    input: PathBuf,
}

#[derive(Debug, Args)]
struct FitPristineArgs {
    /// Corpus images.
    #[arg(long, num_args = 1.., required_unless_present = "synthetic")]
    inputs: Vec<PathBuf>,
    /// Use N seeded dead-leaves images instead of files.
    #[arg(long, conflicts_with = "inputs")]
    synthetic: Option<usize>,
    /// Side of the synthetic images.
    #[arg(long, default_value_t = 288)]
    size: usize,
    /// Seed of the synthetic corpus.
    #[arg(long, default_value_t = crate::qoe::niqe::DEFAULT_CORPUS_SEED)]
    seed: u64,
    /// Corpus identifier stored in the model.
    #[arg(long)]
    id: Option<String>,
    /// Model file to write.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct EmbedArgs {
    /// First image.
    #[arg(long)]
    a: PathBuf,
    /// Second image.
    #[arg(long)]
    b: PathBuf,
    /// Embedding service base URL; the built-in histogram provider when absent.
    #[arg(long)]
    endpoint: Option<String>,
}

fn parse_block(s: &str) -> std::result::Result<Block, String> {
    let (a, b) = s
        .split_once(['x', 'X'])
        .ok_or_else(|| format!("expected b1xb2, got {s:?}"))?;
    let parse = |v: &str| v.trim().parse::<usize>().ok().filter(|&n| n > 0);
    match (parse(a), parse(b)) {
        (Some(b1), Some(b2)) => Ok(Block { b1, b2 }),
        _ => Err(format!("block factors must be positive integers, got {s:?}")),
    }
}

/// Parses `uncoded`, `hamming74`, `repetition:N`, `conv` or `conv:K:G1:G2`
/// with octal generators.
pub fn parse_codec(s: &str) -> std::result::Result<CodecSpec, String> {
    let parts: Vec<&str> = s.split(':').collect();
    let spec = match parts.as_slice() {
        ["uncoded"] => CodecSpec::Uncoded,
        ["hamming74"] | ["hamming"] => CodecSpec::Hamming74,
        ["repetition", n] | ["rep", n] => CodecSpec::Repetition {
            n: n.parse().map_err(|_| format!("bad repetition factor {n:?}"))?,
        },
        ["conv"] => CodecSpec::standard_convolutional(),
        ["conv", k, g1, g2] => CodecSpec::Convolutional {
            constraint_length: k.parse().map_err(|_| format!("bad constraint length {k:?}"))?,
            generators: [
                u32::from_str_radix(g1, 8).map_err(|_| format!("bad octal generator {g1:?}"))?,
                u32::from_str_radix(g2, 8).map_err(|_| format!("bad octal generator {g2:?}"))?,
            ],
        },
        _ => return Err(format!("unknown codec {s:?}")),
    };
    spec.validate().map_err(|e| e.to_string())?;
    Ok(spec)
}

/// Parses `argv` (including the program name) and runs the subcommand.
pub fn cli_dispatch<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match execute(cli.command) {
        Ok(()) => 0,
        Err(Error::Config { field, message }) if field.starts_with("cli.") => {
            eprintln!("error: {}: {message}", &field[4..]);
            1
        }
        Err(e) => {
            eprintln!("error: {e}");
            2
        }
    }
}

fn usage(flag: &str, message: impl Into<String>) -> Error {
    Error::config(format!("cli.{flag}"), message)
}

fn execute(command: Command) -> Result<()> {
    let mut stdout = std::io::stdout().lock();
    match command {
        Command::Encode(a) => encode(a, &mut stdout),
        Command::Reconstruct(a) => reconstruct_cmd(a, &mut stdout),
        Command::Simulate(a) => {
            let (cfg, out) = load_config(&a)?;
            let res = run_end_to_end(&cfg, &out)?;
            let passed = res.records.iter().filter(|r| r.pass).count();
            writeln!(
                stdout,
                "{} trials over {} operating points, {passed} passed; artifacts in {}",
                res.records.len(),
                res.points.len(),
                out.display()
            )?;
            Ok(())
        }
        Command::Allocate(a) => allocate_cmd(a, &mut stdout),
        Command::FitBer(a) => fit_ber_cmd(a, &mut stdout),
        Command::Niqe(a) => {
            let model = match &a.model {
                Some(p) => PristineModel::load(p)?,
                None => default_pristine_model().clone(),
            };
            let s = niqe_score(&Image::load(&a.input)?, &model)?;
            writeln!(stdout, "{}{}", s.value, if s.clamped { " (clamped)" } else { "" })?;
            Ok(())
        }
        Command::FitPristine(a) => {
            let (images, default_id) = match a.synthetic {
                Some(n) => (
                    dead_leaves_corpus(n, a.size, a.size, a.seed)?,
                    format!("dead-leaves-{n}x{}-seed{}", a.size, a.seed),
                ),
                None => (
                    a.inputs.iter().map(Image::load).collect::<Result<Vec<_>>>()?,
                    format!("files-{}", a.inputs.len()),
                ),
            };
            let model = fit_pristine_model(&images, a.id.as_deref().unwrap_or(&default_id))?;
            model.save(&a.out)?;
            writeln!(
                stdout,
                "fitted {} on {} images -> {}",
                model.corpus_id,
                images.len(),
                a.out.display()
            )?;
            Ok(())
        }
        Command::SweepCoverage(a) => {
            let (cfg, out) = load_config(&a)?;
            let map = run_coverage(&cfg, &out)?;
            map.write_summary(&mut stdout)?;
            Ok(())
        }
        Command::EmbedDistance(a) => {
            let provider = match a.endpoint {
                Some(e) => EmbeddingConfig::Remote {
                    service: ServiceConfig::new(e),
                }
                .build()?,
                None => EmbeddingConfig::BuiltinHistogram.build()?,
            };
            let d = semantic_distance(&Image::load(&a.a)?, &Image::load(&a.b)?, provider.as_ref())?;
            writeln!(stdout, "{d}")?;
            Ok(())
        }
    }
}

fn load_config(a: &ConfigArgs) -> Result<(RunConfig, PathBuf)> {
    let mut cfg = RunConfig::load(&a.config)?;
    if a.threads.is_some() {
        cfg.run.threads = a.threads;
    }
    if let Some(s) = a.seed {
        cfg.run.base_seed = s;
    }
    let out = a.out.clone().unwrap_or_else(|| cfg.run.out_dir.clone());
    Ok((cfg, out))
}

fn encode(a: EncodeArgs, w: &mut impl Write) -> Result<()> {
    let block = match (a.block, a.rate) {
        (Some(b), _) => b,
        (None, Some(r)) => rate_to_block(r).map_err(|e| usage("rate", e.to_string()))?,
        (None, None) => return Err(usage("rate", "give --rate or --block")),
    };
    let img = Image::load(&a.input)?;
    let pad = if a.pad { PadMode::Replicate } else { PadMode::Reject };
    let rep = block_mean_encode(&img, block.b1, block.b2, pad)?;
    writeln!(
        w,
        "block {}x{} rate {} -> {}x{}x{} at {} bits",
        block.b1,
        block.b2,
        block.rate(),
        rep.width(),
        rep.height(),
        rep.channels(),
        rep.bit_depth()
    )?;
    if let Some(out) = &a.out {
        rep.save(out)?;
    }
    if let Some(p) = &a.preview {
        rep.as_image().save(p)?;
    }
    Ok(())
}

fn reconstruct_cmd(a: ReconstructArgs, w: &mut impl Write) -> Result<()> {
    let rep = CompressedRep::load(&a.input)?;
    let fallback = a
        .fallback
        .map(|k| {
            k.interpolation()
                .ok_or_else(|| usage("fallback", "must be a built-in kind"))
        })
        .transpose()?;
    let cfg = match (a.kind.interpolation(), a.endpoint) {
        (Some(Interpolation::Nearest), _) => ReconstructorConfig::Nearest,
        (Some(Interpolation::Bilinear), _) => ReconstructorConfig::Bilinear,
        (Some(Interpolation::Bicubic), _) => ReconstructorConfig::Bicubic,
        (None, endpoint) => {
            let endpoint = endpoint
                .or_else(|| std::env::var(crate::remote::ENDPOINT_ENV).ok())
                .ok_or_else(|| usage("endpoint", "--kind remote needs --endpoint or the environment override"))?;
            ReconstructorConfig::Remote {
                service: ServiceConfig::new(endpoint),
                prompt: a.prompt,
                fallback,
            }
        }
    };
    let rec: Reconstructor = cfg.build()?;
    let img = reconstruct(&rep, &rec)?;
    img.save(&a.out)?;
    writeln!(
        w,
        "{} {}x{} -> {}",
        rec.label(),
        img.width(),
        img.height(),
        a.out.display()
    )?;
    Ok(())
}

fn allocate_cmd(a: AllocateArgs, w: &mut impl Write) -> Result<()> {
    let problem = match &a.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)?;
            let cfg: AllocationConfig = toml::from_str(&text).map_err(|e| Error::format(path, e.to_string()))?;
            cfg.to_problem()?
        }
        None => {
            let gains = match (&a.gains, &a.gains_db) {
                (Some(g), _) => Some(g.clone()),
                (None, Some(g)) => Some(g.iter().map(|&v| db_to_linear(v)).collect()),
                (None, None) => None,
            };
            let k = match (a.k, &gains) {
                (Some(k), Some(g)) if g.len() != k => {
                    return Err(usage("gains", format!("{} values for --k {k}", g.len())))
                }
                (Some(k), _) => k,
                (None, Some(g)) => g.len(),
                (None, None) => return Err(usage("k", "give --k or --gains")),
            };
            let weights = a
                .weights
                .clone()
                .unwrap_or_else(|| (0..k as i32).map(|i| 4f64.powi(i)).collect());
            if weights.len() != k {
                return Err(usage("weights", format!("{} values for {k} streams", weights.len())));
            }
            let mode = match a.mode {
                Mode::Uncoded => BerMode::Uncoded { order: a.order },
                Mode::Coded => BerMode::Coded {
                    alpha: a.alpha,
                    beta: a.beta,
                },
            };
            let problem = AllocationProblem {
                gains: gains.unwrap_or_else(|| vec![1.0; k]),
                noise_var: a.noise_var_lin.unwrap_or_else(|| db_to_linear(a.noise_var)),
                weights,
                total_power: a
                    .power_lin
                    .or(a.power.map(db_to_linear))
                    .ok_or_else(|| usage("power", "give --power or --power-lin"))?,
                mode,
            };
            problem.validate()?;
            problem
        }
    };
    let allocator = match a.allocator {
        AllocatorArg::Ep => Allocator::Ep,
        AllocatorArg::Wf => Allocator::Wf,
    };
    let result = allocate(&problem, allocator)?;
    match &a.out {
        Some(path) => {
            let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
            result.write_csv(&problem, &mut f)?;
            f.flush()?;
        }
        None => result.write_csv(&problem, w)?,
    }
    Ok(())
}

fn fit_ber_cmd(a: FitBerArgs, w: &mut impl Write) -> Result<()> {
    let (samples, fit) = match &a.samples {
        Some(path) => {
            let samples = read_ber_csv(path)?;
            let fit = fit_coded_ber(&samples)?;
            (samples, fit)
        }
        None => {
            let snrs = match (&a.snr, &a.snr_lin) {
                (Some(db), _) => db.iter().map(|&s| db_to_linear(s)).collect(),
                (None, Some(lin)) => lin.clone(),
                (None, None) => (2..=8).map(f64::from).collect::<Vec<_>>(),
            };
            let modulation = Modulation::new(a.modulation)?;
            let (points, fit) = fit_simulated_ber(&a.codec, &modulation, &snrs, a.bits, a.seed)?;
            (points.iter().map(|m| (m.snr, m.ber())).collect(), fit)
        }
    };
    if let Some(path) = &a.samples_out {
        write_ber_csv(std::fs::File::create(path)?, &samples)?;
    }
    if let Some(path) = &a.out {
        write_fit_record(std::fs::File::create(path)?, &fit)?;
    }
    write_fit_record(&mut *w, &fit)?;
    if fit.clamped {
        writeln!(w, "# slope was positive and clamped to 0")?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn codec_strings() {
        assert_eq!(parse_codec("uncoded").unwrap(), CodecSpec::Uncoded);
        assert_eq!(parse_codec("hamming74").unwrap(), CodecSpec::Hamming74);
        assert_eq!(parse_codec("repetition:3").unwrap(), CodecSpec::Repetition { n: 3 });
        assert_eq!(parse_codec("conv").unwrap(), CodecSpec::standard_convolutional());
        assert_eq!(
            parse_codec("conv:7:171:133").unwrap(),
            CodecSpec::standard_convolutional()
        );
        assert!(parse_codec("conv:7:9:133").is_err());
        assert!(parse_codec("repetition:0").is_err());
        assert!(parse_codec("ldpc").is_err());
    }

    #[test]
    fn block_strings() {
        assert_eq!(parse_block("4x2").unwrap(), Block { b1: 4, b2: 2 });
        assert!(parse_block("4").is_err());
        assert!(parse_block("0x2").is_err());
    }

    #[test]
    fn usage_errors_exit_one() {
        assert_eq!(cli_dispatch(["lightcom", "bogus"]), 1);
        assert_eq!(cli_dispatch(["lightcom", "allocate", "--k", "2"]), 1);
        assert_eq!(cli_dispatch(["lightcom", "--help"]), 0);
    }

    #[test]
    fn runtime_errors_exit_two() {
        assert_eq!(cli_dispatch(["lightcom", "niqe", "--input", "/nonexistent/x.png"]), 2);
    }

    #[test]
    fn every_flag_is_documented() {
        use clap::CommandFactory;
        let cmd = Cli::command();
        for sub in cmd.get_subcommands() {
            assert!(sub.get_about().is_some(), "{}", sub.get_name());
            for arg in sub.get_arguments() {
                assert!(arg.get_help().is_some(), "{} --{}", sub.get_name(), arg.get_id());
            }
        }
    }
}
