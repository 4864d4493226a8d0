//! TOML run configuration.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::chain::LinkSetup;
use crate::coverage::{Block, PassCriterion};
use crate::error::{Error, Result};
use crate::image::Image;
use crate::qoe::{EmbeddingConfig, QoEThresholds};
use crate::reconstruction::ReconstructorConfig;
use crate::synth::dead_leaves_corpus;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub input: InputConfig,
    pub source: SourceConfig,
    #[serde(default)]
    pub link: LinkSetup,
    pub operating_points: OperatingPoints,
    #[serde(default)]
    pub reconstructor: ReconstructorConfig,
    #[serde(default)]
    pub embedding: EmbeddingConfig,
    #[serde(default)]
    pub qoe: QoeConfig,
    #[serde(default)]
    pub run: RunSection,
    #[serde(default)]
    pub coverage: Option<CoverageConfig>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InputConfig {
    #[serde(default)]
    pub images: Vec<PathBuf>,
    /// Seeded dead-leaves images, used in addition to `images`.
    #[serde(default)]
    pub synthetic: Option<SyntheticInput>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticInput {
    pub count: usize,
    pub width: usize,
    pub height: usize,
    #[serde(default)]
    pub seed: u64,
}

/// Either explicit block factors or a rate `1 / b^2`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourceConfig {
    #[serde(default)]
    pub block: Option<[usize; 2]>,
    #[serde(default)]
    pub rate: Option<f64>,
}

impl SourceConfig {
    pub fn block(&self) -> Result<Block> {
        match (self.block, self.rate) {
            (Some(_), Some(_)) => Err(Error::config("source", "give either block or rate, not both")),
            (Some([b1, b2]), None) if b1 > 0 && b2 > 0 => Ok(Block { b1, b2 }),
            (Some(_), None) => Err(Error::config("source.block", "factors must be positive")),
            (None, Some(r)) => rate_to_block(r).map_err(|e| Error::config("source.rate", e.to_string())),
            (None, None) => Err(Error::config("source", "missing block or rate")),
        }
    }
}

/// Maps a rate of the form `1 / b^2` to square blocks, or suggests the
/// nearest representable rates.
pub fn rate_to_block(rate: f64) -> Result<Block> {
    if !(rate > 0.0 && rate <= 1.0) {
        return Err(Error::InvalidParameter(format!("rate {rate} outside (0, 1]")));
    }
    let b = (1.0 / rate.sqrt()).round().max(1.0) as usize;
    if ((b * b) as f64 * rate - 1.0).abs() <= 1e-9 {
        return Ok(Block::square(b));
    }
    let exact = 1.0 / rate.sqrt();
    let (lo, hi) = (exact.floor().max(1.0) as usize, exact.ceil() as usize);
    Err(Error::InvalidParameter(format!(
        "rate {rate} is not 1/b^2; nearest representable: {} (b={lo}), {} (b={hi}); or use --block b1xb2",
        1.0 / (lo * lo) as f64,
        1.0 / (hi * hi) as f64
    )))
}

/// Operating points: exactly one of the three lists.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OperatingPoints {
    /// Average per-stream snr `P / (K sigma^2)`, dB.
    #[serde(default)]
    pub snr_db: Vec<f64>,
    /// Eb/No, dB; `snr = Eb/No log2(M) R_c`.
    #[serde(default)]
    pub ebno_db: Vec<f64>,
    /// Total power budget, dB.
    #[serde(default)]
    pub power_db: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OperatingPoint {
    /// Average per-stream snr, dB.
    pub snr_db: f64,
    pub total_power: f64,
}

impl OperatingPoints {
    pub fn resolve(&self, link: &LinkSetup, k: usize) -> Result<Vec<OperatingPoint>> {
        let set = [
            !self.snr_db.is_empty(),
            !self.ebno_db.is_empty(),
            !self.power_db.is_empty(),
        ];
        if set.iter().filter(|&&b| b).count() != 1 {
            return Err(Error::config(
                "operating_points",
                "set exactly one of snr_db, ebno_db, power_db",
            ));
        }
        let all = self.snr_db.iter().chain(&self.ebno_db).chain(&self.power_db);
        if all.clone().any(|v| !v.is_finite()) {
            return Err(Error::config("operating_points", "values must be finite"));
        }
        let per_symbol = |snr_db: f64| OperatingPoint {
            snr_db,
            total_power: link.power_for_snr_db(snr_db, k),
        };
        Ok(if set[0] {
            self.snr_db.iter().map(|&s| per_symbol(s)).collect()
        } else if set[1] {
            let m = link.modulation()?;
            let factor = m.bits_per_symbol() as f64 * link.codec.code_rate();
            self.ebno_db
                .iter()
                .map(|&e| per_symbol(e + 10.0 * factor.log10()))
                .collect()
        } else {
            self.power_db
                .iter()
                .map(|&p| {
                    let total_power = 10f64.powf(p / 10.0);
                    OperatingPoint {
                        snr_db: 10.0 * (total_power / (k as f64 * link.noise_var)).log10(),
                        total_power,
                    }
                })
                .collect()
        })
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QoeConfig {
    /// Built-in synthetic model when absent.
    #[serde(default)]
    pub pristine_model: Option<PathBuf>,
    #[serde(default)]
    pub thresholds: QoEThresholds,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    #[serde(default = "one")]
    pub trials: usize,
    #[serde(default)]
    pub base_seed: u64,
    /// Worker threads; all CPUs when absent.
    #[serde(default)]
    pub threads: Option<usize>,
    #[serde(default = "default_out")]
    pub out_dir: PathBuf,
}

fn one() -> usize {
    1
}

fn default_out() -> PathBuf {
    PathBuf::from("out")
}

impl Default for RunSection {
    fn default() -> Self {
        Self {
            trials: 1,
            base_seed: 0,
            threads: None,
            out_dir: default_out(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoverageConfig {
    pub snr_db: Vec<f64>,
    /// Square block sizes; rate `1 / b^2`.
    pub blocks: Vec<usize>,
    #[serde(default)]
    pub criterion: PassCriterion,
    /// Defaults to `run.trials`.
    #[serde(default)]
    pub trials: Option<usize>,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| {
            let field = e
                .span()
                .map(|s| format!("byte {}..{}", s.start, s.end))
                .unwrap_or_else(|| "config".into());
            Error::config(field, e.message().to_string())
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)?;
        let mut cfg = Self::from_toml(&text).map_err(|e| match e {
            Error::Config { field, message } => Error::format(path, format!("{field}: {message}")),
            other => other,
        })?;
        cfg.resolve_paths(path.parent().unwrap_or(Path::new(".")));
        Ok(cfg)
    }

    /// Makes relative paths relative to the config file's directory.
    fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        self.input.images.iter_mut().for_each(fix);
        if let Some(p) = self.qoe.pristine_model.as_mut() {
            fix(p);
        }
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::config("config", e.to_string()))
    }

    /// Checks every field; errors name the offending field path.
    pub fn validate(&self) -> Result<()> {
        if self.input.images.is_empty() && self.input.synthetic.is_none() {
            return Err(Error::config("input", "no images and no synthetic input"));
        }
        for (i, p) in self.input.images.iter().enumerate() {
            if !p.is_file() {
                return Err(Error::config(
                    format!("input.images[{i}]"),
                    format!("{} does not exist", p.display()),
                ));
            }
        }
        if let Some(s) = &self.input.synthetic {
            if s.count == 0 || s.width == 0 || s.height == 0 {
                return Err(Error::config("input.synthetic", "count and size must be positive"));
            }
        }
        self.source.block()?;
        self.link.validate()?;
        self.operating_points.resolve(&self.link, 8)?;
        if let Some(p) = &self.qoe.pristine_model {
            if !p.is_file() {
                return Err(Error::config(
                    "qoe.pristine_model",
                    format!("{} does not exist", p.display()),
                ));
            }
        }
        let th = self.qoe.thresholds;
        if !(th.niqe > 0.0) || !(th.clip > 0.0) {
            return Err(Error::config("qoe.thresholds", "thresholds must be positive"));
        }
        if self.run.trials == 0 {
            return Err(Error::config("run.trials", "must be at least 1"));
        }
        if self.run.threads == Some(0) {
            return Err(Error::config("run.threads", "must be at least 1"));
        }
        if let Some(c) = &self.coverage {
            if c.snr_db.is_empty() {
                return Err(Error::config("coverage.snr_db", "must be nonempty"));
            }
            if c.blocks.is_empty() || c.blocks.contains(&0) {
                return Err(Error::config("coverage.blocks", "must be nonempty and positive"));
            }
            if c.trials == Some(0) {
                return Err(Error::config("coverage.trials", "must be at least 1"));
            }
        }
        Ok(())
    }

    pub fn load_images(&self) -> Result<Vec<Image>> {
        let mut images = self.input.images.iter().map(Image::load).collect::<Result<Vec<_>>>()?;
        if let Some(s) = &self.input.synthetic {
            images.extend(dead_leaves_corpus(s.count, s.width, s.height, s.seed)?);
        }
        Ok(images)
    }
}
