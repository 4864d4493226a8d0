//! Receiver-side reconstruction of a full-size image from a (possibly
//! corrupted) block-mean representation.
//!
//! Built-in kinds place each representation sample at its block centre,
//! `(i + 0.5) b - 0.5` in output coordinates, and clamp at the edges. The
//! remote kind hands the representation to an external restoration service.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::{round_clamp, Image};
use crate::remote::{ServiceClient, ServiceConfig};
use crate::source_codec::CompressedRep;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Interpolation {
    Nearest,
    Bilinear,
    /// Keys cubic convolution, `a = -0.5`.
    Bicubic,
}

impl std::str::FromStr for Interpolation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "nearest" => Ok(Self::Nearest),
            "bilinear" => Ok(Self::Bilinear),
            "bicubic" => Ok(Self::Bicubic),
            _ => Err(Error::InvalidParameter(format!("unknown interpolation {s:?}"))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct RemoteRestorer {
    client: ServiceClient,
    prompt: Option<String>,
    fallback: Option<Interpolation>,
}

impl RemoteRestorer {
    pub fn new(client: ServiceClient, prompt: Option<String>, fallback: Option<Interpolation>) -> Self {
        Self {
            client,
            prompt,
            fallback,
        }
    }

    pub fn client(&self) -> &ServiceClient {
        &self.client
    }
}

#[derive(Debug, Clone)]
pub enum Reconstructor {
    Builtin(Interpolation),
    Remote(RemoteRestorer),
}

impl Reconstructor {
    pub fn label(&self) -> String {
        match self {
            Reconstructor::Builtin(i) => format!("{i:?}").to_lowercase(),
            Reconstructor::Remote(r) => format!("remote({})", r.client.config().endpoint),
        }
    }
}

impl From<Interpolation> for Reconstructor {
    fn from(i: Interpolation) -> Self {
        Reconstructor::Builtin(i)
    }
}

/// Serializable reconstructor description.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
#[derive(Default)]
pub enum ReconstructorConfig {
    Nearest,
    #[default]
    Bilinear,
    Bicubic,
    Remote {
        #[serde(flatten)]
        service: ServiceConfig,
        #[serde(default)]
        prompt: Option<String>,
        /// Built-in kind used when the service fails. Off unless set.
        #[serde(default)]
        fallback: Option<Interpolation>,
    },
}

impl ReconstructorConfig {
    /// Builds the reconstructor; remote endpoints honour the environment
    /// override.
    pub fn build(&self) -> Result<Reconstructor> {
        Ok(match self {
            Self::Nearest => Interpolation::Nearest.into(),
            Self::Bilinear => Interpolation::Bilinear.into(),
            Self::Bicubic => Interpolation::Bicubic.into(),
            Self::Remote {
                service,
                prompt,
                fallback,
            } => Reconstructor::Remote(RemoteRestorer::new(
                ServiceClient::new(service.clone().with_env_override())?,
                prompt.clone(),
                *fallback,
            )),
        })
    }
}

/// Upscales `rep` by its block factors and crops to the original size.
pub fn reconstruct(rep: &CompressedRep, rec: &Reconstructor) -> Result<Image> {
    match rec {
        Reconstructor::Builtin(kind) => Ok(interpolate(rep, *kind)),
        Reconstructor::Remote(remote) => match reconstruct_remote(rep, remote) {
            Ok(img) => Ok(img),
            Err(e @ (Error::ServiceUnavailable(_) | Error::Timeout(_) | Error::BadResponse(_))) => {
                match remote.fallback {
                    Some(kind) => {
                        log::warn!("restoration service failed ({e}); falling back to {kind:?}");
                        Ok(interpolate(rep, kind))
                    }
                    None => Err(e),
                }
            }
            Err(e) => Err(e),
        },
    }
}

fn reconstruct_remote(rep: &CompressedRep, remote: &RemoteRestorer) -> Result<Image> {
    let l = rep.layout();
    let restored = remote
        .client
        .restore(&rep.as_image(), (l.block_w, l.block_h), remote.prompt.as_deref())?;
    if restored.image.channels() != l.channels {
        return Err(Error::BadResponse(format!(
            "expected {} channels, service returned {}",
            l.channels,
            restored.image.channels()
        )));
    }
    let full = restored.image.with_bit_depth(l.bit_depth)?;
    crop(&full, l.orig_width, l.orig_height)
}

fn crop(img: &Image, w: usize, h: usize) -> Result<Image> {
    if img.width() == w && img.height() == h {
        return Ok(img.clone());
    }
    let ch = img.channels();
    let mut samples = Vec::with_capacity(w * h * ch);
    for y in 0..h {
        let start = y * img.width() * ch;
        samples.extend_from_slice(&img.samples()[start..start + w * ch]);
    }
    Image::new(w, h, ch, img.bit_depth(), samples)
}

/// Built-in reconstruction; infallible for a well-formed representation.
pub fn interpolate(rep: &CompressedRep, kind: Interpolation) -> Image {
    let l = rep.layout();
    let (rw, rh, ch) = (l.width, l.height, l.channels);
    let (ow, oh) = (l.orig_width, l.orig_height);
    let max = l.max_value();
    let src = rep.samples();
    let at = |x: isize, y: isize, c: usize| -> f64 {
        let x = x.clamp(0, rw as isize - 1) as usize;
        let y = y.clamp(0, rh as isize - 1) as usize;
        src[(y * rw + x) * ch + c] as f64
    };
    // Per-axis taps: (first source index, weights).
    let taps = |n_out: usize, b: usize| -> Vec<(isize, [f64; 4])> {
        (0..n_out)
            .map(|o| {
                let u = (o as f64 + 0.5) / b as f64 - 0.5;
                match kind {
                    Interpolation::Nearest => ((o / b) as isize, [1.0, 0.0, 0.0, 0.0]),
                    Interpolation::Bilinear => {
                        let i = u.floor();
                        let t = u - i;
                        (i as isize, [1.0 - t, t, 0.0, 0.0])
                    }
                    Interpolation::Bicubic => {
                        let i = u.floor();
                        let t = u - i;
                        (i as isize - 1, [keys(1.0 + t), keys(t), keys(1.0 - t), keys(2.0 - t)])
                    }
                }
            })
            .collect()
    };
    let n_taps = match kind {
        Interpolation::Nearest => 1,
        Interpolation::Bilinear => 2,
        Interpolation::Bicubic => 4,
    };
    let xt = taps(ow, l.block_w);
    let yt = taps(oh, l.block_h);
    let mut out = Vec::with_capacity(ow * oh * ch);
    for (y0, wy) in &yt {
        for (x0, wx) in &xt {
            for c in 0..ch {
                let mut acc = 0.0;
                for (j, wyj) in wy.iter().take(n_taps).enumerate() {
                    let mut row = 0.0;
                    for (i, wxi) in wx.iter().take(n_taps).enumerate() {
                        row += wxi * at(x0 + i as isize, y0 + j as isize, c);
                    }
                    acc += wyj * row;
                }
                out.push(round_clamp(acc, max));
            }
        }
    }
    Image::new(ow, oh, ch, l.bit_depth, out).expect("dimensions follow from the layout")
}

fn keys(d: f64) -> f64 {
    const A: f64 = -0.5;
    let d = d.abs();
    if d <= 1.0 {
        ((A + 2.0) * d - (A + 3.0)) * d * d + 1.0
    } else if d < 2.0 {
        ((A * d - 5.0 * A) * d + 8.0 * A) * d - 4.0 * A
    } else {
        0.0
    }
}
