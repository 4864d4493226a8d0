//! Image embeddings for semantic distance.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::Image;
use crate::remote::{ServiceClient, ServiceConfig};

pub const BUILTIN_DIM: usize = 128;
const HALF: usize = BUILTIN_DIM / 2;

pub trait EmbeddingProvider: Send + Sync {
    /// Identity string recorded in run outputs.
    fn id(&self) -> String;

    /// Declared dimension, if fixed.
    fn dimension(&self) -> Option<usize>;

    fn embed(&self, img: &Image) -> Result<Vec<f64>>;
}

/// Deterministic offline embedding: a 64-bin luminance histogram followed by
/// a 64-bin gradient-magnitude-weighted orientation histogram. Each half is
/// L2-normalized, then the whole vector. A rough proxy for content change,
/// not a learned semantic embedding.
#[derive(Debug, Clone, Copy, Default)]
pub struct BuiltinHistogram;

impl EmbeddingProvider for BuiltinHistogram {
    fn id(&self) -> String {
        "builtin_histogram".into()
    }

    fn dimension(&self) -> Option<usize> {
        Some(BUILTIN_DIM)
    }

    fn embed(&self, img: &Image) -> Result<Vec<f64>> {
        let (w, h) = (img.width(), img.height());
        let lum = img.luminance();
        let mut v = vec![0.0; BUILTIN_DIM];
        for &l in &lum {
            let bin = ((l / 256.0 * HALF as f64) as usize).min(HALF - 1);
            v[bin] += 1.0;
        }
        let px = |x: isize, y: isize| {
            let x = x.clamp(0, w as isize - 1) as usize;
            let y = y.clamp(0, h as isize - 1) as usize;
            lum[y * w + x]
        };
        for y in 0..h as isize {
            for x in 0..w as isize {
                let gx = (px(x + 1, y - 1) + 2.0 * px(x + 1, y) + px(x + 1, y + 1))
                    - (px(x - 1, y - 1) + 2.0 * px(x - 1, y) + px(x - 1, y + 1));
                let gy = (px(x - 1, y + 1) + 2.0 * px(x, y + 1) + px(x + 1, y + 1))
                    - (px(x - 1, y - 1) + 2.0 * px(x, y - 1) + px(x + 1, y - 1));
                let mag = gx.hypot(gy);
                if mag == 0.0 {
                    continue;
                }
                let theta = gy.atan2(gx).rem_euclid(std::f64::consts::TAU);
                let bin = ((theta / std::f64::consts::TAU * HALF as f64) as usize).min(HALF - 1);
                v[HALF + bin] += mag;
            }
        }
        for half in v.chunks_mut(HALF) {
            normalize(half);
        }
        normalize(&mut v);
        Ok(v)
    }
}

fn normalize(v: &mut [f64]) {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if n > 0.0 {
        v.iter_mut().for_each(|x| *x /= n);
    }
}

/// Embedding service client; transport failures become `ProviderUnavailable`.
#[derive(Debug, Clone)]
pub struct RemoteEmbedding {
    client: ServiceClient,
}

impl RemoteEmbedding {
    pub fn new(client: ServiceClient) -> Self {
        Self { client }
    }
}

impl EmbeddingProvider for RemoteEmbedding {
    fn id(&self) -> String {
        format!("remote({})", self.client.config().endpoint)
    }

    fn dimension(&self) -> Option<usize> {
        None
    }

    fn embed(&self, img: &Image) -> Result<Vec<f64>> {
        self.client.embed(img).map(|e| e.embedding).map_err(|e| match e {
            Error::ServiceUnavailable(m) | Error::Timeout(m) => Error::ProviderUnavailable(m),
            other => other,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EmbeddingConfig {
    #[default]
    BuiltinHistogram,
    Remote {
        #[serde(flatten)]
        service: ServiceConfig,
    },
}

impl EmbeddingConfig {
    pub fn build(&self) -> Result<Box<dyn EmbeddingProvider>> {
        Ok(match self {
            Self::BuiltinHistogram => Box::new(BuiltinHistogram),
            Self::Remote { service } => Box::new(RemoteEmbedding::new(ServiceClient::new(service.clone())?)),
        })
    }
}

/// `1 - cos(u, v)`, clamped to `[0, 2]`.
pub fn cosine_distance(u: &[f64], v: &[f64]) -> Result<f64> {
    if u.len() != v.len() {
        return Err(Error::LengthMismatch {
            expected: u.len(),
            actual: v.len(),
        });
    }
    let su = u.iter().map(|x| x * x).sum::<f64>();
    let sv = v.iter().map(|x| x * x).sum::<f64>();
    if su == 0.0 || sv == 0.0 {
        return Err(Error::ZeroNormEmbedding);
    }
    let dot: f64 = u.iter().zip(v).map(|(a, b)| a * b).sum();
    // sqrt(s * s) == s exactly, so identical inputs give exactly 0
    Ok((1.0 - dot / (su * sv).sqrt()).clamp(0.0, 2.0))
}

pub fn semantic_distance(a: &Image, b: &Image, provider: &dyn EmbeddingProvider) -> Result<f64> {
    let (ea, eb) = (provider.embed(a)?, provider.embed(b)?);
    if let Some(d) = provider.dimension() {
        if ea.len() != d || eb.len() != d {
            return Err(Error::LengthMismatch {
                expected: d,
                actual: if ea.len() != d { ea.len() } else { eb.len() },
            });
        }
    }
    cosine_distance(&ea, &eb)
}
