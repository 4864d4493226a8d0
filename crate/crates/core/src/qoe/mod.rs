//! Hybrid quality-of-experience vector `[d_niqe, d_clip]` and threshold
//! checks.

pub mod embedding;
pub mod niqe;

pub use embedding::{
    cosine_distance, semantic_distance, BuiltinHistogram, EmbeddingConfig, EmbeddingProvider, RemoteEmbedding,
};
pub use niqe::{fit_pristine_model, niqe_score, NiqeScore, PristineModel};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::Image;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QoEThresholds {
    pub niqe: f64,
    pub clip: f64,
}

impl Default for QoEThresholds {
    fn default() -> Self {
        Self { niqe: 5.0, clip: 0.1 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QoEScore {
    /// In `[0, 100]`.
    pub d_niqe: f64,
    /// In `[0, 2]`.
    pub d_clip: f64,
    /// `d_niqe` hit the upper clamp.
    pub niqe_clamped: bool,
}

impl QoEScore {
    pub fn meets(&self, th: &QoEThresholds) -> bool {
        self.d_niqe <= th.niqe && self.d_clip <= th.clip
    }
}

/// Scores a reconstruction: naturalness of `reconstructed` and its
/// semantic distance to `original`.
pub fn qoe_evaluate(
    original: &Image,
    reconstructed: &Image,
    model: &PristineModel,
    provider: &dyn EmbeddingProvider,
) -> Result<QoEScore> {
    if (original.width(), original.height(), original.channels())
        != (reconstructed.width(), reconstructed.height(), reconstructed.channels())
    {
        return Err(Error::DimensionMismatch(format!(
            "{}x{}x{} vs {}x{}x{}",
            original.width(),
            original.height(),
            original.channels(),
            reconstructed.width(),
            reconstructed.height(),
            reconstructed.channels()
        )));
    }
    let n = niqe_score(reconstructed, model)?;
    Ok(QoEScore {
        d_niqe: n.value,
        d_clip: semantic_distance(original, reconstructed, provider)?,
        niqe_clamped: n.clamped,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::dead_leaves_corpus;
    use proptest::prelude::*;

    #[test]
    fn identical_images_have_zero_semantic_distance() {
        let corpus = dead_leaves_corpus(5, 192, 192, 2).unwrap();
        let model = fit_pristine_model(&corpus, "t").unwrap();
        let s = qoe_evaluate(&corpus[0], &corpus[0], &model, &BuiltinHistogram).unwrap();
        assert_eq!(s.d_clip, 0.0);
        assert!((0.0..=100.0).contains(&s.d_niqe));
        let small = Image::filled(192, 96, 1, 0).unwrap();
        assert!(matches!(
            qoe_evaluate(&corpus[0], &small, &model, &BuiltinHistogram),
            Err(Error::DimensionMismatch(_))
        ));
    }

    #[test]
    fn default_thresholds() {
        assert_eq!(QoEThresholds::default(), QoEThresholds { niqe: 5.0, clip: 0.1 });
    }

    proptest! {
        #[test]
        fn pass_is_monotone_in_thresholds(
            n in 0.0f64..100.0, c in 0.0f64..2.0, tn in 0.0f64..100.0, tc in 0.0f64..2.0,
            dn in 0.0f64..50.0, dc in 0.0f64..1.0
        ) {
            let s = QoEScore { d_niqe: n, d_clip: c, niqe_clamped: false };
            let lo = QoEThresholds { niqe: tn, clip: tc };
            let hi = QoEThresholds { niqe: tn + dn, clip: tc + dc };
            prop_assert!(!s.meets(&lo) || s.meets(&hi));
        }
    }
}
