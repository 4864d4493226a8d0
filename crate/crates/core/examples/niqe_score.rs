//! NIQE naturalness and semantic distance of progressively degraded images,
//! scored against the built-in pristine model.

use lightcom::qoe::niqe::default_pristine_model;
use lightcom::qoe::{qoe_evaluate, BuiltinHistogram, QoEThresholds};
use lightcom::reconstruction::{reconstruct, Interpolation};
use lightcom::source_codec::{block_mean_encode, PadMode};
use lightcom::synth::dead_leaves_corpus;

fn main() -> lightcom::Result<()> {
    let model = default_pristine_model();
    let th = QoEThresholds::default();
    let img = &dead_leaves_corpus(1, 288, 288, 42)?[0];
    println!("model fitted on {}", model.corpus_id);
    println!("{:<22} {:>8} {:>8}  meets", "variant", "d_niqe", "d_clip");
    let mut variants = vec![("original".to_string(), img.clone())];
    for k in [3, 5, 9] {
        variants.push((format!("box blur {k}x{k}"), img.box_blur(k)));
    }
    for b in [2, 4, 8] {
        let rep = block_mean_encode(img, b, b, PadMode::Reject)?;
        variants.push((
            format!("bilinear from 1/{}", b * b),
            reconstruct(&rep, &Interpolation::Bilinear.into())?,
        ));
    }
    for (name, v) in &variants {
        let q = qoe_evaluate(img, v, model, &BuiltinHistogram)?;
        println!("{name:<22} {:>8.3} {:>8.4}  {}", q.d_niqe, q.d_clip, q.meets(&th));
    }
    Ok(())
}
