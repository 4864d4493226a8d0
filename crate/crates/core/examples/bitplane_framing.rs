//! Block-mean source coding and importance-ordered bit-plane framing.
//!
//! A single flipped bit costs `4^(k-1)` in squared error on plane `k`, so the
//! most significant plane is 16384 times as important as the least.

use lightcom::link_models::imse;
use lightcom::source_codec::{block_mean_encode, merge_bitplanes, split_bitplanes, BitPlaneFrame, PadMode};
use lightcom::synth::dead_leaves_corpus;

fn main() -> lightcom::Result<()> {
    let img = &dead_leaves_corpus(1, 256, 192, 1)?[0];
    let rep = block_mean_encode(img, 4, 4, PadMode::Reject)?;
    println!(
        "{}x{} source -> {}x{} representation (rate {})",
        img.width(),
        img.height(),
        rep.width(),
        rep.height(),
        rep.rate()
    );

    let frame = split_bitplanes(&rep);
    println!("{} planes of {} bits", frame.depth(), frame.plane_len());
    println!("plane  weight  ones");
    for (k, (plane, w)) in frame.planes().iter().zip(frame.weights()).enumerate() {
        let ones = plane.iter().filter(|&&b| b == 1).count();
        println!("{:>5}  {:>6}  {ones}", k + 1, w);
    }

    for k in [0, frame.depth() - 1] {
        let mut planes = frame.planes().to_vec();
        planes[k][0] ^= 1;
        let hit = BitPlaneFrame::new(*frame.layout(), planes)?;
        println!(
            "one error on plane {}: IMSE {:.3e}, first sample {} -> {}",
            k + 1,
            imse(&hit, &frame)?,
            rep.samples()[0],
            merge_bitplanes(&hit)?.samples()[0]
        );
    }

    assert_eq!(merge_bitplanes(&frame)?, rep);
    println!("split/merge round trip is lossless");
    Ok(())
}
