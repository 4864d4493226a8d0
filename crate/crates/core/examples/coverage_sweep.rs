//! Perceived coverage over an (snr, rate) grid using the full chain with the
//! bilinear reconstructor and the built-in embedding.

use lightcom::chain::{ChainEvaluator, LinkSetup, Scoring};
use lightcom::coverage::{sweep_coverage, Block, CoverageGrid, PassCriterion};
use lightcom::phy::CodecSpec;
use lightcom::qoe::niqe::default_pristine_model;
use lightcom::qoe::{BuiltinHistogram, QoEThresholds};
use lightcom::reconstruction::{Interpolation, Reconstructor};
use lightcom::synth::dead_leaves_corpus;

fn main() -> lightcom::Result<()> {
    let images = dead_leaves_corpus(3, 192, 192, 10)?;
    let link = LinkSetup {
        codec: CodecSpec::Hamming74,
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
            thresholds: QoEThresholds { niqe: 40.0, clip: 0.1 },
        },
    };
    let grid = CoverageGrid::new(
        (-2..=6).map(|v| 2.0 * v as f64).collect(),
        [1, 2, 3, 4, 6].into_iter().map(Block::square).collect(),
    )?;
    let criteria = [
        PassCriterion::Qoe(QoEThresholds { niqe: 40.0, clip: 0.1 }),
        PassCriterion::PredictedImse { max_db: -20.0 },
    ];
    let stdout = &mut std::io::stdout().lock();
    for criterion in criteria {
        println!("\n== {criterion:?}");
        let map = sweep_coverage(&grid, &eval, criterion, 3, 1)?;
        map.write_summary(&mut *stdout)?;
        println!("pass matrix (first row: rates; then one row per snr)");
        map.write_matrix(&mut *stdout, |c| c.pass as u8 as f64)?;
    }
    Ok(())
}
