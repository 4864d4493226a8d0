//! A reproducible run driven by a TOML config: trial CSV, summary, BER plot
//! data and a checksummed manifest. Pass a config path to use your own.

use lightcom::harness::{run_end_to_end, RunConfig};

fn main() -> lightcom::Result<()> {
    let path = std::env::args()
        .nth(1)
        .unwrap_or_else(|| concat!(env!("CARGO_MANIFEST_DIR"), "/examples/configs/hamming_wf.toml").into());
    let cfg = RunConfig::load(&path)?;
    let out = std::env::temp_dir().join("lightcom-end-to-end");
    let res = run_end_to_end(&cfg, &out)?;
    print!("{}", std::fs::read_to_string(out.join("summary.txt"))?);
    println!("\n{} records; artifacts:", res.records.len());
    for p in &res.artifacts {
        println!("  {}", p.display());
    }
    print!("{}", std::fs::read_to_string(out.join("manifest.json"))?);
    Ok(())
}
