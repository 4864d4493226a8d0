//! Fit the exponential model `ber = alpha exp(beta snr)` to a simulated
//! Hamming(7,4) + QPSK link and compare it with the built-in constants.

use lightcom::chain::HAMMING74_QPSK;
use lightcom::link_models::fit_simulated_ber;
use lightcom::phy::{CodecSpec, Modulation};

fn main() -> lightcom::Result<()> {
    let snrs: Vec<f64> = (4..=16).map(|v| v as f64 / 2.0).collect();
    let (points, fit) = fit_simulated_ber(&CodecSpec::Hamming74, &Modulation::new(4)?, &snrs, 1_000_000, 3)?;
    println!(
        "alpha = {:.4}, beta = {:.4} (built-in: {}, {})",
        fit.model.alpha, fit.model.beta, HAMMING74_QPSK.alpha, HAMMING74_QPSK.beta
    );
    println!(
        "max relative error {:.1}% over {} points",
        100.0 * fit.max_rel_err,
        fit.samples_used
    );
    println!("{:>6} {:>10} {:>10} {:>8}", "snr", "measured", "model", "errors");
    for m in &points {
        println!(
            "{:>6.1} {:>10.3e} {:>10.3e} {:>8}",
            m.snr,
            m.ber(),
            fit.model.ber(m.snr),
            m.errors
        );
    }
    Ok(())
}
