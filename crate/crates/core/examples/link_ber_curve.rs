//! Monte-Carlo BER of the weak channel codes over AWGN next to the analytic
//! uncoded curve.

use lightcom::link_models::{simulate_ber, UncodedBerModel};
use lightcom::phy::{db_to_linear, CodecSpec, Modulation};

fn main() -> lightcom::Result<()> {
    let codecs = [
        CodecSpec::Uncoded,
        CodecSpec::Repetition { n: 3 },
        CodecSpec::Hamming74,
        CodecSpec::standard_convolutional(),
    ];
    let bits = 400_000;
    for order in [4, 16] {
        let m = Modulation::new(order)?;
        let analytic = UncodedBerModel::new(order);
        println!("\n{order}-QAM, {bits} bits per point, snr per channel symbol");
        print!("{:>8} {:>10}", "snr_db", "analytic");
        for c in &codecs {
            print!(" {:>14}", c.label());
        }
        println!();
        for snr_db in (-2..=14).step_by(2) {
            let snr = db_to_linear(snr_db as f64);
            print!("{snr_db:>8} {:>10.3e}", analytic.ber(snr)?);
            for (i, c) in codecs.iter().enumerate() {
                let ber = simulate_ber(c, &m, snr, bits, i as u64)?.ber();
                print!(" {ber:>14.3e}");
            }
            println!();
        }
    }
    Ok(())
}
