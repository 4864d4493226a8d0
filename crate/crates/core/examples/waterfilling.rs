//! Importance-aware waterfilling across the eight bit planes, for both the
//! coded closed form and the relaxed uncoded solution, against equal power.

use lightcom::chain::HAMMING74_QPSK;
use lightcom::power_alloc::{allocate, oracle_grid_search, AllocationProblem, Allocator, BerMode};

fn main() -> lightcom::Result<()> {
    let modes = [
        (
            "coded (Hamming(7,4) fit)",
            BerMode::Coded {
                alpha: HAMMING74_QPSK.alpha,
                beta: HAMMING74_QPSK.beta,
            },
        ),
        ("uncoded QPSK", BerMode::Uncoded { order: 4 }),
    ];
    for (name, mode) in modes {
        println!("\n== {name}");
        for snr_db in [0.0, 5.0, 10.0] {
            let total = 8.0 * 10f64.powf(snr_db / 10.0);
            let problem = AllocationProblem::bit_planes(8, 1.0, total, mode);
            let ep = allocate(&problem, Allocator::Ep)?;
            let wf = allocate(&problem, Allocator::Wf)?;
            println!(
                "snr {snr_db:>4} dB: IMSE  EP {:.4e}  WF {:.4e}  ({:+.2} dB)",
                ep.imse,
                wf.imse,
                10.0 * (wf.imse / ep.imse).log10()
            );
            let powers: Vec<String> = wf.powers.iter().map(|p| format!("{p:.2}")).collect();
            println!("    WF powers LSB..MSB: [{}]", powers.join(", "));
        }
    }

    // a three-plane problem small enough for the brute-force oracle
    let small = AllocationProblem::bit_planes(3, 1.0, 6.0, BerMode::Uncoded { order: 4 });
    let wf = allocate(&small, Allocator::Wf)?;
    let grid = oracle_grid_search(&small, 0.01)?;
    println!(
        "\nK=3 uncoded: relaxed WF {:.4e}, grid optimum {:.4e}",
        wf.imse, grid.imse
    );
    wf.write_csv(&small, std::io::stdout().lock())?;
    Ok(())
}
