//! Built-in reconstructors at several compression rates. Set
//! `LIGHTCOM_RESTORE_ENDPOINT` to also try a running restoration service,
//! falling back to bicubic when it is unreachable.

use lightcom::reconstruction::{reconstruct, Interpolation, Reconstructor, RemoteRestorer};
use lightcom::remote::{ServiceClient, ServiceConfig, ENDPOINT_ENV};
use lightcom::source_codec::{block_mean_encode, PadMode};
use lightcom::synth::dead_leaves_corpus;
use lightcom::Image;

fn psnr(a: &Image, b: &Image) -> f64 {
    let mse = a
        .samples()
        .iter()
        .zip(b.samples())
        .map(|(&x, &y)| (x as f64 - y as f64).powi(2))
        .sum::<f64>()
        / a.samples().len() as f64;
    10.0 * (255.0f64.powi(2) / mse).log10()
}

fn main() -> lightcom::Result<()> {
    let img = &dead_leaves_corpus(1, 250, 250, 4)?[0];
    let mut kinds: Vec<Reconstructor> = [Interpolation::Nearest, Interpolation::Bilinear, Interpolation::Bicubic]
        .into_iter()
        .map(Reconstructor::from)
        .collect();
    if let Ok(endpoint) = std::env::var(ENDPOINT_ENV) {
        let client = ServiceClient::new(ServiceConfig::new(endpoint))?;
        kinds.push(Reconstructor::Remote(RemoteRestorer::new(
            client,
            None,
            Some(Interpolation::Bicubic),
        )));
    }
    let out = std::env::temp_dir().join("lightcom-reconstruct");
    std::fs::create_dir_all(&out)?;
    println!("{:>6} {:>8} {:>12}  psnr_db", "block", "rate", "kind");
    for b in [2, 3, 5] {
        // 250 is not a multiple of 3: edges are replicated and cropped back
        let rep = block_mean_encode(img, b, b, PadMode::Replicate)?;
        for rec in &kinds {
            let hat = reconstruct(&rep, rec)?;
            println!("{b:>6} {:>8.4} {:>12}  {:.2}", rep.rate(), rec.label(), psnr(img, &hat));
            hat.save(out.join(format!("b{b}_{}.png", rec.label().replace(['(', ')', '/', ':'], "_"))))?;
        }
    }
    img.save(out.join("original.png"))?;
    println!("images written to {}", out.display());
    Ok(())
}
