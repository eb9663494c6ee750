//! Trains briefly, then writes original and reconstructed test responses.
//!
//! `cargo run --release --example export_decoded -- [out_dir] [epochs]`

use std::path::PathBuf;

use olce::olce::{export_decoded, train, TrainConfig};
use olce::signalio::{load_sample, stratified_split};
use olce::synthgen::{generate, SynthConfig};

fn main() -> olce::Result<()> {
    let mut args = std::env::args().skip(1);
    let out = PathBuf::from(args.next().unwrap_or_else(|| "out/decoded".into()));
    let epochs = args.next().and_then(|e| e.parse().ok()).unwrap_or(50);

    let data = stratified_split(&generate(&SynthConfig::preset("desk")?)?.normalized(), 0.25, 0)?;
    let (params, log) = train(&data, &TrainConfig { epochs, ..TrainConfig::default() })?;
    if let (Some(a), Some(b)) = (log.first(), log.last()) {
        println!("reconstruction mse {:.5} -> {:.5}", a.mse, b.mse);
    }
    let written = export_decoded(&params, &data, data.test_indices()?, &out)?;
    let first = load_sample(&written[0], 0)?;
    println!(
        "wrote {} files to {}; first is {}x{}",
        written.len(),
        out.display(),
        first.channels(),
        first.length()
    );
    Ok(())
}
