//! Generates a synthetic preset and writes it as per-sample CSV files.
//!
//! `cargo run --release --example generate_dataset -- [preset] [out_dir]`

use std::path::PathBuf;

use olce::signalio::{load_manifest, save_dataset};
use olce::synthgen::{generate, SynthConfig};

fn main() -> olce::Result<()> {
    let mut args = std::env::args().skip(1);
    let preset = args.next().unwrap_or_else(|| "desk".into());
    let out = PathBuf::from(args.next().unwrap_or_else(|| "out/generated".into()));

    let cfg = SynthConfig::preset(&preset)?;
    let ds = generate(&cfg)?;
    let manifest = save_dataset(&ds, &out)?;
    let (channels, length) = ds.sample_dims();
    println!(
        "{preset}: {} samples of {channels}x{length}, class counts {:?}",
        ds.len(),
        ds.class_counts()
    );

    let back = load_manifest(&manifest)?;
    println!("manifest {} reloads {} samples", manifest.display(), back.len());
    Ok(())
}
