//! Fits every comparison model on one split and prints test accuracy.
//!
//! `cargo run --release --example baselines -- [preset]`

use std::time::Instant;

use olce::cli::{evaluate_split, ModelKind, Settings};

fn main() -> olce::Result<()> {
    let preset = std::env::args().nth(1).unwrap_or_else(|| "desk".into());
    let settings = Settings {
        preset: Some(preset),
        ..Settings::default()
    };
    let data = olce::signalio::stratified_split(&settings.load_data()?, settings.test_fraction, 0)?;
    for kind in ModelKind::ALL {
        let start = Instant::now();
        let mut model = kind.build(&settings, 0);
        model.fit(&data)?;
        let r = evaluate_split(model.as_ref(), &data)?;
        println!(
            "{:<8} acc {:.4}  f1 {:.4}  kappa {:.4}  ({:.1?})",
            kind.name(),
            r.accuracy,
            r.f1_macro,
            r.kappa,
            start.elapsed()
        );
    }
    Ok(())
}
