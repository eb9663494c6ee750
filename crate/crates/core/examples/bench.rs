//! Repeated-split comparison of every model on a synthetic preset, with
//! wall-clock time per fit.
//!
//! `cargo run --release --example bench -- [preset] [runs]`

use std::time::Instant;

use olce::cli::{bench_comparison, run_bench, Settings};

fn main() -> olce::Result<()> {
    let mut args = std::env::args().skip(1);
    let settings = Settings {
        preset: Some(args.next().unwrap_or_else(|| "desk".into())),
        runs: args.next().map_or(3, |r| r.parse().expect("runs must be an integer")),
        ..Settings::default()
    };
    settings.validate()?;
    let data = settings.load_data()?;
    let mut last = Instant::now();
    let results = run_bench(&settings, &data, |model, r, rec| {
        let acc = rec.report.as_ref().map_or("failed".to_string(), |e| format!("{:.4}", e.accuracy));
        println!("run {:>2} {:<8} {acc:>8}  {:.1?}", r + 1, model.name(), last.elapsed());
        last = Instant::now();
    })?;
    print!("{}", bench_comparison(&results));
    Ok(())
}
