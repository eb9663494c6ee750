//! Finite-difference gradient check of every OLCE and MLP parameter.
//!
//! Run with `cargo run --example gradcheck`.

use std::time::Instant;

use olce::baselines::mlp::HIDDEN_WIDTHS;
use olce::nn::gradcheck::{DEFAULT_STEP, DEFAULT_TOLERANCE};
use olce::nn::{grad_check_resampling, DenseNet, DenseProbe};
use olce::olce::{OlceGeometry, OlceProbe};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> olce::Result<()> {
    let start = Instant::now();
    let (seed, report) = grad_check_resampling(
        |s| OlceProbe::random(OlceGeometry::default(), s, 1.0).expect("default geometry is valid"),
        7,
        20,
        1e-4,
        DEFAULT_STEP,
        DEFAULT_TOLERANCE,
    );
    println!("OLCE (seed {seed}): {} coordinates in {:.1?}", report.checked, start.elapsed());
    for g in &report.groups {
        println!("  {:<8} max rel err {:.3e}", g.name, g.max_relative_error);
    }
    println!("  overall {:.3e} -> {}", report.max_relative_error, if report.pass { "PASS" } else { "FAIL" });

    let start = Instant::now();
    let (seed, report) = grad_check_resampling(
        |s| {
            let mut rng = ChaCha8Rng::seed_from_u64(s);
            let mut widths = vec![1200];
            widths.extend(HIDDEN_WIDTHS);
            widths.push(7);
            let net = DenseNet::new(&widths, &mut rng).expect("valid widths");
            let x: Vec<f64> = (0..1200).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let mut t = vec![0.0; 7];
            t[rng.gen_range(0..7)] = 1.0;
            DenseProbe::new(net, x, t)
        },
        7,
        20,
        1e-4,
        DEFAULT_STEP,
        DEFAULT_TOLERANCE,
    );
    println!("MLP (seed {seed}): {} coordinates in {:.1?}", report.checked, start.elapsed());
    for g in &report.groups {
        println!("  {:<8} max rel err {:.3e}", g.name, g.max_relative_error);
    }
    println!("  overall {:.3e} -> {}", report.max_relative_error, if report.pass { "PASS" } else { "FAIL" });
    Ok(())
}
