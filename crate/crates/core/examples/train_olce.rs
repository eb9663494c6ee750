//! Trains the encoder-decoder on one split and reports test metrics.
//!
//! `cargo run --release --example train_olce -- [preset] [epochs]`

use olce::cli::evaluate_split;
use olce::olce::{class_template_distances, OlceClassifier, TrainConfig};
use olce::signalio::stratified_split;
use olce::synthgen::{generate, SynthConfig};

fn main() -> olce::Result<()> {
    let mut args = std::env::args().skip(1);
    let preset = args.next().unwrap_or_else(|| "desk".into());
    let epochs = args.next().and_then(|e| e.parse().ok()).unwrap_or(200);

    let ds = generate(&SynthConfig::preset(&preset)?)?.normalized();
    let data = stratified_split(&ds, 0.25, 0)?;
    let mut model = OlceClassifier::new(TrainConfig {
        epochs,
        ..TrainConfig::default()
    });
    olce::baselines::Classifier::fit(&mut model, &data)?;

    for e in model.log.epochs.iter().filter(|e| e.epoch % 20 == 0 || e.epoch == epochs) {
        println!("epoch {:>4}  ce {:.4}  mse {:.5}", e.epoch, e.ce, e.mse);
    }
    let report = evaluate_split(&model, &data)?;
    println!("test accuracy {:.4}, kappa {:.4}", report.accuracy, report.kappa);

    let params = model.params.as_ref().expect("fitted");
    for (c, row) in class_template_distances(params, &data)?.iter().enumerate() {
        let cells: Vec<String> = row.iter().map(|d| format!("{d:.4}")).collect();
        println!("decode(e{c}) vs class means: {}", cells.join(" "));
    }
    Ok(())
}
