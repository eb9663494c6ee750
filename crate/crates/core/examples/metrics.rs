//! Confusion-matrix metrics and the per-run summary table.

use olce::metrics::{aggregate, confusion, evaluate, ConfusionMatrix};

fn main() -> olce::Result<()> {
    let truth = [0, 0, 0, 1, 1, 1, 2, 2, 2, 2];
    let pred = [0, 0, 1, 1, 1, 1, 2, 2, 0, 2];
    let cm = confusion(&truth, &pred, 3)?;
    println!("confusion matrix {:?}", cm.counts);
    let r = evaluate(&cm)?;
    println!(
        "accuracy {:.4} precision {:.4} recall {:.4} f1 {:.4} kappa {:.4} hamming {:.4}",
        r.accuracy, r.precision_macro, r.recall_macro, r.f1_macro, r.kappa, r.hamming_loss
    );

    // a class that is never predicted contributes zero precision
    let sparse = ConfusionMatrix::from_counts(vec![vec![3, 0], vec![2, 0]])?;
    let r2 = evaluate(&sparse)?;
    println!("warnings: {:?}", r2.warnings);

    println!("\n{}", aggregate(&[r.clone(), r2, r])?.to_text());
    Ok(())
}
