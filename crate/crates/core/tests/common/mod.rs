//! Helpers shared by integration test targets.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Metrics computed from the expanded list of (true, predicted) pairs.
pub fn brute_force(pairs: &[(usize, usize)], k: usize) -> [f64; 6] {
    let n = pairs.len() as f64;
    let correct = pairs.iter().filter(|(t, p)| t == p).count() as f64;
    let (mut ps, mut rs, mut fs) = (0.0, 0.0, 0.0);
    for c in 0..k {
        let tp = pairs.iter().filter(|&&(t, p)| t == c && p == c).count() as f64;
        let fp = pairs.iter().filter(|&&(t, p)| t != c && p == c).count() as f64;
        let fn_ = pairs.iter().filter(|&&(t, p)| t == c && p != c).count() as f64;
        let prec = if tp + fp > 0.0 { tp / (tp + fp) } else { 0.0 };
        let rec = if tp + fn_ > 0.0 { tp / (tp + fn_) } else { 0.0 };
        ps += prec;
        rs += rec;
        fs += if prec + rec > 0.0 { 2.0 * prec * rec / (prec + rec) } else { 0.0 };
    }
    let po = correct / n;
    let pe: f64 = (0..k)
        .map(|c| {
            let a = pairs.iter().filter(|p| p.0 == c).count() as f64;
            let b = pairs.iter().filter(|p| p.1 == c).count() as f64;
            a * b
        })
        .sum::<f64>()
        / (n * n);
    let kappa = if pe == 1.0 { 1.0 } else { (po - pe) / (1.0 - pe) };
    [po, ps / k as f64, rs / k as f64, fs / k as f64, kappa, 1.0 - po]
}

pub fn random_pairs(rng: &mut ChaCha8Rng, k: usize) -> Vec<(usize, usize)> {
    let n = rng.gen_range(1..200);
    // bias towards the diagonal so kappa spans a useful range
    (0..n)
        .map(|_| {
            let t = rng.gen_range(0..k);
            let p = if rng.gen_bool(0.6) { t } else { rng.gen_range(0..k) };
            (t, p)
        })
        .collect()
}
