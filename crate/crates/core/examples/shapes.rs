//! Prints the layer-by-layer tensor shapes of the encoder-decoder.

use olce::nn::Tensor3;
use olce::olce::{OlceGeometry, OlceParams};

const STAGES: [&str; 11] = [
    "input", "c1", "p1", "c2", "p2", "c3 (label)", "p2 flattened", "d3", "up2/d2", "up1", "d1 (output)",
];

fn main() -> olce::Result<()> {
    let geometry = OlceGeometry::default();
    let params = OlceParams::new(geometry, 0)?;
    let x = Tensor3::zeros(geometry.channels, geometry.length);
    for (name, (c, h, w)) in STAGES.iter().zip(params.shape_trace(&x)?) {
        println!("{name:<14} {c:>4} x {h} x {w}");
    }
    println!("{} trainable parameters", params.num_params());
    Ok(())
}
