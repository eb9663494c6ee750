//! Forward and backward maps for the handful of layer types the models use.
//!
//! All convolutions are valid (no padding) with stride 1. Weight layouts:
//!
//! | kind              | shape                               |
//! |-------------------|-------------------------------------|
//! | `Conv`            | `(out_channels, in_channels, kernel)` |
//! | `TransposedConv`  | `(in_channels, out_channels, kernel)` |
//! | `FullyConnected`  | `(out_features, in_features)`        |
//!
//! The transposed layout means a `Conv` weight array reused as a
//! `TransposedConv` weight gives exactly the adjoint map.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::tensor::Tensor3;
use crate::error::{Error, Result};
use crate::signalio::LabelVector;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LayerKind {
    Conv,
    TransposedConv,
    FullyConnected,
}

/// Learnable weights and biases of one layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerParams {
    pub kind: LayerKind,
    pub shape: Vec<usize>,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl LayerParams {
    pub fn conv(out_channels: usize, in_channels: usize, kernel: usize) -> Self {
        Self::zeros(LayerKind::Conv, vec![out_channels, in_channels, kernel])
    }

    pub fn transposed_conv(in_channels: usize, out_channels: usize, kernel: usize) -> Self {
        Self::zeros(LayerKind::TransposedConv, vec![in_channels, out_channels, kernel])
    }

    pub fn fully_connected(out_features: usize, in_features: usize) -> Self {
        Self::zeros(LayerKind::FullyConnected, vec![out_features, in_features])
    }

    fn zeros(kind: LayerKind, shape: Vec<usize>) -> Self {
        let n: usize = shape.iter().product();
        let bias_len = match kind {
            LayerKind::Conv | LayerKind::FullyConnected => shape[0],
            LayerKind::TransposedConv => shape[1],
        };
        Self {
            kind,
            shape,
            weights: vec![0.0; n],
            bias: vec![0.0; bias_len],
        }
    }

    pub fn zeros_like(&self) -> Self {
        Self::zeros(self.kind, self.shape.clone())
    }

    /// Fills weights uniformly in `±sqrt(6 / (fan_in + fan_out))`; biases are zeroed.
    pub fn init_uniform<R: Rng + ?Sized>(mut self, rng: &mut R) -> Self {
        let (fan_in, fan_out) = self.fans();
        let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
        for w in &mut self.weights {
            *w = rng.gen_range(-limit..limit);
        }
        self.bias.iter_mut().for_each(|b| *b = 0.0);
        self
    }

    fn fans(&self) -> (usize, usize) {
        match self.kind {
            LayerKind::Conv => (self.shape[1] * self.shape[2], self.shape[0] * self.shape[2]),
            LayerKind::TransposedConv => (self.shape[0] * self.shape[2], self.shape[1] * self.shape[2]),
            LayerKind::FullyConnected => (self.shape[1], self.shape[0]),
        }
    }

    pub fn in_channels(&self) -> usize {
        match self.kind {
            LayerKind::Conv | LayerKind::FullyConnected => self.shape[1],
            LayerKind::TransposedConv => self.shape[0],
        }
    }

    pub fn out_channels(&self) -> usize {
        match self.kind {
            LayerKind::Conv | LayerKind::FullyConnected => self.shape[0],
            LayerKind::TransposedConv => self.shape[1],
        }
    }

    pub fn kernel(&self) -> usize {
        match self.kind {
            LayerKind::FullyConnected => 1,
            _ => self.shape[2],
        }
    }

    pub fn num_params(&self) -> usize {
        self.weights.len() + self.bias.len()
    }

    /// Element-wise `self += other`.
    pub fn accumulate(&mut self, other: &LayerParams) {
        for (a, b) in self.weights.iter_mut().zip(&other.weights) {
            *a += b;
        }
        for (a, b) in self.bias.iter_mut().zip(&other.bias) {
            *a += b;
        }
    }

    pub fn scale(&mut self, factor: f64) {
        self.weights.iter_mut().chain(self.bias.iter_mut()).for_each(|v| *v *= factor);
    }

    /// Checks that the shape vector, weight count and bias count agree.
    pub fn validate(&self) -> Result<()> {
        let rank = match self.kind {
            LayerKind::FullyConnected => 2,
            _ => 3,
        };
        if self.shape.len() != rank {
            return Err(Error::dim(format!("{:?} layer needs a rank-{rank} shape", self.kind)));
        }
        if self.weights.len() != self.shape.iter().product::<usize>() {
            return Err(Error::dim(format!(
                "{:?} layer shape {:?} needs {} weights, found {}",
                self.kind,
                self.shape,
                self.shape.iter().product::<usize>(),
                self.weights.len()
            )));
        }
        if self.bias.len() != self.out_channels() {
            return Err(Error::dim(format!(
                "{:?} layer needs {} biases, found {}",
                self.kind,
                self.out_channels(),
                self.bias.len()
            )));
        }
        Ok(())
    }
}

fn expect_kind(p: &LayerParams, kind: LayerKind) -> Result<()> {
    if p.kind != kind {
        return Err(Error::dim(format!("expected {kind:?} parameters, got {:?}", p.kind)));
    }
    Ok(())
}

fn expect_dims(t: &Tensor3, channels: usize, length: usize, what: &str) -> Result<()> {
    if t.channels() != channels || t.length() != length {
        return Err(Error::dim(format!(
            "{what}: expected {channels}x1x{length}, found {}x1x{}",
            t.channels(),
            t.length()
        )));
    }
    Ok(())
}

/// Valid cross-correlation: `out[o][t] = b[o] + sum_i sum_j w[o][i][j] * x[i][t + j]`.
pub fn conv1d_forward(x: &Tensor3, p: &LayerParams) -> Result<Tensor3> {
    expect_kind(p, LayerKind::Conv)?;
    let (cout, cin, k) = (p.shape[0], p.shape[1], p.shape[2]);
    if x.channels() != cin {
        return Err(Error::dim(format!(
            "conv expects {cin} input channels, found {}",
            x.channels()
        )));
    }
    if x.length() < k {
        return Err(Error::dim(format!(
            "conv kernel {k} longer than input length {}",
            x.length()
        )));
    }
    let lout = x.length() - k + 1;
    let mut out = Tensor3::zeros(cout, lout);
    for o in 0..cout {
        let dst = out.channel_mut(o);
        dst.iter_mut().for_each(|v| *v = p.bias[o]);
        for i in 0..cin {
            let src = x.channel(i);
            let w = &p.weights[(o * cin + i) * k..(o * cin + i + 1) * k];
            for (j, &wj) in w.iter().enumerate() {
                for (d, s) in dst.iter_mut().zip(&src[j..j + lout]) {
                    *d += wj * s;
                }
            }
        }
    }
    Ok(out)
}

/// Gradients of [`conv1d_forward`] with respect to its input and parameters.
pub fn conv1d_backward(x: &Tensor3, p: &LayerParams, grad_out: &Tensor3) -> Result<(Tensor3, LayerParams)> {
    let mut gp = p.zeros_like();
    let gx = conv1d_backward_into(x, p, grad_out, &mut gp)?;
    Ok((gx, gp))
}

/// Like [`conv1d_backward`] but adds the parameter gradient into `gp`.
pub fn conv1d_backward_into(x: &Tensor3, p: &LayerParams, grad_out: &Tensor3, gp: &mut LayerParams) -> Result<Tensor3> {
    expect_kind(p, LayerKind::Conv)?;
    let (cout, cin, k) = (p.shape[0], p.shape[1], p.shape[2]);
    if x.channels() != cin || x.length() < k {
        return Err(Error::dim("conv backward: input does not match parameters"));
    }
    let lout = x.length() - k + 1;
    expect_dims(grad_out, cout, lout, "conv backward gradient")?;
    let mut gx = Tensor3::zeros(cin, x.length());
    for o in 0..cout {
        let g = grad_out.channel(o);
        gp.bias[o] += g.iter().sum::<f64>();
        for i in 0..cin {
            let src = x.channel(i);
            let base = (o * cin + i) * k;
            for j in 0..k {
                gp.weights[base + j] += g.iter().zip(&src[j..j + lout]).map(|(a, b)| a * b).sum::<f64>();
                let wj = p.weights[base + j];
                for (d, gv) in gx.channel_mut(i)[j..j + lout].iter_mut().zip(g) {
                    *d += wj * gv;
                }
            }
        }
    }
    Ok(gx)
}

/// Stride-1 transposed convolution: `out[o][t + j] += w[i][o][j] * x[i][t]`,
/// plus a per-output-channel bias. Output length is `length + kernel - 1`.
pub fn transposed_conv1d_forward(x: &Tensor3, p: &LayerParams) -> Result<Tensor3> {
    expect_kind(p, LayerKind::TransposedConv)?;
    let (cin, cout, k) = (p.shape[0], p.shape[1], p.shape[2]);
    if x.channels() != cin {
        return Err(Error::dim(format!(
            "transposed conv expects {cin} input channels, found {}",
            x.channels()
        )));
    }
    let lin = x.length();
    let lout = lin + k - 1;
    let mut out = Tensor3::zeros(cout, lout);
    for o in 0..cout {
        let dst = out.channel_mut(o);
        dst.iter_mut().for_each(|v| *v = p.bias[o]);
        for i in 0..cin {
            let src = x.channel(i);
            let w = &p.weights[(i * cout + o) * k..(i * cout + o + 1) * k];
            for (j, &wj) in w.iter().enumerate() {
                for (d, s) in dst[j..j + lin].iter_mut().zip(src) {
                    *d += wj * s;
                }
            }
        }
    }
    Ok(out)
}

/// Gradients of [`transposed_conv1d_forward`].
pub fn transposed_conv1d_backward(
    x: &Tensor3,
    p: &LayerParams,
    grad_out: &Tensor3,
) -> Result<(Tensor3, LayerParams)> {
    let mut gp = p.zeros_like();
    let gx = transposed_conv1d_backward_into(x, p, grad_out, &mut gp)?;
    Ok((gx, gp))
}

/// Like [`transposed_conv1d_backward`] but adds the parameter gradient into `gp`.
pub fn transposed_conv1d_backward_into(
    x: &Tensor3,
    p: &LayerParams,
    grad_out: &Tensor3,
    gp: &mut LayerParams,
) -> Result<Tensor3> {
    expect_kind(p, LayerKind::TransposedConv)?;
    let (cin, cout, k) = (p.shape[0], p.shape[1], p.shape[2]);
    if x.channels() != cin {
        return Err(Error::dim("transposed conv backward: input does not match parameters"));
    }
    let lin = x.length();
    expect_dims(grad_out, cout, lin + k - 1, "transposed conv backward gradient")?;
    let mut gx = Tensor3::zeros(cin, lin);
    for o in 0..cout {
        let g = grad_out.channel(o);
        gp.bias[o] += g.iter().sum::<f64>();
        for i in 0..cin {
            let src = x.channel(i);
            let base = (i * cout + o) * k;
            for j in 0..k {
                let gw = &g[j..j + lin];
                gp.weights[base + j] += gw.iter().zip(src).map(|(a, b)| a * b).sum::<f64>();
                let wj = p.weights[base + j];
                for (d, gv) in gx.channel_mut(i).iter_mut().zip(gw) {
                    *d += wj * gv;
                }
            }
        }
    }
    Ok(gx)
}

/// Non-overlapping max pooling. A trailing partial window is dropped.
pub fn maxpool1d(x: &Tensor3, window: usize) -> Tensor3 {
    maxpool1d_with_indices(x, window).0
}

/// Max pooling that also returns, per output element, the flat input index of
/// the selected maximum (first index on ties).
pub fn maxpool1d_with_indices(x: &Tensor3, window: usize) -> (Tensor3, Vec<usize>) {
    let window = window.max(1);
    let lout = x.length() / window;
    let mut out = Tensor3::zeros(x.channels(), lout);
    let mut idx = Vec::with_capacity(x.channels() * lout);
    for c in 0..x.channels() {
        let src = x.channel(c);
        let base = c * x.length();
        for (t, o) in out.channel_mut(c).iter_mut().enumerate() {
            let start = t * window;
            let mut best = start;
            for s in start + 1..start + window {
                if src[s] > src[best] {
                    best = s;
                }
            }
            *o = src[best];
            idx.push(base + best);
        }
    }
    (out, idx)
}

/// Routes each pooled gradient back to the input position that won the max.
pub fn maxpool1d_backward(grad_out: &Tensor3, indices: &[usize], input_channels: usize, input_length: usize) -> Tensor3 {
    let mut gx = Tensor3::zeros(input_channels, input_length);
    let dst = gx.data_mut();
    for (&i, &g) in indices.iter().zip(grad_out.data()) {
        dst[i] += g;
    }
    gx
}

/// Nearest-neighbour upsampling: every element repeated `factor` times.
pub fn upsample1d(x: &Tensor3, factor: usize) -> Tensor3 {
    let lout = x.length() * factor;
    let mut out = Tensor3::zeros(x.channels(), lout);
    for c in 0..x.channels() {
        let src = x.channel(c);
        for (chunk, &v) in out.channel_mut(c).chunks_exact_mut(factor).zip(src) {
            chunk.iter_mut().for_each(|d| *d = v);
        }
    }
    out
}

/// Sums gradients over each repeated group of [`upsample1d`].
pub fn upsample1d_backward(grad_out: &Tensor3, factor: usize) -> Tensor3 {
    let lin = grad_out.length() / factor;
    let mut gx = Tensor3::zeros(grad_out.channels(), lin);
    for c in 0..grad_out.channels() {
        let g = grad_out.channel(c);
        for (d, chunk) in gx.channel_mut(c).iter_mut().zip(g.chunks_exact(factor)) {
            *d = chunk.iter().sum();
        }
    }
    gx
}

pub fn relu(x: &Tensor3) -> Tensor3 {
    let mut out = x.clone();
    relu_in_place(out.data_mut());
    out
}

pub fn relu_in_place(v: &mut [f64]) {
    v.iter_mut().for_each(|x| *x = x.max(0.0));
}

/// Masks `grad` where the pre-activation was not positive.
pub fn relu_backward(pre: &[f64], grad: &mut [f64]) {
    for (g, &z) in grad.iter_mut().zip(pre) {
        if z <= 0.0 {
            *g = 0.0;
        }
    }
}

/// Affine map `W x + b` on a flat input.
pub fn fully_connected(x: &[f64], p: &LayerParams) -> Result<Vec<f64>> {
    expect_kind(p, LayerKind::FullyConnected)?;
    let (nout, nin) = (p.shape[0], p.shape[1]);
    if x.len() != nin {
        return Err(Error::dim(format!(
            "fully connected layer expects {nin} inputs, found {}",
            x.len()
        )));
    }
    Ok((0..nout)
        .map(|o| {
            let row = &p.weights[o * nin..(o + 1) * nin];
            p.bias[o] + row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>()
        })
        .collect())
}

/// Gradients of [`fully_connected`] with respect to its input and parameters.
pub fn fully_connected_backward(x: &[f64], p: &LayerParams, grad_out: &[f64]) -> Result<(Vec<f64>, LayerParams)> {
    let mut gp = p.zeros_like();
    let gx = fully_connected_backward_into(x, p, grad_out, &mut gp)?;
    Ok((gx, gp))
}

/// Like [`fully_connected_backward`] but adds the parameter gradient into `gp`.
pub fn fully_connected_backward_into(x: &[f64], p: &LayerParams, grad_out: &[f64], gp: &mut LayerParams) -> Result<Vec<f64>> {
    expect_kind(p, LayerKind::FullyConnected)?;
    let (nout, nin) = (p.shape[0], p.shape[1]);
    if x.len() != nin || grad_out.len() != nout {
        return Err(Error::dim("fully connected backward: shape mismatch"));
    }
    let mut gx = vec![0.0; nin];
    for (o, &g) in grad_out.iter().enumerate() {
        gp.bias[o] += g;
        if g == 0.0 {
            continue;
        }
        let row = &p.weights[o * nin..(o + 1) * nin];
        let grow = &mut gp.weights[o * nin..(o + 1) * nin];
        for ((gw, &xv), (gxv, &w)) in grow.iter_mut().zip(x).zip(gx.iter_mut().zip(row)) {
            *gw += g * xv;
            *gxv += g * w;
        }
    }
    Ok(gx)
}

/// Numerically stable softmax.
pub fn softmax(logits: &[f64]) -> LabelVector {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|z| (z - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    LabelVector::from_probs_unchecked(exps.into_iter().map(|e| e / sum).collect())
}

/// Pulls a gradient on softmax outputs back to the logits:
/// `dz_j = p_j * (g_j - sum_k g_k p_k)`.
pub fn softmax_backward(probs: &[f64], grad_probs: &[f64]) -> Vec<f64> {
    let inner: f64 = probs.iter().zip(grad_probs).map(|(p, g)| p * g).sum();
    probs.iter().zip(grad_probs).map(|(p, g)| p * (g - inner)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn t(channels: usize, data: &[f64]) -> Tensor3 {
        Tensor3::from_vec(channels, data.len() / channels, data.to_vec()).unwrap()
    }

    fn random_tensor(rng: &mut ChaCha8Rng, c: usize, l: usize) -> Tensor3 {
        Tensor3::from_vec(c, l, (0..c * l).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap()
    }

    fn random_params(rng: &mut ChaCha8Rng, mut p: LayerParams) -> LayerParams {
        p = p.init_uniform(rng);
        for b in &mut p.bias {
            *b = rng.gen_range(-0.5..0.5);
        }
        p
    }

    #[test]
    fn conv_table_shape() {
        let x = Tensor3::zeros(10, 120);
        let p = LayerParams::conv(7, 10, 5);
        assert_eq!(conv1d_forward(&x, &p).unwrap().dims(), (7, 1, 116));
    }

    #[test]
    fn conv_identity_kernel() {
        let x = t(1, &[1.0, -2.0, 3.5]);
        let mut p = LayerParams::conv(1, 1, 1);
        p.weights[0] = 1.0;
        assert_eq!(conv1d_forward(&x, &p).unwrap(), x);
    }

    #[test]
    fn conv_matches_triple_loop() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x = random_tensor(&mut rng, 2, 9);
        let p = random_params(&mut rng, LayerParams::conv(3, 2, 3));
        let out = conv1d_forward(&x, &p).unwrap();
        for o in 0..3 {
            for tt in 0..7 {
                let mut acc = p.bias[o];
                for i in 0..2 {
                    for j in 0..3 {
                        acc += p.weights[o * 6 + i * 3 + j] * x.data()[i * 9 + tt + j];
                    }
                }
                assert!((out.data()[o * 7 + tt] - acc).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn conv_rejects_bad_input() {
        let p = LayerParams::conv(2, 3, 5);
        assert!(conv1d_forward(&Tensor3::zeros(2, 10), &p).is_err());
        assert!(conv1d_forward(&Tensor3::zeros(3, 4), &p).is_err());
        assert!(conv1d_forward(&Tensor3::zeros(3, 4), &LayerParams::fully_connected(1, 1)).is_err());
    }

    #[test]
    fn conv_backward_zero_grad() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let x = random_tensor(&mut rng, 2, 8);
        let p = random_params(&mut rng, LayerParams::conv(3, 2, 3));
        let (gx, gp) = conv1d_backward(&x, &p, &Tensor3::zeros(3, 6)).unwrap();
        assert!(gx.data().iter().all(|&v| v == 0.0));
        assert!(gp.weights.iter().chain(&gp.bias).all(|&v| v == 0.0));
    }

    #[test]
    fn conv_backward_identity_kernel() {
        let x = t(1, &[0.3, 0.1, -0.7]);
        let mut p = LayerParams::conv(1, 1, 1);
        p.weights[0] = 1.0;
        let g = t(1, &[1.0, 2.0, 3.0]);
        let (gx, _) = conv1d_backward(&x, &p, &g).unwrap();
        assert_eq!(gx, g);
    }

    #[test]
    fn maxpool_definition_and_floor() {
        let x = t(1, &[1.0, 3.0, 2.0, 2.0]);
        assert_eq!(maxpool1d(&x, 2).data(), &[3.0, 2.0]);
        assert_eq!(maxpool1d(&Tensor3::zeros(7, 116), 2).dims(), (7, 1, 58));
        assert_eq!(maxpool1d(&Tensor3::zeros(12, 57), 2).dims(), (12, 1, 28));
    }

    #[test]
    fn maxpool_backward_first_index_on_ties() {
        let x = t(1, &[2.0, 2.0, 1.0, 5.0]);
        let (_, idx) = maxpool1d_with_indices(&x, 2);
        assert_eq!(idx, vec![0, 3]);
        let gx = maxpool1d_backward(&t(1, &[1.0, 1.0]), &idx, 1, 4);
        assert_eq!(gx.data(), &[1.0, 0.0, 0.0, 1.0]);
    }

    #[test]
    fn upsample_definition() {
        let x = t(1, &[1.5, -2.0]);
        assert_eq!(upsample1d(&x, 2).data(), &[1.5, 1.5, -2.0, -2.0]);
        assert_eq!(upsample1d(&Tensor3::zeros(12, 28), 2).dims(), (12, 1, 56));
        assert_eq!(upsample1d_backward(&t(1, &[1.0, 2.0, 3.0, 4.0]), 2).data(), &[3.0, 7.0]);
    }

    #[test]
    fn transposed_conv_table_shapes() {
        let p2 = LayerParams::transposed_conv(12, 7, 3);
        assert_eq!(transposed_conv1d_forward(&Tensor3::zeros(12, 56), &p2).unwrap().dims(), (7, 1, 58));
        let p1 = LayerParams::transposed_conv(7, 10, 5);
        assert_eq!(transposed_conv1d_forward(&Tensor3::zeros(7, 116), &p1).unwrap().dims(), (10, 1, 120));
    }

    #[test]
    fn relu_and_softmax() {
        assert_eq!(relu(&t(1, &[-1.0, 0.0, 2.0])).data(), &[0.0, 0.0, 2.0]);
        let p = softmax(&[0.0; 7]);
        assert!(p.as_slice().iter().all(|&v| (v - 1.0 / 7.0).abs() < 1e-15));
    }

    #[test]
    fn softmax_handles_large_logits() {
        let p = softmax(&[1000.0, 1000.0]);
        assert_eq!(p.as_slice(), &[0.5, 0.5]);
    }

    #[test]
    fn fully_connected_table_shape() {
        let p = LayerParams::fully_connected(7, 336);
        assert_eq!(fully_connected(&[0.0; 336], &p).unwrap().len(), 7);
        assert!(fully_connected(&[0.0; 335], &p).is_err());
    }

    #[test]
    fn init_respects_limit() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let p = LayerParams::conv(7, 10, 5).init_uniform(&mut rng);
        let limit = (6.0f64 / (50.0 + 35.0)).sqrt();
        assert!(p.weights.iter().all(|w| w.abs() <= limit));
        p.validate().unwrap();
    }
}
