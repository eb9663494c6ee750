//! Odor labeling convolutional encoder-decoder.
//!
//! The encoder maps a normalized `C x 1 x T` response to a K-way softmax
//! label vector; the decoder maps that label vector back to a `C x 1 x T`
//! reconstruction. With the default geometry (10 sensors, 120 points,
//! 7 classes) the activation chain is
//!
//! ```text
//! 10x1x120 -conv(7,k5)-> 7x1x116 -pool-> 7x1x58 -conv(12,k3)-> 12x1x56 -pool-> 12x1x28
//!   -fc-> 7 -softmax-> 7 -fc-> 336 = 12x1x28 -up-> 12x1x56 -tconv(7,k3)-> 7x1x58
//!   -up-> 7x1x116 -tconv(10,k5)-> 10x1x120
//! ```
//!
//! ReLU follows both encoder convolutions and the first decoder transposed
//! convolution; the reconstruction layer is linear so it can produce the
//! negative values normalized inputs contain.
//!
//! Training minimizes `CE(encode(x), onehot(y)) + lambda * MSE(decode(encode(x)), x)`
//! over the training split, with gradients flowing through the soft bottleneck.

use std::fs;
use std::ops::Range;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::baselines::Classifier;
use crate::error::{Error, Result};
use crate::nn::gradcheck::GradCheckable;
use crate::nn::layers::{
    conv1d_backward_into, conv1d_forward, fully_connected, fully_connected_backward_into, maxpool1d_backward,
    maxpool1d_with_indices, relu, relu_backward, softmax, softmax_backward, transposed_conv1d_backward_into,
    transposed_conv1d_forward, upsample1d, upsample1d_backward, LayerParams,
};
use crate::nn::loss::{cross_entropy_grad, mse_grad, mse_slices, CE_EPSILON};
use crate::nn::{Checkpoint, Optimizer, Tensor3};
use crate::signalio::{save_sample, Dataset, LabelVector, ResponseSample, SplitView};

pub const CONV1_FILTERS: usize = 7;
pub const CONV1_KERNEL: usize = 5;
pub const CONV2_FILTERS: usize = 12;
pub const CONV2_KERNEL: usize = 3;
pub const POOL: usize = 2;
pub const CHECKPOINT_MODEL: &str = "olce";

/// Input geometry the network is built for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct OlceGeometry {
    pub channels: usize,
    pub length: usize,
    pub classes: usize,
}

impl Default for OlceGeometry {
    fn default() -> Self {
        Self {
            channels: 10,
            length: 120,
            classes: 7,
        }
    }
}

impl OlceGeometry {
    /// Checks that the decoder can restore the input length exactly, which
    /// requires `length` to be a multiple of 4 and at least 12.
    pub fn validate(&self) -> Result<()> {
        if self.channels == 0 || self.classes < 2 {
            return Err(Error::Config(format!(
                "OLCE needs at least one channel and two classes, got {self:?}"
            )));
        }
        if self.length < 12 || self.length % 4 != 0 {
            return Err(Error::Config(format!(
                "OLCE input length must be a multiple of 4 and at least 12, got {}",
                self.length
            )));
        }
        Ok(())
    }

    /// Length after the second pooling stage (28 for 120-point inputs).
    pub fn bottleneck_length(&self) -> usize {
        ((self.length - CONV1_KERNEL + 1) / POOL - CONV2_KERNEL + 1) / POOL
    }

    /// Flattened feature length feeding the encoder FC layer (336 by default).
    pub fn feature_len(&self) -> usize {
        CONV2_FILTERS * self.bottleneck_length()
    }

    pub fn from_dataset(ds: &Dataset) -> Self {
        let (channels, length) = ds.sample_dims();
        Self {
            channels,
            length,
            classes: ds.num_classes,
        }
    }
}

/// All learnable weights of the encoder and decoder.
#[derive(Debug, Clone, PartialEq)]
pub struct OlceParams {
    pub geometry: OlceGeometry,
    pub conv1: LayerParams,
    pub conv2: LayerParams,
    pub fc_enc: LayerParams,
    pub fc_dec: LayerParams,
    pub tconv2: LayerParams,
    pub tconv1: LayerParams,
}

impl OlceParams {
    /// Zero-initialized parameters.
    pub fn zeros(geometry: OlceGeometry) -> Result<Self> {
        geometry.validate()?;
        let f = geometry.feature_len();
        Ok(Self {
            geometry,
            conv1: LayerParams::conv(CONV1_FILTERS, geometry.channels, CONV1_KERNEL),
            conv2: LayerParams::conv(CONV2_FILTERS, CONV1_FILTERS, CONV2_KERNEL),
            fc_enc: LayerParams::fully_connected(geometry.classes, f),
            fc_dec: LayerParams::fully_connected(f, geometry.classes),
            tconv2: LayerParams::transposed_conv(CONV2_FILTERS, CONV1_FILTERS, CONV2_KERNEL),
            tconv1: LayerParams::transposed_conv(CONV1_FILTERS, geometry.channels, CONV1_KERNEL),
        })
    }

    /// Uniform fan-in/fan-out initialization from `seed`.
    pub fn new(geometry: OlceGeometry, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let z = Self::zeros(geometry)?;
        Ok(Self {
            geometry,
            conv1: z.conv1.init_uniform(&mut rng),
            conv2: z.conv2.init_uniform(&mut rng),
            fc_enc: z.fc_enc.init_uniform(&mut rng),
            fc_dec: z.fc_dec.init_uniform(&mut rng),
            tconv2: z.tconv2.init_uniform(&mut rng),
            tconv1: z.tconv1.init_uniform(&mut rng),
        })
    }

    /// Layers in checkpoint order (encoder first, then decoder).
    pub fn layers(&self) -> [&LayerParams; 6] {
        [&self.conv1, &self.conv2, &self.fc_enc, &self.fc_dec, &self.tconv2, &self.tconv1]
    }

    pub fn layers_mut(&mut self) -> [&mut LayerParams; 6] {
        [
            &mut self.conv1,
            &mut self.conv2,
            &mut self.fc_enc,
            &mut self.fc_dec,
            &mut self.tconv2,
            &mut self.tconv1,
        ]
    }

    pub const LAYER_NAMES: [&'static str; 6] = ["conv1", "conv2", "fc_enc", "fc_dec", "tconv2", "tconv1"];

    pub fn num_params(&self) -> usize {
        self.layers().iter().map(|l| l.num_params()).sum()
    }

    fn zeros_like(&self) -> Self {
        Self {
            geometry: self.geometry,
            conv1: self.conv1.zeros_like(),
            conv2: self.conv2.zeros_like(),
            fc_enc: self.fc_enc.zeros_like(),
            fc_dec: self.fc_dec.zeros_like(),
            tconv2: self.tconv2.zeros_like(),
            tconv1: self.tconv1.zeros_like(),
        }
    }

    fn slices(&self) -> Vec<&[f64]> {
        self.layers()
            .into_iter()
            .flat_map(|l| [l.weights.as_slice(), l.bias.as_slice()])
            .collect()
    }

    fn slices_mut(&mut self) -> Vec<&mut [f64]> {
        self.layers_mut()
            .into_iter()
            .flat_map(|l| [l.weights.as_mut_slice(), l.bias.as_mut_slice()])
            .collect()
    }

    pub fn to_checkpoint(&self) -> Checkpoint {
        Checkpoint::new(CHECKPOINT_MODEL, self.layers().into_iter().cloned().collect())
    }

    /// Rebuilds parameters from a checkpoint, inferring the geometry from the
    /// layer shapes.
    pub fn from_checkpoint(ck: &Checkpoint) -> Result<Self> {
        ck.check()?;
        if ck.model != CHECKPOINT_MODEL || ck.layers.len() != 6 {
            return Err(Error::Checkpoint(format!(
                "expected an {CHECKPOINT_MODEL} checkpoint with 6 layers, found {:?} with {}",
                ck.model,
                ck.layers.len()
            )));
        }
        let channels = ck.layers[0].in_channels();
        let classes = ck.layers[2].out_channels();
        let feature_len = ck.layers[2].in_channels();
        let bottleneck = feature_len / CONV2_FILTERS;
        let geometry = OlceGeometry {
            channels,
            length: 4 * bottleneck + 8,
            classes,
        };
        let mut params = Self::zeros(geometry)?;
        for (dst, src) in params.layers_mut().into_iter().zip(&ck.layers) {
            if dst.kind != src.kind || dst.shape != src.shape {
                return Err(Error::Checkpoint(format!(
                    "layer {:?} {:?} does not match expected {:?} {:?}",
                    src.kind, src.shape, dst.kind, dst.shape
                )));
            }
            *dst = src.clone();
        }
        Ok(params)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        self.to_checkpoint().save(path)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_checkpoint(&Checkpoint::load(path)?)
    }

    fn check_input(&self, x: &Tensor3) -> Result<()> {
        let g = self.geometry;
        if x.channels() != g.channels || x.length() != g.length {
            return Err(Error::dim(format!(
                "OLCE expects {}x1x{} input, found {}x1x{}",
                g.channels,
                g.length,
                x.channels(),
                x.length()
            )));
        }
        Ok(())
    }

    /// Encoder: returns the softmax label vector.
    pub fn encode(&self, x: &Tensor3) -> Result<LabelVector> {
        self.check_input(x)?;
        Ok(self.encode_cached(x)?.probs_vector())
    }

    pub fn encode_sample(&self, sample: &ResponseSample) -> Result<LabelVector> {
        self.encode(&Tensor3::from_sample(sample))
    }

    /// Flattened second pooling output (`12 x T/4`), the input of the
    /// encoder's fully-connected layer.
    pub fn features(&self, x: &Tensor3) -> Result<Vec<f64>> {
        self.check_input(x)?;
        Ok(self.encode_cached(x)?.p2.into_vec())
    }

    /// Decoder: maps a K-vector to a reconstruction.
    pub fn decode(&self, y: &LabelVector) -> Result<Tensor3> {
        if y.len() != self.geometry.classes {
            return Err(Error::dim(format!(
                "decoder expects a {}-vector, found {}",
                self.geometry.classes,
                y.len()
            )));
        }
        Ok(self.decode_cached(y.as_slice())?.out)
    }

    /// `decode(encode(x))`.
    pub fn reconstruct(&self, x: &Tensor3) -> Result<Tensor3> {
        let y = self.encode(x)?;
        self.decode(&y)
    }

    /// Argmax of the encoder output; first index on ties.
    pub fn classify(&self, x: &Tensor3) -> Result<usize> {
        Ok(self.encode(x)?.argmax())
    }

    pub fn classify_sample(&self, sample: &ResponseSample) -> Result<usize> {
        self.classify(&Tensor3::from_sample(sample))
    }

    /// Every intermediate activation shape, input through reconstruction.
    pub fn shape_trace(&self, x: &Tensor3) -> Result<Vec<(usize, usize, usize)>> {
        self.check_input(x)?;
        let e = self.encode_cached(x)?;
        let d = self.decode_cached(&e.probs)?;
        let k = self.geometry.classes;
        Ok(vec![
            x.dims(),
            e.z1.dims(),
            e.p1.dims(),
            e.z2.dims(),
            e.p2.dims(),
            (k, 1, 1),
            (d.h.len(), 1, 1),
            d.u2.dims(),
            d.r2.dims(),
            d.u1.dims(),
            d.out.dims(),
        ])
    }

    pub(crate) fn encode_cached(&self, x: &Tensor3) -> Result<EncoderCache> {
        let z1 = conv1d_forward(x, &self.conv1)?;
        let (p1, idx1) = maxpool1d_with_indices(&relu(&z1), POOL);
        let z2 = conv1d_forward(&p1, &self.conv2)?;
        let (p2, idx2) = maxpool1d_with_indices(&relu(&z2), POOL);
        let logits = fully_connected(p2.data(), &self.fc_enc)?;
        let probs = softmax(&logits).as_slice().to_vec();
        Ok(EncoderCache {
            z1,
            idx1,
            p1,
            z2,
            idx2,
            p2,
            probs,
        })
    }

    pub(crate) fn decode_cached(&self, y: &[f64]) -> Result<DecoderCache> {
        let h = fully_connected(y, &self.fc_dec)?;
        let hb = Tensor3::from_vec(CONV2_FILTERS, self.geometry.bottleneck_length(), h.clone())?;
        let u2 = upsample1d(&hb, POOL);
        let r2 = transposed_conv1d_forward(&u2, &self.tconv2)?;
        let u1 = upsample1d(&relu(&r2), POOL);
        let out = transposed_conv1d_forward(&u1, &self.tconv1)?;
        Ok(DecoderCache { h, u2, r2, u1, out })
    }

    /// Joint loss of one sample and its gradient (added into `grads`).
    /// Returns `(ce, mse, input_gradient)`.
    pub(crate) fn backprop(
        &self,
        x: &Tensor3,
        target: &[f64],
        lambda: f64,
        grads: &mut OlceParams,
    ) -> Result<(f64, f64, Tensor3)> {
        let enc = self.encode_cached(x)?;
        let dec = self.decode_cached(&enc.probs)?;
        let ce = ce_value(&enc.probs, target);
        let mse = mse_slices(dec.out.data(), x.data());

        let mut g_probs = cross_entropy_grad(&enc.probs, target);
        let mut g_x_recon = None;
        if lambda != 0.0 {
            let mut g_out = mse_grad(dec.out.data(), x.data());
            g_out.iter_mut().for_each(|g| *g *= lambda);
            // the reconstruction target is the input itself
            g_x_recon = Some(g_out.iter().map(|g| -g).collect::<Vec<f64>>());
            let g_out = Tensor3::from_vec(dec.out.channels(), dec.out.length(), g_out)?;
            let g_u1 = transposed_conv1d_backward_into(&dec.u1, &self.tconv1, &g_out, &mut grads.tconv1)?;
            let mut g_r2 = upsample1d_backward(&g_u1, POOL);
            relu_backward(dec.r2.data(), g_r2.data_mut());
            let g_u2 = transposed_conv1d_backward_into(&dec.u2, &self.tconv2, &g_r2, &mut grads.tconv2)?;
            let g_h = upsample1d_backward(&g_u2, POOL);
            let g_y = fully_connected_backward_into(&enc.probs, &self.fc_dec, g_h.data(), &mut grads.fc_dec)?;
            for (a, b) in g_probs.iter_mut().zip(&g_y) {
                *a += b;
            }
        }
        let g_logits = softmax_backward(&enc.probs, &g_probs);
        let g_flat = fully_connected_backward_into(enc.p2.data(), &self.fc_enc, &g_logits, &mut grads.fc_enc)?;
        let g_p2 = Tensor3::from_vec(enc.p2.channels(), enc.p2.length(), g_flat)?;
        let mut g_z2 = maxpool1d_backward(&g_p2, &enc.idx2, enc.z2.channels(), enc.z2.length());
        relu_backward(enc.z2.data(), g_z2.data_mut());
        let g_p1 = conv1d_backward_into(&enc.p1, &self.conv2, &g_z2, &mut grads.conv2)?;
        let mut g_z1 = maxpool1d_backward(&g_p1, &enc.idx1, enc.z1.channels(), enc.z1.length());
        relu_backward(enc.z1.data(), g_z1.data_mut());
        let mut g_x = conv1d_backward_into(x, &self.conv1, &g_z1, &mut grads.conv1)?;
        if let Some(extra) = g_x_recon {
            for (a, b) in g_x.data_mut().iter_mut().zip(&extra) {
                *a += b;
            }
        }
        Ok((ce, mse, g_x))
    }

    /// Copies encoder weights into the decoder (transposing the FC layer).
    /// Conv and transposed-conv layouts already coincide.
    fn tie_decoder(&mut self) {
        self.tconv1.weights.clone_from(&self.conv1.weights);
        self.tconv2.weights.clone_from(&self.conv2.weights);
        let (k, f) = (self.fc_enc.shape[0], self.fc_enc.shape[1]);
        for o in 0..k {
            for i in 0..f {
                self.fc_dec.weights[i * k + o] = self.fc_enc.weights[o * f + i];
            }
        }
    }
}

/// Folds decoder weight gradients into the encoder and clears them, for tied
/// training.
fn fold_tied_grads(grads: &mut OlceParams) {
    let (k, f) = (grads.fc_enc.shape[0], grads.fc_enc.shape[1]);
    for o in 0..k {
        for i in 0..f {
            grads.fc_enc.weights[o * f + i] += grads.fc_dec.weights[i * k + o];
        }
    }
    for (a, b) in grads.conv1.weights.iter_mut().zip(&grads.tconv1.weights) {
        *a += b;
    }
    for (a, b) in grads.conv2.weights.iter_mut().zip(&grads.tconv2.weights) {
        *a += b;
    }
    for w in [&mut grads.fc_dec.weights, &mut grads.tconv1.weights, &mut grads.tconv2.weights] {
        w.iter_mut().for_each(|v| *v = 0.0);
    }
}

fn ce_value(probs: &[f64], target: &[f64]) -> f64 {
    -probs.iter().zip(target).map(|(p, t)| t * (p + CE_EPSILON).ln()).sum::<f64>()
}

pub(crate) struct EncoderCache {
    pub z1: Tensor3,
    pub idx1: Vec<usize>,
    pub p1: Tensor3,
    pub z2: Tensor3,
    pub idx2: Vec<usize>,
    pub p2: Tensor3,
    pub probs: Vec<f64>,
}

impl EncoderCache {
    fn probs_vector(self) -> LabelVector {
        LabelVector::from_probs_unchecked(self.probs)
    }
}

pub(crate) struct DecoderCache {
    h: Vec<f64>,
    u2: Tensor3,
    r2: Tensor3,
    u1: Tensor3,
    out: Tensor3,
}

/// Optimization settings for [`train`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub lambda_recon: f64,
    pub seed: u64,
    /// Share encoder weights with the decoder (transposed).
    #[serde(default)]
    pub tied_decoder: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 200,
            batch_size: 16,
            lr: 1e-3,
            lambda_recon: 1.0,
            seed: 0,
            tied_decoder: false,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::Config("epochs and batch_size must be at least 1".into()));
        }
        if !(self.lr > 0.0) || !self.lr.is_finite() {
            return Err(Error::Config(format!("learning rate must be positive, got {}", self.lr)));
        }
        if !(self.lambda_recon >= 0.0) || !self.lambda_recon.is_finite() {
            return Err(Error::Config(format!(
                "lambda_recon must be non-negative, got {}",
                self.lambda_recon
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub ce: f64,
    pub mse: f64,
}

/// Per-epoch mean training losses.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TrainLog {
    pub epochs: Vec<EpochLog>,
}

impl TrainLog {
    pub fn first(&self) -> Option<&EpochLog> {
        self.epochs.first()
    }

    pub fn last(&self) -> Option<&EpochLog> {
        self.epochs.last()
    }

    /// `epoch,ce,mse` CSV text.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("epoch,ce,mse\n");
        for e in &self.epochs {
            s.push_str(&format!("{},{},{}\n", e.epoch, e.ce, e.mse));
        }
        s
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))
    }
}

/// Trains a fresh network on the training split of `data`.
///
/// Weight initialization and mini-batch order are both derived from
/// `cfg.seed`; the result is bitwise reproducible.
pub fn train<S: SplitView + ?Sized>(data: &S, cfg: &TrainConfig) -> Result<(OlceParams, TrainLog)> {
    cfg.validate()?;
    let train_idx = data.train_indices()?;
    if train_idx.is_empty() {
        return Err(Error::Config("training split is empty".into()));
    }
    let first = data.sample(train_idx[0]);
    let geometry = OlceGeometry {
        channels: first.channels(),
        length: first.length(),
        classes: data.num_classes(),
    };
    let mut params = OlceParams::new(geometry, cfg.seed)?;
    if cfg.tied_decoder {
        params.tie_decoder();
    }
    let inputs: Vec<(Tensor3, Vec<f64>)> = train_idx
        .iter()
        .map(|&i| {
            let s = data.sample(i);
            let y = LabelVector::one_hot(s.label, geometry.classes)?;
            Ok((Tensor3::from_sample(s), y.as_slice().to_vec()))
        })
        .collect::<Result<_>>()?;

    let mut order_rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x5eed_0f_0a_7c);
    let mut optimizer = Optimizer::adam(cfg.lr);
    let mut order: Vec<usize> = (0..inputs.len()).collect();
    let mut log = TrainLog::default();
    let mut grads = params.zeros_like();

    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut order_rng);
        let (mut ce_sum, mut mse_sum) = (0.0, 0.0);
        for batch in order.chunks(cfg.batch_size) {
            grads.layers_mut().into_iter().for_each(|l| l.scale(0.0));
            for &i in batch {
                let (x, y) = &inputs[i];
                let (ce, mse, _) = params.backprop(x, y, cfg.lambda_recon, &mut grads)?;
                ce_sum += ce;
                mse_sum += mse;
            }
            let inv = 1.0 / batch.len() as f64;
            grads.layers_mut().into_iter().for_each(|l| l.scale(inv));
            if cfg.tied_decoder {
                fold_tied_grads(&mut grads);
            }
            optimizer.step(params.slices_mut(), grads.slices())?;
            if cfg.tied_decoder {
                params.tie_decoder();
            }
        }
        let n = inputs.len() as f64;
        let entry = EpochLog {
            epoch,
            ce: ce_sum / n,
            mse: mse_sum / n,
        };
        if !entry.ce.is_finite() || !entry.mse.is_finite() {
            return Err(Error::Numeric(format!("non-finite training loss at epoch {epoch}")));
        }
        log.epochs.push(entry);
    }
    Ok((params, log))
}

/// Writes `<source_id>.orig.csv` and `<source_id>.decoded.csv` for each
/// requested sample. Returns the written paths in pairs.
pub fn export_decoded(params: &OlceParams, ds: &Dataset, indices: &[usize], out_dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let mut written = Vec::with_capacity(2 * indices.len());
    for &i in indices {
        let sample = ds
            .samples
            .get(i)
            .ok_or_else(|| Error::Config(format!("sample index {i} out of range")))?;
        let recon = params.reconstruct(&Tensor3::from_sample(sample))?;
        let decoded = ResponseSample::new(
            recon.channels(),
            recon.length(),
            recon.into_vec(),
            sample.label,
            format!("{}.decoded", sample.source_id),
        )?;
        let orig_path = out_dir.join(format!("{}.orig.csv", sample.source_id));
        let dec_path = out_dir.join(format!("{}.decoded.csv", sample.source_id));
        save_sample(sample, &orig_path)?;
        save_sample(&decoded, &dec_path)?;
        written.push(orig_path);
        written.push(dec_path);
    }
    Ok(written)
}

/// MSE between `decode(onehot(c))` and each class's mean training response:
/// row `c`, column `k` holds the distance from template `c` to class `k`'s mean.
pub fn class_template_distances<S: SplitView + ?Sized>(params: &OlceParams, data: &S) -> Result<Vec<Vec<f64>>> {
    let g = params.geometry;
    let mut means = vec![vec![0.0; g.channels * g.length]; g.classes];
    let mut counts = vec![0usize; g.classes];
    for i in data.train_indices()? {
        let s = data.sample(i);
        counts[s.label] += 1;
        for (m, v) in means[s.label].iter_mut().zip(s.data()) {
            *m += v;
        }
    }
    for (m, &c) in means.iter_mut().zip(&counts) {
        if c > 0 {
            m.iter_mut().for_each(|v| *v /= c as f64);
        }
    }
    (0..g.classes)
        .map(|c| {
            let t = params.decode(&LabelVector::one_hot(c, g.classes)?)?;
            Ok(means.iter().map(|m| mse_slices(t.data(), m)).collect())
        })
        .collect()
}

/// One network pinned to an input and target, exposing the joint loss for
/// gradient checking. Coordinates: every parameter in checkpoint order
/// (weights then bias per layer), then the input elements.
#[derive(Debug, Clone)]
pub struct OlceProbe {
    pub params: OlceParams,
    pub input: Tensor3,
    pub target: Vec<f64>,
    pub lambda: f64,
    offsets: Vec<usize>,
}

impl OlceProbe {
    pub fn new(params: OlceParams, input: Tensor3, target: Vec<f64>, lambda: f64) -> Self {
        let mut offsets = vec![0];
        for l in params.layers() {
            let last = *offsets.last().unwrap();
            offsets.push(last + l.num_params());
        }
        Self {
            params,
            input,
            target,
            lambda,
            offsets,
        }
    }

    /// Random input and target drawn from `seed` on freshly initialized parameters.
    pub fn random(geometry: OlceGeometry, seed: u64, lambda: f64) -> Result<Self> {
        use rand::Rng;
        let params = OlceParams::new(geometry, seed)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(0x9e37_79b9));
        let n = geometry.channels * geometry.length;
        let input = Tensor3::from_vec(
            geometry.channels,
            geometry.length,
            (0..n).map(|_| rng.gen_range(-0.5..0.5)).collect(),
        )?;
        let target = LabelVector::one_hot(rng.gen_range(0..geometry.classes), geometry.classes)?;
        Ok(Self::new(params, input, target.as_slice().to_vec(), lambda))
    }

    fn slot(&self, index: usize) -> Option<(usize, usize)> {
        let l = self.offsets.windows(2).position(|w| index < w[1])?;
        Some((l, index - self.offsets[l]))
    }
}

impl GradCheckable for OlceProbe {
    fn num_coordinates(&self) -> usize {
        self.offsets.last().unwrap() + self.input.len()
    }

    fn get(&self, index: usize) -> f64 {
        match self.slot(index) {
            Some((l, off)) => {
                let layer = self.params.layers()[l];
                if off < layer.weights.len() {
                    layer.weights[off]
                } else {
                    layer.bias[off - layer.weights.len()]
                }
            }
            None => self.input.data()[index - self.offsets.last().unwrap()],
        }
    }

    fn set(&mut self, index: usize, value: f64) {
        match self.slot(index) {
            Some((l, off)) => {
                let layer = self.params.layers_mut().into_iter().nth(l).unwrap();
                if off < layer.weights.len() {
                    layer.weights[off] = value;
                } else {
                    let nw = layer.weights.len();
                    layer.bias[off - nw] = value;
                }
            }
            None => {
                let base = *self.offsets.last().unwrap();
                self.input.data_mut()[index - base] = value;
            }
        }
    }

    fn loss(&self) -> f64 {
        let enc = self.params.encode_cached(&self.input).expect("probe shapes are fixed");
        let ce = ce_value(&enc.probs, &self.target);
        if self.lambda == 0.0 {
            return ce;
        }
        let dec = self.params.decode_cached(&enc.probs).expect("probe shapes are fixed");
        ce + self.lambda * mse_slices(dec.out.data(), self.input.data())
    }

    /// For decoder coordinates only the reconstruction term is returned:
    /// the cross-entropy does not depend on them, so differences of shifted
    /// losses are unchanged while their rounding error shrinks.
    fn shifted_loss(&mut self, index: usize, delta: f64) -> f64 {
        let decoder = matches!(self.slot(index), Some((l, _)) if l >= 3);
        let orig = self.get(index);
        self.set(index, orig + delta);
        let l = if decoder {
            let enc = self.params.encode_cached(&self.input).expect("probe shapes are fixed");
            let dec = self.params.decode_cached(&enc.probs).expect("probe shapes are fixed");
            self.lambda * mse_slices(dec.out.data(), self.input.data())
        } else {
            self.loss()
        };
        self.set(index, orig);
        l
    }

    fn gradient(&self) -> Vec<f64> {
        let mut grads = self.params.zeros_like();
        let (_, _, gx) = self
            .params
            .backprop(&self.input, &self.target, self.lambda, &mut grads)
            .expect("probe shapes are fixed");
        let mut out: Vec<f64> = grads.slices().concat();
        out.extend_from_slice(gx.data());
        out
    }

    fn groups(&self) -> Vec<(String, Range<usize>)> {
        let mut groups: Vec<(String, Range<usize>)> = OlceParams::LAYER_NAMES
            .iter()
            .zip(self.offsets.windows(2))
            .map(|(name, w)| (name.to_string(), w[0]..w[1]))
            .collect();
        let base = *self.offsets.last().unwrap();
        groups.push(("input".into(), base..base + self.input.len()));
        groups
    }

    fn near_kink(&self, margin: f64) -> bool {
        let enc = self.params.encode_cached(&self.input).expect("probe shapes are fixed");
        let dec = self.params.decode_cached(&enc.probs).expect("probe shapes are fixed");
        let hinge = |t: &Tensor3| t.data().iter().any(|z| z.abs() < margin);
        let tie = |t: &Tensor3| {
            t.data()
                .chunks(t.length())
                .any(|ch| ch.chunks_exact(POOL).any(|w| (w[0].max(0.0) - w[1].max(0.0)).abs() < margin && (w[0] > 0.0 || w[1] > 0.0)))
        };
        hinge(&enc.z1) || hinge(&enc.z2) || hinge(&dec.r2) || tie(&enc.z1) || tie(&enc.z2)
    }
}

/// [`train`] behind the common classifier interface.
#[derive(Debug, Clone, Default)]
pub struct OlceClassifier {
    pub config: TrainConfig,
    pub params: Option<OlceParams>,
    pub log: TrainLog,
}

impl OlceClassifier {
    pub fn new(config: TrainConfig) -> Self {
        Self {
            config,
            params: None,
            log: TrainLog::default(),
        }
    }
}

impl Classifier for OlceClassifier {
    fn name(&self) -> &'static str {
        "olce"
    }

    fn fit(&mut self, data: &dyn SplitView) -> Result<()> {
        let (params, log) = train(data, &self.config)?;
        self.params = Some(params);
        self.log = log;
        Ok(())
    }

    fn predict(&self, sample: &ResponseSample) -> Result<usize> {
        self.params
            .as_ref()
            .ok_or_else(|| Error::Fit("OLCE is not fitted".into()))?
            .classify_sample(sample)
    }

    fn dump(&self) -> Result<serde_json::Value> {
        let ck = self.params.as_ref().map(OlceParams::to_checkpoint);
        Ok(serde_json::json!({ "config": self.config, "checkpoint": ck }))
    }
}
