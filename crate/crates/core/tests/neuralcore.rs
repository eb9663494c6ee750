use olce::nn::gradcheck::{grad_check, GradCheckable, DEFAULT_STEP, DEFAULT_TOLERANCE};
use olce::nn::loss::mse_grad;
use olce::nn::{
    adam_step, conv1d_backward, conv1d_forward, cross_entropy, fully_connected, maxpool1d, mse, relu, softmax,
    transposed_conv1d_backward, transposed_conv1d_forward, upsample1d, AdamState, LayerParams, Tensor3,
};
use olce::signalio::LabelVector;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_tensor(rng: &mut ChaCha8Rng, c: usize, l: usize) -> Tensor3 {
    Tensor3::from_vec(c, l, (0..c * l).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap()
}

fn random_params(rng: &mut ChaCha8Rng, p: LayerParams) -> LayerParams {
    let mut p = p.init_uniform(rng);
    p.bias.iter_mut().for_each(|b| *b = rng.gen_range(-0.5..0.5));
    p
}

#[test]
fn table4_layer_shapes() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let x = random_tensor(&mut rng, 10, 120);
    let z1 = conv1d_forward(&x, &LayerParams::conv(7, 10, 5)).unwrap();
    assert_eq!(z1.dims(), (7, 1, 116));
    assert_eq!(maxpool1d(&z1, 2).dims(), (7, 1, 58));
    assert_eq!(maxpool1d(&random_tensor(&mut rng, 12, 57), 2).dims(), (12, 1, 28));
    assert_eq!(upsample1d(&random_tensor(&mut rng, 12, 28), 2).dims(), (12, 1, 56));
    let t2 = transposed_conv1d_forward(&random_tensor(&mut rng, 12, 56), &LayerParams::transposed_conv(12, 7, 3)).unwrap();
    assert_eq!(t2.dims(), (7, 1, 58));
    let t1 = transposed_conv1d_forward(&random_tensor(&mut rng, 7, 116), &LayerParams::transposed_conv(7, 10, 5)).unwrap();
    assert_eq!(t1.dims(), (10, 1, 120));
    let flat = random_tensor(&mut rng, 12, 28);
    assert_eq!(fully_connected(flat.data(), &LayerParams::fully_connected(7, 336)).unwrap().len(), 7);
}

#[test]
fn conv_matches_triple_loop() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let x = random_tensor(&mut rng, 2, 9);
    let p = random_params(&mut rng, LayerParams::conv(3, 2, 3));
    let y = conv1d_forward(&x, &p).unwrap();
    for o in 0..3 {
        for t in 0..7 {
            let mut acc = p.bias[o];
            for i in 0..2 {
                for k in 0..3 {
                    acc += p.weights[(o * 2 + i) * 3 + k] * x.channel(i)[t + k];
                }
            }
            assert!((y.channel(o)[t] - acc).abs() < 1e-12);
        }
    }
}

#[test]
fn identity_kernel_passes_input_and_gradient() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let x = random_tensor(&mut rng, 1, 10);
    let mut p = LayerParams::conv(1, 1, 1);
    p.weights[0] = 1.0;
    assert_eq!(conv1d_forward(&x, &p).unwrap(), x);
    let g = random_tensor(&mut rng, 1, 10);
    let (gx, _) = conv1d_backward(&x, &p, &g).unwrap();
    assert_eq!(gx, g);
}

#[test]
fn zero_upstream_gives_zero_gradients() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let x = random_tensor(&mut rng, 3, 12);
    let p = random_params(&mut rng, LayerParams::conv(4, 3, 3));
    let (gx, gp) = conv1d_backward(&x, &p, &Tensor3::zeros(4, 10)).unwrap();
    assert!(gx.data().iter().all(|&v| v == 0.0));
    assert!(gp.weights.iter().chain(&gp.bias).all(|&v| v == 0.0));
    let tp = random_params(&mut rng, LayerParams::transposed_conv(3, 4, 3));
    let (gx, gp) = transposed_conv1d_backward(&x, &tp, &Tensor3::zeros(4, 14)).unwrap();
    assert!(gx.data().iter().all(|&v| v == 0.0));
    assert!(gp.weights.iter().chain(&gp.bias).all(|&v| v == 0.0));
}

#[test]
fn small_layer_examples() {
    let x = Tensor3::from_vec(1, 4, vec![1.0, 3.0, 2.0, 2.0]).unwrap();
    assert_eq!(maxpool1d(&x, 2).data(), &[3.0, 2.0]);
    let x = Tensor3::from_vec(1, 2, vec![4.0, -1.0]).unwrap();
    assert_eq!(upsample1d(&x, 2).data(), &[4.0, 4.0, -1.0, -1.0]);
    let x = Tensor3::from_vec(1, 3, vec![-1.0, 0.0, 2.0]).unwrap();
    assert_eq!(relu(&x).data(), &[0.0, 0.0, 2.0]);
    for p in softmax(&[0.0; 7]).as_slice() {
        assert!((p - 1.0 / 7.0).abs() < 1e-15);
    }
}

#[test]
fn loss_examples() {
    let t = LabelVector::one_hot(2, 7).unwrap();
    assert!(cross_entropy(&t, &t).unwrap() <= 1e-11);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let a = random_tensor(&mut rng, 3, 5);
    assert_eq!(mse(&a, &a).unwrap(), 0.0);
    assert!(mse_grad(a.data(), a.data()).iter().all(|&g| g == 0.0));
}

#[test]
fn adam_descends_on_square() {
    let mut w = [1.0];
    let mut state = AdamState::new(1);
    let g = [2.0 * w[0]];
    adam_step(&mut w, &g, &mut state, 0.1).unwrap();
    assert!(w[0] < 1.0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn conv_shape_algebra(c_in in 1usize..5, c_out in 1usize..5, k in 1usize..6, extra in 0usize..20, seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let l = k + extra;
        let x = random_tensor(&mut rng, c_in, l);
        let y = conv1d_forward(&x, &LayerParams::conv(c_out, c_in, k)).unwrap();
        prop_assert_eq!(y.dims(), (c_out, 1, l - k + 1));
        let z = transposed_conv1d_forward(&y, &LayerParams::transposed_conv(c_out, c_in, k)).unwrap();
        prop_assert_eq!(z.dims(), (c_in, 1, l));
        prop_assert_eq!(maxpool1d(&x, 2).length(), l / 2);
    }

    #[test]
    fn transposed_conv_is_adjoint_of_conv(c_in in 1usize..5, c_out in 1usize..5, k in 1usize..6, extra in 0usize..20, seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let l = k + extra;
        let mut p = LayerParams::conv(c_out, c_in, k).init_uniform(&mut rng);
        p.weights.iter_mut().for_each(|w| *w = rng.gen_range(-1.0..1.0));
        // same weight buffer reinterpreted as (in = c_out, out = c_in, k)
        let mut tp = LayerParams::transposed_conv(c_out, c_in, k);
        tp.weights.clone_from(&p.weights);
        let x = random_tensor(&mut rng, c_in, l);
        let y = random_tensor(&mut rng, c_out, l - k + 1);
        let lhs = conv1d_forward(&x, &p).unwrap().dot(&y);
        let rhs = x.dot(&transposed_conv1d_forward(&y, &tp).unwrap());
        prop_assert!((lhs - rhs).abs() < 1e-10, "{} vs {}", lhs, rhs);
    }

    #[test]
    fn upsample_then_pool_is_identity(c in 1usize..6, l in 1usize..30, seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = random_tensor(&mut rng, c, l);
        prop_assert_eq!(maxpool1d(&upsample1d(&x, 2), 2), x);
    }

    #[test]
    fn softmax_shift_invariance(logits in prop::collection::vec(-20.0f64..20.0, 7), shift in -50.0f64..50.0) {
        let a = softmax(&logits);
        let shifted: Vec<f64> = logits.iter().map(|v| v + shift).collect();
        let b = softmax(&shifted);
        prop_assert_eq!(a.argmax(), b.argmax());
        for (p, q) in a.as_slice().iter().zip(b.as_slice()) {
            prop_assert!((p - q).abs() < 1e-12);
        }
        prop_assert!((a.as_slice().iter().sum::<f64>() - 1.0).abs() < 1e-9);
    }
}

/// One layer followed by a fixed random linear read-out, as a scalar loss.
struct LayerProbe {
    kind: u8,
    params: LayerParams,
    x: Tensor3,
    readout: Vec<f64>,
}

impl LayerProbe {
    fn new(kind: u8, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (params, x) = match kind {
            0 => (random_params(&mut rng, LayerParams::conv(4, 3, 3)), random_tensor(&mut rng, 3, 11)),
            1 => (random_params(&mut rng, LayerParams::transposed_conv(3, 4, 3)), random_tensor(&mut rng, 3, 11)),
            _ => (random_params(&mut rng, LayerParams::fully_connected(5, 12)), random_tensor(&mut rng, 1, 12)),
        };
        let mut probe = Self {
            kind,
            params,
            x,
            readout: vec![],
        };
        let n = probe.forward().len();
        probe.readout = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        probe
    }

    fn forward(&self) -> Vec<f64> {
        match self.kind {
            0 => conv1d_forward(&self.x, &self.params).unwrap().into_vec(),
            1 => transposed_conv1d_forward(&self.x, &self.params).unwrap().into_vec(),
            _ => fully_connected(self.x.data(), &self.params).unwrap(),
        }
    }

    fn np(&self) -> usize {
        self.params.weights.len() + self.params.bias.len()
    }
}

impl GradCheckable for LayerProbe {
    fn num_coordinates(&self) -> usize {
        self.np() + self.x.len()
    }

    fn get(&self, i: usize) -> f64 {
        let nw = self.params.weights.len();
        if i < nw {
            self.params.weights[i]
        } else if i < self.np() {
            self.params.bias[i - nw]
        } else {
            self.x.data()[i - self.np()]
        }
    }

    fn set(&mut self, i: usize, v: f64) {
        let nw = self.params.weights.len();
        let np = self.np();
        if i < nw {
            self.params.weights[i] = v;
        } else if i < np {
            self.params.bias[i - nw] = v;
        } else {
            self.x.data_mut()[i - np] = v;
        }
    }

    fn loss(&self) -> f64 {
        self.forward().iter().zip(&self.readout).map(|(a, b)| a * b).sum()
    }

    fn gradient(&self) -> Vec<f64> {
        let (gx, gp) = match self.kind {
            0 => {
                let g = Tensor3::from_vec(4, 9, self.readout.clone()).unwrap();
                let (gx, gp) = conv1d_backward(&self.x, &self.params, &g).unwrap();
                (gx.into_vec(), gp)
            }
            1 => {
                let g = Tensor3::from_vec(4, 13, self.readout.clone()).unwrap();
                let (gx, gp) = transposed_conv1d_backward(&self.x, &self.params, &g).unwrap();
                (gx.into_vec(), gp)
            }
            _ => olce::nn::fully_connected_backward(self.x.data(), &self.params, &self.readout).unwrap(),
        };
        gp.weights.iter().chain(&gp.bias).chain(&gx).copied().collect()
    }
}

#[test]
fn linear_layers_pass_gradient_check_tightly() {
    for kind in 0..3 {
        let mut probe = LayerProbe::new(kind, 40 + kind as u64);
        let report = grad_check(&mut probe, DEFAULT_STEP, DEFAULT_TOLERANCE);
        assert!(report.pass, "layer {kind}: {report:?}");
        assert!(report.max_relative_error < 1e-9, "layer {kind}: {}", report.max_relative_error);
    }
}

#[test]
fn zero_tolerance_reports_failure() {
    let mut probe = LayerProbe::new(0, 9);
    assert!(!grad_check(&mut probe, DEFAULT_STEP, 0.0).pass);
}
