use std::cell::RefCell;
use std::collections::BTreeSet;

use olce::nn::Tensor3;
use olce::olce::{export_decoded, train, OlceGeometry, OlceParams, TrainConfig};
use olce::signalio::{load_sample, stratified_split, Dataset, LabelVector, ResponseSample, SplitView};
use olce::synthgen::{generate, SynthConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_input(seed: u64) -> Tensor3 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Tensor3::from_vec(10, 120, (0..1200).map(|_| rng.gen_range(-0.5..0.5)).collect()).unwrap()
}

fn small_data() -> Dataset {
    let cfg = SynthConfig {
        samples_per_class: 8,
        ..SynthConfig::preset("desk").unwrap()
    };
    stratified_split(&generate(&cfg).unwrap().normalized(), 0.25, 1).unwrap()
}

fn quick_cfg(seed: u64) -> TrainConfig {
    TrainConfig {
        epochs: 3,
        seed,
        ..TrainConfig::default()
    }
}

#[test]
fn full_shape_chain() {
    let p = OlceParams::new(OlceGeometry::default(), 0).unwrap();
    let trace = p.shape_trace(&random_input(1)).unwrap();
    let want = [
        (10, 1, 120),
        (7, 1, 116),
        (7, 1, 58),
        (12, 1, 56),
        (12, 1, 28),
        (7, 1, 1),
        (336, 1, 1),
        (12, 1, 56),
        (7, 1, 58),
        (7, 1, 116),
        (10, 1, 120),
    ];
    assert_eq!(trace, want);
    assert_eq!(p.features(&random_input(1)).unwrap().len(), 336);
}

#[test]
fn encoder_output_is_a_distribution_and_deterministic() {
    let a = OlceParams::new(OlceGeometry::default(), 5).unwrap();
    let b = OlceParams::new(OlceGeometry::default(), 5).unwrap();
    for s in 0..5 {
        let x = random_input(s);
        let y = a.encode(&x).unwrap();
        assert_eq!(y.len(), 7);
        assert!((y.as_slice().iter().sum::<f64>() - 1.0).abs() < 1e-9);
        assert_eq!(y, b.encode(&x).unwrap());
    }
}

#[test]
fn decode_of_one_hot_has_input_shape() {
    let p = OlceParams::new(OlceGeometry::default(), 2).unwrap();
    for c in 0..7 {
        let y = LabelVector::one_hot(c, 7).unwrap();
        let out = p.decode(&y).unwrap();
        assert_eq!(out.dims(), (10, 1, 120));
        assert_eq!(out, p.decode(&y).unwrap());
    }
    assert!(p.decode(&LabelVector::one_hot(0, 6).unwrap()).is_err());
}

#[test]
fn wrong_input_shape_is_rejected() {
    let p = OlceParams::new(OlceGeometry::default(), 2).unwrap();
    assert!(p.encode(&Tensor3::zeros(10, 119)).is_err());
    assert!(OlceParams::new(OlceGeometry { length: 118, ..OlceGeometry::default() }, 0).is_err());
}

#[test]
fn training_is_bitwise_deterministic() {
    let data = small_data();
    let (a, la) = train(&data, &quick_cfg(4)).unwrap();
    let (b, lb) = train(&data, &quick_cfg(4)).unwrap();
    assert_eq!(a, b);
    assert_eq!(la, lb);
    let (c, _) = train(&data, &quick_cfg(5)).unwrap();
    assert_ne!(a, c);
}

#[test]
fn zero_lambda_leaves_decoder_at_init() {
    let data = small_data();
    let cfg = TrainConfig {
        lambda_recon: 0.0,
        ..quick_cfg(8)
    };
    let (trained, log) = train(&data, &cfg).unwrap();
    let init = OlceParams::new(trained.geometry, 8).unwrap();
    assert_eq!(trained.fc_dec, init.fc_dec);
    assert_eq!(trained.tconv2, init.tconv2);
    assert_eq!(trained.tconv1, init.tconv1);
    assert_ne!(trained.fc_enc, init.fc_enc);
    // the reconstruction error is still logged
    assert!(log.epochs.iter().all(|e| e.mse > 0.0));
    assert!(log.to_csv().starts_with("epoch,ce,mse\n"));
}

#[test]
fn tied_decoder_stays_tied() {
    let data = small_data();
    let cfg = TrainConfig {
        tied_decoder: true,
        ..quick_cfg(3)
    };
    let (p, _) = train(&data, &cfg).unwrap();
    assert_eq!(p.conv1.weights, p.tconv1.weights);
    assert_eq!(p.conv2.weights, p.tconv2.weights);
    let (k, f) = (p.fc_enc.shape[0], p.fc_enc.shape[1]);
    for o in 0..k {
        for i in 0..f {
            assert_eq!(p.fc_enc.weights[o * f + i], p.fc_dec.weights[i * k + o]);
        }
    }
}

/// Records every sample index the trainer reads.
struct Tracking<'a> {
    inner: &'a Dataset,
    seen: RefCell<BTreeSet<usize>>,
}

impl SplitView for Tracking<'_> {
    fn num_classes(&self) -> usize {
        self.inner.num_classes()
    }

    fn train_indices(&self) -> olce::Result<Vec<usize>> {
        self.inner.train_indices()
    }

    fn sample(&self, idx: usize) -> &ResponseSample {
        self.seen.borrow_mut().insert(idx);
        self.inner.sample(idx)
    }
}

#[test]
fn every_model_reads_only_training_samples() {
    use olce::baselines::*;
    use olce::olce::OlceClassifier;
    let data = small_data();
    let train_set: BTreeSet<usize> = data.train_indices().unwrap().into_iter().collect();
    let mut models: Vec<Box<dyn Classifier>> = vec![
        Box::new(OlceClassifier::new(quick_cfg(0))),
        Box::new(Lda::default()),
        Box::new(Mlp::new(MlpConfig { epochs: 1, ..MlpConfig::default() })),
        Box::new(DecisionTree::default()),
        Box::new(PcaLda::new(10)),
        Box::new(CnnSvm::new(CnnSvmConfig {
            encoder: quick_cfg(0),
            svm: SvmConfig { epochs: 5, ..SvmConfig::default() },
        })),
    ];
    for m in models.iter_mut() {
        let view = Tracking {
            inner: &data,
            seen: RefCell::new(BTreeSet::new()),
        };
        m.fit(&view).unwrap();
        let seen = view.seen.into_inner();
        assert!(seen.is_subset(&train_set), "{} read test samples", m.name());
        assert!(!seen.is_empty());
        for s in &data.samples {
            assert!(m.predict(s).unwrap() < 7, "{}", m.name());
        }
        assert!(m.dump().unwrap().is_object());
    }
}

#[test]
fn export_writes_reloadable_pairs() {
    let data = small_data();
    let p = OlceParams::new(OlceGeometry::default(), 1).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let written = export_decoded(&p, &data, &[3], dir.path()).unwrap();
    assert_eq!(written.len(), 2);
    let orig = load_sample(&written[0], data.samples[3].label).unwrap();
    let decoded = load_sample(&written[1], data.samples[3].label).unwrap();
    assert_eq!((decoded.channels(), decoded.length()), (10, 120));
    let src = data.samples[3].data();
    for (a, b) in src.iter().zip(orig.data()) {
        assert!((a - b).abs() <= 1e-8 * a.abs().max(1e-12));
    }
    let direct = p.reconstruct(&Tensor3::from_sample(&data.samples[3])).unwrap();
    for (a, b) in direct.data().iter().zip(decoded.data()) {
        assert!((a - b).abs() <= 1e-8 * a.abs().max(1e-12));
    }
}

#[test]
fn checkpoint_round_trip() {
    let p = OlceParams::new(OlceGeometry::default(), 12).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("ck.json");
    p.save(&path).unwrap();
    assert_eq!(OlceParams::load(&path).unwrap(), p);
    std::fs::write(&path, "{\"format\": \"other\"}").unwrap();
    assert!(OlceParams::load(&path).is_err());
}
