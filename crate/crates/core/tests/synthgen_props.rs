use olce::signalio::Dataset;
use olce::synthgen::{class_kinetics, generate, SynthConfig, AMPLITUDE_RANGE, PRESETS, TAU_RANGE};
use proptest::prelude::*;

fn cfg(seed: u64, jitter: f64, sigma: f64) -> SynthConfig {
    SynthConfig {
        num_classes: 4,
        samples_per_class: 6,
        channels: 3,
        length: 24,
        noise_sigma: sigma,
        drift_scale: 0.01,
        within_class_jitter: jitter,
        seed,
    }
}

fn class_means(ds: &Dataset) -> Vec<Vec<f64>> {
    (0..ds.num_classes)
        .map(|c| {
            let members: Vec<_> = ds.samples.iter().filter(|s| s.label == c).collect();
            let n = members.len() as f64;
            (0..members[0].data().len())
                .map(|i| members.iter().map(|s| s.data()[i]).sum::<f64>() / n)
                .collect()
        })
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn deterministic_and_well_formed(seed in any::<u64>(), jitter in 0.0f64..0.9, sigma in 0.0f64..0.3) {
        let c = cfg(seed, jitter, sigma);
        let a = generate(&c).unwrap();
        prop_assert_eq!(&a, &generate(&c).unwrap());
        prop_assert_eq!(a.class_counts(), vec![6; 4]);
        prop_assert!(a.samples.iter().all(|s| s.data().iter().all(|v| v.is_finite())));
        let ids: std::collections::BTreeSet<_> = a.samples.iter().map(|s| s.source_id.clone()).collect();
        prop_assert_eq!(ids.len(), a.len());
    }

    #[test]
    fn kinetics_stay_in_range(seed in any::<u64>()) {
        let c = cfg(seed, 0.5, 0.1);
        for class in class_kinetics(&c) {
            for k in class {
                prop_assert!((AMPLITUDE_RANGE.0..AMPLITUDE_RANGE.1).contains(&k.amplitude));
                prop_assert!((TAU_RANGE.0..TAU_RANGE.1).contains(&k.tau));
                prop_assert!(k.drift >= 0.0 && k.drift <= c.drift_scale);
                prop_assert!(k.drift_sign == 1.0 || k.drift_sign == -1.0);
            }
        }
    }
}

#[test]
fn degenerate_generator_gives_identical_class_members() {
    let ds = generate(&cfg(3, 0.0, 0.0)).unwrap();
    for c in 0..4 {
        let members: Vec<_> = ds.samples.iter().filter(|s| s.label == c).collect();
        assert!(members.windows(2).all(|w| w[0].data() == w[1].data()));
    }
}

#[test]
fn noise_does_not_move_class_means_far() {
    // with many samples the per-class mean approaches the noiseless response
    let base = SynthConfig {
        samples_per_class: 400,
        ..cfg(5, 0.0, 0.0)
    };
    let noisy = SynthConfig {
        noise_sigma: 0.2,
        ..base.clone()
    };
    let a = class_means(&generate(&base).unwrap());
    let b = class_means(&generate(&noisy).unwrap());
    for (x, y) in a.iter().flatten().zip(b.iter().flatten()) {
        assert!((x - y).abs() < 0.05);
    }
}

#[test]
fn every_preset_is_valid() {
    for p in PRESETS {
        let c = SynthConfig::preset(p).unwrap();
        c.validate().unwrap();
        assert_eq!((c.num_classes, c.samples_per_class, c.channels, c.length), (7, 100, 10, 120));
    }
}
