use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use vaulted_voice::audio::FeatureMatrix;
use vaulted_voice::gmm::{
    choose_closer, closest_index, model_distance, train_model, train_model_traced, GaussianComponent, PhraseModel,
    ScoreDirection, TrainConfig,
};

const DIRS: [ScoreDirection; 2] = [ScoreDirection::GalleryVariance, ScoreDirection::ProbeVariance];

fn arb_component(dim: usize) -> impl Strategy<Value = (u32, Vec<f64>, Vec<f64>)> {
    (
        1u32..100,
        prop::collection::vec(-30.0f64..30.0, dim),
        prop::collection::vec(0.05f64..9.0, dim),
    )
}

fn build(raw: Vec<(u32, Vec<f64>, Vec<f64>)>) -> PhraseModel {
    let total: u32 = raw.iter().map(|c| c.0).sum();
    let components = raw
        .into_iter()
        .map(|(w, mean, variance)| GaussianComponent {
            weight: w as f64 / total as f64,
            mean,
            variance,
        })
        .collect();
    PhraseModel::new(components, "phrase", 50).unwrap()
}

fn arb_model(dim: usize, max_k: usize) -> impl Strategy<Value = PhraseModel> {
    prop::collection::vec(arb_component(dim), 1..=max_k).prop_map(build)
}

fn triple() -> impl Strategy<Value = (PhraseModel, PhraseModel, PhraseModel)> {
    (1usize..6).prop_flat_map(|d| (arb_model(d, 4), arb_model(d, 4), arb_model(d, 4)))
}

/// Frames drawn from a few well-separated blobs.
fn blob_frames(seed: u64, dim: usize, n: usize) -> FeatureMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let centres: Vec<Vec<f64>> = (0..3).map(|_| (0..dim).map(|_| rng.gen_range(-8.0..8.0)).collect()).collect();
    let frames = (0..n)
        .map(|i| centres[i % 3].iter().map(|c| c + rng.gen_range(-1.0..1.0) * rng.gen_range(0.2..2.0)).collect())
        .collect();
    FeatureMatrix::new(frames).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn self_distance_is_zero(m in (1usize..8).prop_flat_map(|d| arb_model(d, 5))) {
        for dir in DIRS {
            prop_assert_eq!(model_distance(&m, &m, dir).unwrap(), 0.0);
        }
    }

    #[test]
    fn distance_is_finite_and_nonnegative((p, g, _) in triple()) {
        for dir in DIRS {
            let d = model_distance(&p, &g, dir).unwrap();
            prop_assert!(d.is_finite() && d >= 0.0);
        }
    }

    #[test]
    fn moving_probe_means_away_increases_distance(
        (probe, reference) in (1usize..6).prop_flat_map(|d| (arb_model(d, 4), arb_model(d, 1))),
        t in 0.01f64..3.0,
    ) {
        // one reference component, so every probe component keeps its match
        let mu = &reference.components()[0].mean;
        let moved: Vec<GaussianComponent> = probe
            .components()
            .iter()
            .map(|c| GaussianComponent {
                weight: c.weight,
                mean: c.mean.iter().zip(mu).map(|(x, m)| x + t * (x - m)).collect(),
                variance: c.variance.clone(),
            })
            .collect();
        let moved = PhraseModel::new(moved, "phrase", 50).unwrap();
        for dir in DIRS {
            let before = model_distance(&probe, &reference, dir).unwrap();
            let after = model_distance(&moved, &reference, dir).unwrap();
            if before > 0.0 {
                prop_assert!(after > before, "{dir}: {before} -> {after}");
            } else {
                prop_assert_eq!(after, 0.0);
            }
        }
    }

    #[test]
    fn swapping_candidates_flips_the_choice((p, a, b) in triple()) {
        for dir in DIRS {
            let da = model_distance(&p, &a, dir).unwrap();
            let db = model_distance(&p, &b, dir).unwrap();
            let ab = choose_closer(&p, &a, &b, dir).unwrap();
            let ba = choose_closer(&p, &b, &a, dir).unwrap();
            if da == db {
                prop_assert_eq!(ab, ba);
            } else {
                prop_assert_eq!(ab, ba.flipped());
            }
            let idx = closest_index(&p, &[&a, &b], dir).unwrap();
            prop_assert_eq!(idx == 0, ab == vaulted_voice::gmm::Choice::First);
        }
    }

    #[test]
    fn component_order_is_canonical(raw in (1usize..5).prop_flat_map(|d| prop::collection::vec(arb_component(d), 1..6)), rot in 0usize..6) {
        let a = build(raw.clone());
        let mut shuffled = raw;
        let len = shuffled.len();
        shuffled.rotate_left(rot % len);
        let b = build(shuffled);
        prop_assert_eq!(a.to_bytes(), b.to_bytes());
        for w in a.components().windows(2) {
            prop_assert!(w[0].weight >= w[1].weight);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn training_is_deterministic_and_monotone(seed in any::<u64>(), dim in 1usize..6, k in 1usize..6, rng_seed in any::<u64>()) {
        let feats = blob_frames(seed, dim, 150);
        let cfg = TrainConfig { num_components: k, rng_seed, ..TrainConfig::default() };
        let (m, trace) = train_model_traced(&feats, "phrase", &cfg).unwrap();
        prop_assert!(trace.windows(2).all(|w| w[1] > w[0]), "{trace:?}");
        let again = train_model(&feats, "phrase", &cfg).unwrap();
        prop_assert_eq!(m.to_bytes(), again.to_bytes());
        let total: f64 = m.components().iter().map(|c| c.weight).sum();
        prop_assert!((total - 1.0).abs() < 1e-9);
        prop_assert!(m.components().iter().all(|c| c.variance.iter().all(|v| *v >= cfg.variance_floor)));
    }
}
