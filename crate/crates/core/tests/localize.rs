use echoloc::localize::layers::softmax;
use echoloc::localize::{argmax, ConvBlock, Model, ModelConfig, Network, Task};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

proptest! {
    #[test]
    fn softmax_sums_to_one(logits in prop::collection::vec(-700.0f64..700.0, 1..20)) {
        let p = softmax(&logits);
        prop_assert!((p.iter().sum::<f64>() - 1.0).abs() <= 1e-6);
        prop_assert!(p.iter().all(|v| v.is_finite() && *v >= 0.0));
    }

    #[test]
    fn argmax_ignores_positive_scaling(logits in prop::collection::vec(-50.0f64..50.0, 1..20), scale in 0.01f64..100.0) {
        let scaled: Vec<f64> = logits.iter().map(|v| v * scale).collect();
        prop_assert_eq!(argmax(&logits), argmax(&scaled));
        prop_assert_eq!(argmax(&softmax(&logits)), argmax(&logits));
    }

    #[test]
    fn models_round_trip_through_bytes(
        rows in 4usize..12, cols in 4usize..12, channels in 1usize..4, bn in any::<bool>(),
        dense in prop::collection::vec(1usize..8, 0..3), regions in any::<bool>(), seed in any::<u64>(),
    ) {
        let task = if regions { Task::Regions } else { Task::Coords };
        let config = ModelConfig {
            task,
            input: [rows, cols],
            conv: vec![ConvBlock { kernel: 3, channels, pool: 2, batch_norm: bn }],
            dense,
            ..ModelConfig::default()
        };
        let classes: Vec<String> = if regions { (0..4).map(|i| format!("r{i}")).collect() } else { vec![] };
        let mut network = Network::build(&config, if regions { 4 } else { 2 }, &mut ChaCha8Rng::seed_from_u64(seed));
        network.round_to_f32();
        let model = Model {
            config,
            classes,
            feature_mean: -37.5,
            feature_std: 11.25,
            target_mean: [7.0, 3.5],
            target_std: [4.0, 2.0],
            network,
        };
        let back = Model::from_bytes(&model.to_bytes()).unwrap();
        prop_assert_eq!(&back, &model);
        prop_assert_eq!(back.checksum(), model.checksum());
    }
}
