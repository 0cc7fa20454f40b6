//! In-painter training behaviour on small images.

use lipsync_core::conditioner::{make_conditioned_pair, ConditionedPair};
use lipsync_core::image::Image;
use lipsync_core::inpaint::{infer_frame, train_inpainter, InpainterConfig, InpainterModel};
use lipsync_core::synth::{render_face, FaceParams};
use lipsync_core::Point;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

fn small_config(epochs: usize) -> InpainterConfig {
    InpainterConfig {
        image_size: (32, 32),
        depth: 2,
        base_channels: 8,
        learning_rate: 1e-2,
        epochs,
        batch_size: 4,
        seed: 3,
    }
}

fn small_pairs(seed: u64, n: usize) -> Vec<ConditionedPair> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let p = FaceParams {
                mouth_open: rng.gen_range(0.0..1.0),
                mouth_wide: rng.gen_range(0.0..1.0),
                center: Point::new(16.0 + rng.gen_range(-0.5..0.5), 15.0 + rng.gen_range(-0.5..0.5)),
                rotation: rng.gen_range(-0.1..0.1),
                scale: 11.0,
                image_size: (32, 32),
                ..FaceParams::neutral()
            };
            let s = render_face(&p).unwrap();
            make_conditioned_pair(&s.image, &s.landmarks).unwrap()
        })
        .collect()
}

#[test]
fn learns_a_constant_target() {
    let color = [0.3, 0.6, 0.2];
    let pairs: Vec<ConditionedPair> = small_pairs(1, 8)
        .into_iter()
        .map(|p| ConditionedPair {
            target_image: Image::filled(32, 32, color),
            ..p
        })
        .collect();
    let trained = train_inpainter(&pairs, &small_config(150)).unwrap();
    let last = *trained.loss_history.last().unwrap();
    assert!(last < 0.01, "final L1 {last}");
}

#[test]
fn training_lowers_loss_and_fits_training_pairs() {
    let pairs = small_pairs(2, 16);
    let trained = train_inpainter(&pairs, &small_config(60)).unwrap();
    let h = &trained.loss_history;
    assert!(h.iter().all(|l| l.is_finite()));
    assert!(h[h.len() - 1] < h[0], "{} !< {}", h[h.len() - 1], h[0]);
    let final_loss = h[h.len() - 1];
    let out = infer_frame(&trained.model, &pairs[0].input_image).unwrap();
    let l1 = out
        .data()
        .iter()
        .zip(pairs[0].target_image.data())
        .map(|(a, b)| (a - b).abs())
        .sum::<f64>()
        / out.data().len() as f64;
    assert!(l1 <= 2.0 * final_loss, "pair L1 {l1}, final loss {final_loss}");
}

#[test]
fn zero_epochs_returns_initialization() {
    let config = small_config(0);
    let trained = train_inpainter(&small_pairs(3, 2), &config).unwrap();
    assert!(trained.loss_history.is_empty());
    assert_eq!(trained.model, InpainterModel::init(&config).unwrap());
}

#[test]
fn frames_are_independent_of_order_and_threads() {
    let model = InpainterModel::init(&small_config(0)).unwrap();
    let inputs: Vec<Image> = small_pairs(4, 12).into_iter().map(|p| p.input_image).collect();
    let forward: Vec<Image> = inputs.iter().map(|i| infer_frame(&model, i).unwrap()).collect();
    let mut backward: Vec<Image> = inputs.iter().rev().map(|i| infer_frame(&model, i).unwrap()).collect();
    backward.reverse();
    let parallel: Vec<Image> = inputs.par_iter().map(|i| infer_frame(&model, i).unwrap()).collect();
    assert_eq!(forward, backward);
    assert_eq!(forward, parallel);
    assert!(forward.iter().flat_map(|f| f.data()).all(|v| (0.0..=1.0).contains(v)));
}

#[test]
fn training_is_deterministic() {
    let pairs = small_pairs(5, 6);
    let a = train_inpainter(&pairs, &small_config(3)).unwrap();
    let b = train_inpainter(&pairs, &small_config(3)).unwrap();
    assert_eq!(a, b);
    assert_eq!(
        serde_json::to_string(&a.model.to_checkpoint()).unwrap(),
        serde_json::to_string(&b.model.to_checkpoint()).unwrap()
    );
}
