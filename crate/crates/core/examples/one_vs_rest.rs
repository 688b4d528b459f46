//! Multi-class utterance labels through one binary student per class.

use pairdistill::corpus::SegmentOptions;
use pairdistill::scores::aggregate;
use pairdistill::simulator::{generate_world, simulate_draws, WorldConfig};
use pairdistill::student::{one_vs_rest_predict, one_vs_rest_train, LossKind, OneVsRestConfig, TrainConfig};

fn main() -> pairdistill::Result<()> {
    let world = WorldConfig {
        d: 12,
        n_classes: 4,
        n_dialogues: 300,
        seed: 21,
        ..WorldConfig::default()
    };
    let corpus = generate_world(&world)?;
    let mut scores = Vec::new();
    for class in 0..world.n_classes {
        for draws in simulate_draws(&corpus, 15, &world, class)? {
            scores.push(aggregate(&draws)?);
        }
    }
    let segment_options = SegmentOptions {
        window: Some(1),
        recency: 1.0,
    };
    let segments = corpus.segments(&segment_options)?;

    for loss in [LossKind::Pointwise, LossKind::Pairwise] {
        let config = OneVsRestConfig {
            segments: segment_options,
            train: TrainConfig {
                loss,
                epochs: 40,
                ..TrainConfig::default()
            },
            ..OneVsRestConfig::default()
        };
        let models = one_vs_rest_train(&corpus, &scores, world.n_classes, &config)?;
        let (mut correct, mut total) = (0, 0);
        for (dialogue, segs) in corpus.dialogues.iter().zip(&segments) {
            for (u, seg) in dialogue.utterances.iter().zip(segs) {
                let gold = u.gold.as_ref().expect("simulated utterances carry gold");
                let truth = gold.iter().position(|&g| g == 1).unwrap_or(0);
                correct += usize::from(one_vs_rest_predict(&models, &seg.features)? == truth);
                total += 1;
            }
        }
        println!(
            "{loss:?} students: training-set accuracy {:.3}",
            correct as f64 / total as f64
        );
    }
    Ok(())
}
