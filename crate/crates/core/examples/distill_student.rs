//! Pretrain a student on ensemble scores, fine-tune on a small gold subset,
//! and compare the three training arms on held-out dialogues.

use pairdistill::corpus::SegmentOptions;
use pairdistill::scores::aggregate;
use pairdistill::simulator::{generate_world, simulate_draws, WorldConfig};
use pairdistill::student::{pipeline_with_segments, Arm, PipelineConfig, TrainConfig};

fn main() -> pairdistill::Result<()> {
    let world = WorldConfig {
        d: 32,
        seed: 5,
        ..WorldConfig::default()
    };
    let corpus = generate_world(&world)?;
    let scores: Vec<_> = simulate_draws(&corpus, 30, &world, 0)?
        .iter()
        .map(aggregate)
        .collect::<pairdistill::Result<_>>()?;

    let config = PipelineConfig {
        segments: SegmentOptions {
            window: None,
            recency: 0.3,
        },
        finetune: TrainConfig {
            epochs: 30,
            ..TrainConfig::default()
        },
        seed: 9,
        ..PipelineConfig::default()
    };
    let segments = corpus.segments(&config.segments)?;

    println!("{:<20} {:>8} {:>8}", "arm", "1% gold", "5% gold");
    for arm in Arm::ALL {
        let mut row = format!("{:<20}", arm.name());
        for fraction in [0.01, 0.05] {
            let outcome = pipeline_with_segments(&corpus, &segments, &scores, fraction, arm, &config)?;
            row.push_str(&format!(" {:>8.3}", outcome.accuracy));
        }
        println!("{row}");
    }
    Ok(())
}
