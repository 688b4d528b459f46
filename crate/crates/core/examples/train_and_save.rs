//! Train a small MLP student on soft labels, then save and reload it.

use pairdistill::corpus::SegmentOptions;
use pairdistill::scores::aggregate;
use pairdistill::simulator::{generate_world, simulate_draws, WorldConfig};
use pairdistill::student::{loss_trace_csv, train, Architecture, PointExample, StudentModel, TrainConfig, TrainData};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let world = WorldConfig {
        d: 6,
        n_dialogues: 200,
        seed: 3,
        ..WorldConfig::default()
    };
    let corpus = generate_world(&world)?;
    let draws = simulate_draws(&corpus, 20, &world, 0)?;
    let segments = corpus.segments(&SegmentOptions::default())?;
    let mut data = Vec::new();
    for (segs, d) in segments.iter().zip(&draws) {
        let s = aggregate(d)?.s;
        for seg in segs {
            data.push(PointExample {
                features: seg.features.clone(),
                target: s[seg.end_index - 1],
            });
        }
    }

    let arch = Architecture::Mlp1 { hidden: 8 };
    let config = TrainConfig {
        epochs: 50,
        ..TrainConfig::default()
    };
    let outcome = train(
        StudentModel::init(arch, corpus.d, 1),
        TrainData::Pointwise(&data),
        &config,
    )?;
    let trace = loss_trace_csv(&outcome.trace);
    for line in trace.lines().step_by(10) {
        println!("{line}");
    }

    let dir = tempfile::tempdir()?;
    let path = dir.path().join("student.json");
    outcome.model.save(&path)?;
    let loaded = StudentModel::load(&path)?;
    let x = &data[0].features;
    println!(
        "saved {} parameters; logit before {:.6}, after reload {:.6}",
        loaded.parameter_count(),
        outcome.model.predict_logit(x)?,
        loaded.predict_logit(x)?
    );
    assert_eq!(loaded, outcome.model);
    Ok(())
}
