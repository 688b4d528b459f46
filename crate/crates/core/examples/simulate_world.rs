//! Generate a synthetic dialogue corpus, query a simulated labeler ensemble,
//! and export both in the files the ingestion path reads back.

use pairdistill::scores::{aggregate, hard_labels, scores_to_jsonl};
use pairdistill::simulator::{generate_world, simulate_draws, WorldConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let config = WorldConfig {
        d: 8,
        n_dialogues: 50,
        seed: 42,
        ..WorldConfig::default()
    };
    let corpus = generate_world(&config)?;
    println!(
        "{} dialogues, {} utterances, d = {}",
        corpus.len(),
        corpus.n_utterances(),
        corpus.d
    );

    let draws = simulate_draws(&corpus, 10, &config, 0)?;
    let first = &corpus.dialogues[0];
    let scores = aggregate(&draws[0])?;
    let votes = hard_labels(&scores, 0.5)?;
    println!("dialogue {} (session bias {:+.3})", first.id, draws[0].session_bias);
    for ((u, s), vote) in first.utterances.iter().zip(&scores.s).zip(&votes.labels) {
        println!(
            "  #{:<2} {:<10} gold {} score {:.1} vote {:?}",
            u.index,
            format!("{:?}", u.speaker),
            u.gold.as_ref().map_or(0, |g| g[0]),
            s,
            vote
        );
    }

    let dir = tempfile::tempdir()?;
    corpus.save(&dir.path().join("corpus.jsonl"))?;
    let all: Vec<_> = draws.iter().map(aggregate).collect::<pairdistill::Result<_>>()?;
    let text = scores_to_jsonl(&all)?;
    println!("score file starts with: {}", text.lines().next().unwrap_or_default());
    Ok(())
}
