//! Sample preference pairs within and across sessions and compare how the
//! annotator score gap predicts agreement with gold labels.

use pairdistill::pairing::{
    bootstrap_slope_difference_se, correlation_experiment, gold_agreement, PairMode, PairSampler,
};
use pairdistill::scores::aggregate;
use pairdistill::simulator::{generate_world, simulate_draws, WorldConfig};

fn main() -> pairdistill::Result<()> {
    let config = WorldConfig {
        d: 16,
        sigma_session: 1.0,
        seed: 11,
        ..WorldConfig::default()
    };
    let corpus = generate_world(&config)?;
    let scores: Vec<_> = simulate_draws(&corpus, 30, &config, 0)?
        .iter()
        .map(aggregate)
        .collect::<pairdistill::Result<_>>()?;

    let intra = PairSampler::new(PairMode::Intra, 16, 1).sample(&corpus, &scores)?;
    let cross = PairSampler::new(PairMode::Cross, 16, 1).sample(&corpus, &scores)?;
    println!(
        "{} intra-session pairs, {} cross-session pairs",
        intra.len(),
        cross.len()
    );

    let report = correlation_experiment(&corpus, &intra, &cross, 0, 5)?;
    for table in [&report.intra, &report.cross] {
        println!("\n{}", table.group);
        for b in &table.buckets {
            println!(
                "  |ds| in ({:.1}, {:.1}]  n = {:<5} mean ds {:.3}  P(gold agrees) {:.3}",
                b.lo, b.hi, b.count, b.mean_ds, b.p_gold
            );
        }
        if let Some(slope) = table.slope() {
            println!("  fitted slope {slope:.3}");
        }
    }
    let se = bootstrap_slope_difference_se(
        &gold_agreement(&corpus, &intra, 0)?,
        &gold_agreement(&corpus, &cross, 0)?,
        5,
        200,
        3,
    );
    if let (Some(diff), Some(se)) = (report.slope_difference(), se) {
        println!("\nslope difference {diff:.3} (bootstrap s.e. {se:.3})");
    }
    Ok(())
}
