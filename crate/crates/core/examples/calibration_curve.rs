//! Expected calibration error of ensemble scores as the ensemble grows,
//! with the reliability buckets for the smallest and largest sizes.

use pairdistill::scores::ece_curve;
use pairdistill::simulator::{generate_world, WorldConfig};

fn main() -> pairdistill::Result<()> {
    let config = WorldConfig {
        d: 16,
        seed: 7,
        ..WorldConfig::default()
    };
    let corpus = generate_world(&config)?;
    let points = ece_curve(&corpus, &config, &[1, 2, 5, 10, 20, 30], 5, 0)?;

    println!("{:>4}  {:>8}", "k", "ECE");
    for p in &points {
        println!("{:>4}  {:>8.4}", p.k, p.ece);
    }
    for p in [points.first(), points.last()].into_iter().flatten() {
        println!("\nreliability at k = {}", p.k);
        for b in &p.buckets {
            println!(
                "  ({:.1}, {:.1}]  n = {:<5} acc {:.3}  conf {:.3}",
                b.lo, b.hi, b.count, b.acc, b.conf
            );
        }
    }
    Ok(())
}
