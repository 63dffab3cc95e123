//! Gradient statistics at a random point: spread across depth and variance
//! of the sampled estimator against batch size.
//!
//! `cargo run --release --example gradient_statistics -- [depth] [seeds]`

use qcbm::experiment::{layers_analysis, variance_analysis, ExperimentConfig};

fn main() -> qcbm::Result<()> {
    let mut args = std::env::args().skip(1);
    let depth: usize = args.next().and_then(|s| s.parse().ok()).unwrap_or(100);
    let seeds: usize = args.next().and_then(|s| s.parse().ok()).unwrap_or(40);
    let config = ExperimentConfig::from_json(
        &format!(r#"{{"dataset":"bas3x3","depth":{depth},"variance_seeds":{seeds},"seed":7}}"#),
        None,
        None,
    )?;

    let layers = layers_analysis(&config)?;
    println!("layers       mean        std");
    for b in &layers.bins {
        println!("{:>3}-{:<3}  {:>+.3e}  {:.3e}", b.first_layer, b.last_layer, b.mean, b.std_dev);
    }
    println!("max/min std ratio {:.3}", layers.spread_ratio());

    let variance = variance_analysis(&config)?;
    for row in &variance.rows {
        println!("N={:<6} variance {:.3e}", row.shots.unwrap_or(0), row.variance);
    }
    if let Some(slope) = variance.slope {
        println!("log-log slope {slope:.3}");
    }
    Ok(())
}
