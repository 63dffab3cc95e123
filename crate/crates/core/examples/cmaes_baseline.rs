//! Gradient-free CMA-ES on bars and stripes, each loss estimated from
//! `batch` measurements (or exactly).
//!
//! `cargo run --release --example cmaes_baseline -- [batch|exact] [generations] [seed]`

use qcbm::experiment::{build_problem, train, ExperimentConfig};

fn main() -> qcbm::Result<()> {
    let mut args = std::env::args().skip(1);
    let batch = match args.next().as_deref() {
        Some("exact") => "null".to_string(),
        Some(n) => n.to_string(),
        None => "2000".to_string(),
    };
    let generations: usize = args.next().and_then(|s| s.parse().ok()).unwrap_or(300);
    let seed: u64 = args.next().and_then(|s| s.parse().ok()).unwrap_or(0);
    let config = ExperimentConfig::from_json(
        &format!(
            r#"{{"dataset":"bas3x3","optimizer":"cmaes","population":50,"batch_size":{batch},"max_steps":{generations},"seed":{seed}}}"#
        ),
        None,
        None,
    )?;
    let problem = build_problem(&config)?;
    let outcome = train(&config, &problem, |r, _| {
        if r.step % 25 == 0 {
            println!("{:>5}  population mmd {:.3e}", r.step, r.loss);
        }
    })?;
    println!("mean of search distribution: exact mmd {:.3e} ({})", outcome.final_loss, outcome.status);
    Ok(())
}
