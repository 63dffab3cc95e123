//! Learning a two-peak discretized Gaussian mixture on 10 qubits from a
//! finite training set.
//!
//! `cargo run --release --example gaussian_mixture -- [steps] [seed]`

use qcbm::experiment::{build_problem, train, ExperimentConfig};
use qcbm::simulator::run_circuit;

const BIN: usize = 20;

fn main() -> qcbm::Result<()> {
    let mut args = std::env::args().skip(1);
    let steps: usize = args.next().and_then(|s| s.parse().ok()).unwrap_or(200);
    let seed: u64 = args.next().and_then(|s| s.parse().ok()).unwrap_or(0);
    let config = ExperimentConfig::from_json(
        &format!(r#"{{"dataset":"gaussian","depth":10,"batch_size":20000,"max_steps":{steps},"seed":{seed}}}"#),
        None,
        None,
    )?;
    let problem = build_problem(&config)?;
    let outcome = train(&config, &problem, |r, _| {
        if r.step % 20 == 0 {
            println!("{:>5}  mmd {:.3e}", r.step, r.loss);
        }
    })?;
    println!("mmd vs exact target {:.3e}", outcome.final_target_loss);

    let samples = run_circuit(&problem.spec, &outcome.theta)?.sample(20_000, seed)?;
    let model = samples.histogram();
    let bins = model.len().div_ceil(BIN);
    for b in 0..bins {
        let range = b * BIN..((b + 1) * BIN).min(model.len());
        let q: f64 = model[range.clone()].iter().sum();
        let t: f64 = problem.exact_target[range].iter().sum();
        println!("{:>4}  {:<40} {:<40}", b * BIN, "*".repeat((q * 400.0) as usize), "o".repeat((t * 400.0) as usize));
    }
    Ok(())
}
