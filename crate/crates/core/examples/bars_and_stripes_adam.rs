//! Adam on bars and stripes with sampled parameter-shift gradients.
//!
//! `cargo run --release --example bars_and_stripes_adam -- [batch|exact] [steps] [seed]`

use qcbm::experiment::{build_problem, train, ExperimentConfig};

fn main() -> qcbm::Result<()> {
    let mut args = std::env::args().skip(1);
    let batch = match args.next().as_deref() {
        Some("exact") => "null".to_string(),
        Some(n) => n.to_string(),
        None => "2000".to_string(),
    };
    let steps: usize = args.next().and_then(|s| s.parse().ok()).unwrap_or(300);
    let seed: u64 = args.next().and_then(|s| s.parse().ok()).unwrap_or(0);
    let config = ExperimentConfig::from_json(
        &format!(
            r#"{{"dataset":"bas3x3","optimizer":"adam","learning_rate":0.1,"batch_size":{batch},"max_steps":{steps},"seed":{seed}}}"#
        ),
        None,
        None,
    )?;
    let problem = build_problem(&config)?;
    let outcome = train(&config, &problem, |r, _| {
        if r.step % 25 == 0 {
            println!("{:>5}  mmd {:.3e}  |g| {:.3e}  measurements {}", r.step, r.loss, r.grad_norm.unwrap_or(f64::NAN), r.measurements);
        }
    })?;
    println!("final mmd {:.3e} after {} measurements", outcome.final_loss, outcome.measurements);
    Ok(())
}
