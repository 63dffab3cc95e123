//! Exact-gradient L-BFGS on 3x3 bars and stripes.
//!
//! `cargo run --release --example bars_and_stripes_lbfgs -- [seed] [iterations]`

use qcbm::datasets::{valid_rate, BasDataset};
use qcbm::experiment::{build_problem, train, ExperimentConfig};
use qcbm::simulator::run_circuit;

fn main() -> qcbm::Result<()> {
    let mut args = std::env::args().skip(1);
    let seed: u64 = args.next().and_then(|s| s.parse().ok()).unwrap_or(1);
    let iterations: usize = args.next().and_then(|s| s.parse().ok()).unwrap_or(500);
    let config = ExperimentConfig::from_json(
        &format!(r#"{{"dataset":"bas3x3","depth":10,"optimizer":"lbfgs","max_steps":{iterations},"seed":{seed}}}"#),
        None,
        None,
    )?;
    let problem = build_problem(&config)?;
    println!("edges: {:?}", problem.spec.edges());
    let outcome = train(&config, &problem, |r, _| {
        if r.step % 50 == 0 {
            println!("{:>4}  mmd {:.3e}  kl {:.3e}", r.step, r.loss, r.kl.unwrap_or(f64::NAN));
        }
    })?;
    println!("final mmd {:.3e}, kl {:.3e} ({})", outcome.final_loss, outcome.final_kl, outcome.status);

    let bas = BasDataset::bars_and_stripes_3x3();
    let samples = run_circuit(&problem.spec, &outcome.theta)?.sample(10_000, seed)?;
    println!("valid rate over 10^4 samples: {:.4}", valid_rate(&samples, &bas)?);
    for &x in samples.samples.iter().take(4) {
        println!("{}\n", bas.render(x));
    }
    Ok(())
}
