//! Final loss against circuit depth for L-BFGS on bars and stripes.
//!
//! `cargo run --release --example depth_sweep -- [iterations] [seed]`

use qcbm::experiment::{depth_sweep, ExperimentConfig};

fn main() -> qcbm::Result<()> {
    let mut args = std::env::args().skip(1);
    let iterations: usize = args.next().and_then(|s| s.parse().ok()).unwrap_or(200);
    let seed: u64 = args.next().and_then(|s| s.parse().ok()).unwrap_or(0);
    let config = ExperimentConfig::from_json(
        &format!(
            r#"{{"dataset":"bas3x3","optimizer":"lbfgs","max_steps":{iterations},"depth_sweep":[1,2,4,6,8,10],"seed":{seed}}}"#
        ),
        None,
        None,
    )?;
    println!("depth,mmd,kl");
    for p in depth_sweep(&config)? {
        println!("{},{:.3e},{:.3e}", p.depth, p.mmd, p.kl);
    }
    Ok(())
}
