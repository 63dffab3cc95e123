//! Hessian of the model-model kernel term `p^T K p` from nested shift
//! rules, checked against finite differences.

use qcbm::architecture::CircuitSpec;
use qcbm::gradient::{kernel_expectation, vstat_gradient, vstat_second_derivative, OffsetTuple};
use qcbm::loss::{KernelMatrix, KernelSpec};
use qcbm::simulator::probabilities;

fn main() -> qcbm::Result<()> {
    let spec = CircuitSpec::new(3, 1, vec![(0, 1), (1, 2)])?;
    let theta = spec.random_parameters(3);
    let kernel = KernelMatrix::new(3, &KernelSpec::bars_and_stripes())?;
    let expectation = kernel_expectation(&spec, &theta, &kernel);
    let gamma = OffsetTuple::zeros(2, spec.parameter_count());
    let term = |t: &[f64]| {
        let p = probabilities(&spec, t).unwrap();
        kernel.quadratic(&p, &p)
    };

    let dim = 4;
    let h = 1e-4;
    println!("gradient: {:?}", (0..dim).map(|k| vstat_gradient(&expectation, &gamma, k, true)).collect::<qcbm::Result<Vec<_>>>()?);
    let mut worst: f64 = 0.0;
    for a in 0..dim {
        let mut row = Vec::new();
        for b in 0..dim {
            let exact = vstat_second_derivative(&expectation, &gamma, a, b)?;
            let at = |da: f64, db: f64| {
                let mut t = theta.clone();
                t[a] += da;
                t[b] += db;
                term(&t)
            };
            let fd = (at(h, h) - at(h, -h) - at(-h, h) + at(-h, -h)) / (4.0 * h * h);
            worst = worst.max((exact - fd).abs());
            row.push(format!("{exact:+.5}"));
        }
        println!("{}", row.join(" "));
    }
    println!("max deviation from finite differences {worst:.2e}");
    Ok(())
}
