use qcbm::experiment::run::adam_budget;
use qcbm::experiment::{build_problem, train, ExperimentConfig};

fn config(json: &str) -> ExperimentConfig {
    ExperimentConfig::from_json(json, None, None).unwrap()
}

#[test]
fn lbfgs_trace_never_increases() {
    let c = config(r#"{"dataset":"bas3x3","depth":2,"optimizer":"lbfgs","max_steps":40,"seed":5}"#);
    let problem = build_problem(&c).unwrap();
    let outcome = train(&c, &problem, |_, _| {}).unwrap();
    let losses: Vec<f64> = outcome.records.iter().map(|r| r.loss).collect();
    assert!(losses.windows(2).all(|w| w[1] <= w[0] + 1e-15), "{losses:?}");
    assert!(outcome.final_loss < losses[0]);
    assert_eq!(outcome.measurements, 0);
}

#[test]
fn adam_counts_measurements() {
    let c = config(r#"{"dataset":"bas3x3","depth":1,"batch_size":100,"max_steps":4,"seed":2}"#);
    let problem = build_problem(&c).unwrap();
    let outcome = train(&c, &problem, |_, _| {}).unwrap();
    let p = problem.spec.parameter_count();
    assert_eq!(outcome.measurements, adam_budget(p, 100, 4));
    let per_step: Vec<u64> = outcome.records.iter().map(|r| r.measurements).collect();
    assert_eq!(per_step, (0..=4).map(|s| adam_budget(p, 100, s)).collect::<Vec<_>>());
}

#[test]
fn cmaes_counts_measurements_and_is_deterministic() {
    let json = r#"{"dataset":"bas3x3","depth":1,"optimizer":"cmaes","population":12,"batch_size":50,"max_steps":6,"record_timing":false,"seed":9}"#;
    let c = config(json);
    let problem = build_problem(&c).unwrap();
    let a = train(&c, &problem, |_, _| {}).unwrap();
    let b = train(&c, &problem, |_, _| {}).unwrap();
    assert_eq!(a.theta, b.theta);
    assert_eq!(a.measurements, 6 * 12 * 50);
    assert_eq!(a.records.len(), 7);
}

#[test]
fn exact_target_is_bas_uniform() {
    let c = config(r#"{"dataset":"bas3x3","seed":0}"#);
    let problem = build_problem(&c).unwrap();
    let support: Vec<f64> = problem.exact_target.iter().copied().filter(|&p| p > 0.0).collect();
    assert_eq!(support.len(), 14);
    assert!(support.iter().all(|&p| (p - 1.0 / 14.0).abs() < 1e-15));
    assert_eq!(problem.objective.target(), problem.exact_target.as_slice());
}

#[test]
fn gaussian_defaults_resolve() {
    let c = config(r#"{"dataset":"gaussian","seed":0}"#);
    assert_eq!(c.qubits(), 10);
    let problem = build_problem(&c).unwrap();
    assert_eq!(problem.spec.n(), 10);
    let total: f64 = problem.objective.target().iter().sum();
    assert!((total - 1.0).abs() < 1e-12);
}
