use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn qcbm(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qcbm")).args(args).output().expect("binary runs")
}

fn write_config(dir: &Path, name: &str, body: &str) -> String {
    let path = dir.join(name);
    fs::write(&path, body).unwrap();
    path.to_str().unwrap().to_string()
}

const SMALL_ADAM: &str = r#"{"dataset":"bas3x3","depth":2,"optimizer":"adam","batch_size":200,"max_steps":5,"sample_count":300,"record_timing":false,"seed":4}"#;

#[test]
fn train_writes_run_directory() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "c.json", SMALL_ADAM);
    let out = tmp.path().join("run");
    let o = qcbm(&["train", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    for f in ["config.json", "edges.json", "trace.csv", "theta.json", "samples.txt"] {
        assert!(out.join(f).is_file(), "missing {f}");
    }
    let trace = fs::read_to_string(out.join("trace.csv")).unwrap();
    let mut lines = trace.lines();
    assert_eq!(lines.next(), Some("step,loss,kl,grad_norm,measurements,seconds"));
    assert_eq!(lines.count(), 6);
    let theta: Vec<f64> = serde_json::from_str(&fs::read_to_string(out.join("theta.json")).unwrap()).unwrap();
    assert_eq!(theta.len(), 7 * 9);
    let samples = fs::read_to_string(out.join("samples.txt")).unwrap();
    assert_eq!(samples.lines().count(), 300);
    assert!(samples.lines().all(|l| l.len() == 9 && l.bytes().all(|b| b == b'0' || b == b'1')));
}

#[test]
fn rerun_from_snapshot_is_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "c.json", SMALL_ADAM);
    let first = tmp.path().join("a");
    let second = tmp.path().join("b");
    assert_eq!(qcbm(&["train", "--config", &cfg, "--out", first.to_str().unwrap()]).status.code(), Some(0));
    let snapshot = first.join("config.json");
    let o = qcbm(&["train", "--config", snapshot.to_str().unwrap(), "--out", second.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    for f in ["config.json", "edges.json", "trace.csv", "theta.json", "samples.txt"] {
        assert_eq!(fs::read(first.join(f)).unwrap(), fs::read(second.join(f)).unwrap(), "{f} differs");
    }
}

#[test]
fn seed_flag_overrides_config() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "c.json", SMALL_ADAM);
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    qcbm(&["train", "--config", &cfg, "--out", a.to_str().unwrap()]);
    qcbm(&["train", "--config", &cfg, "--seed", "99", "--out", b.to_str().unwrap()]);
    let snap: serde_json::Value = serde_json::from_str(&fs::read_to_string(b.join("config.json")).unwrap()).unwrap();
    assert_eq!(snap["seed"], 99);
    assert_ne!(fs::read(a.join("theta.json")).unwrap(), fs::read(b.join("theta.json")).unwrap());
}

#[test]
fn sample_reproduces_training_samples() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "c.json", SMALL_ADAM);
    let run = tmp.path().join("run");
    qcbm(&["train", "--config", &cfg, "--out", run.to_str().unwrap()]);
    let again = tmp.path().join("again");
    let snap = run.join("config.json");
    let o = qcbm(&["sample", "--config", snap.to_str().unwrap(), "--out", again.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(fs::read(run.join("samples.txt")).unwrap(), fs::read(again.join("samples.txt")).unwrap());
}

#[test]
fn sample_rejects_mismatched_checkpoint() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "c.json", SMALL_ADAM);
    let run = tmp.path().join("run");
    qcbm(&["train", "--config", &cfg, "--out", run.to_str().unwrap()]);
    fs::write(run.join("theta.json"), "[0.1, 0.2]").unwrap();
    let snap = run.join("config.json");
    assert_eq!(qcbm(&["sample", "--config", snap.to_str().unwrap()]).status.code(), Some(2));
}

#[test]
fn config_errors_exit_two() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("x");
    let out = out.to_str().unwrap();
    let bad = [
        ("unknown.json", r#"{"dataset":"bas3x3","seed":1,"colour":"red"}"#),
        ("noseed.json", r#"{"dataset":"bas3x3"}"#),
        ("syntax.json", r#"{"dataset":"bas3x3","#),
        ("bandwidth.json", r#"{"dataset":"bas3x3","seed":1,"kernel_bandwidths":[-1.0]}"#),
        ("edges.json", r#"{"dataset":"bas3x3","seed":1,"edges":"file","edges_file":"nowhere.json"}"#),
    ];
    for (name, body) in bad {
        let cfg = write_config(tmp.path(), name, body);
        let o = qcbm(&["train", "--config", &cfg, "--out", out]);
        assert_eq!(o.status.code(), Some(2), "{name}: {}", String::from_utf8_lossy(&o.stderr));
    }
    let missing = tmp.path().join("absent.json");
    assert_eq!(qcbm(&["train", "--config", missing.to_str().unwrap(), "--out", out]).status.code(), Some(2));
}

#[test]
fn gradcheck_passes_and_catches_a_wrong_shift() {
    let tmp = tempfile::tempdir().unwrap();
    let good = write_config(tmp.path(), "g.json", r#"{"dataset":"bas3x3","depth":2,"gradcheck_trials":2,"seed":3}"#);
    let o = qcbm(&["gradcheck", "--config", &good, "--out", tmp.path().join("g").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stdout));
    assert!(tmp.path().join("g/gradcheck.json").is_file());

    let shallow = write_config(tmp.path(), "d0.json", r#"{"dataset":"bas3x3","depth":0,"gradcheck_trials":3,"seed":3}"#);
    assert_eq!(qcbm(&["gradcheck", "--config", &shallow]).status.code(), Some(0));

    let wrong = write_config(
        tmp.path(),
        "w.json",
        r#"{"dataset":"bas3x3","depth":2,"gradcheck_trials":2,"gradcheck_shift":0.5,"seed":3}"#,
    );
    let o = qcbm(&["gradcheck", "--config", &wrong]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stdout).contains("FAIL"));
}

#[test]
fn analyze_writes_reports() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "a.json",
        r#"{"dataset":"bas3x3","depth":4,"layer_bins":2,"variance_seeds":20,"variance_batch_sizes":[100,400],"depth_sweep":[1,2],"optimizer":"lbfgs","max_steps":5,"seed":2}"#,
    );
    let out = tmp.path().join("an");
    let out_s = out.to_str().unwrap();
    for kind in ["layers", "variance", "depth-sweep"] {
        let o = qcbm(&["analyze", kind, "--config", &cfg, "--out", out_s]);
        assert_eq!(o.status.code(), Some(0), "{kind}: {}", String::from_utf8_lossy(&o.stderr));
    }
    for f in ["layer_histogram.csv", "layer_stats.csv", "variance.csv", "depth_sweep.csv"] {
        assert!(out.join(f).is_file(), "missing {f}");
    }
    let sweep = fs::read_to_string(out.join("depth_sweep.csv")).unwrap();
    assert!(sweep.starts_with("depth,mmd,kl"));
    assert_eq!(sweep.lines().count(), 3);
}
