use std::path::{Path, PathBuf};
use std::process::Command;

use bloc::io;
use bloc_core::corrspace::validate_corr;
use bloc_core::datagen::{gen_truth, sample_mvn, TruthDesign, TruthSpec};
use tempfile::TempDir;

fn run(args: &[&str]) -> (i32, String, String) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let argv = std::iter::once("bloc").chain(args.iter().copied());
    let code = bloc::run_cli(argv, &mut out, &mut err);
    (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Writes a data file with a header and one row holding a missing value.
fn data_file(dir: &Path, d: usize, n: usize, seed: u64) -> PathBuf {
    let truth = gen_truth(&TruthSpec::new(TruthDesign::BlockRandom5, d).with_seed(seed)).unwrap();
    let x = sample_mvn(&truth.matrix, n, seed + 1).unwrap();
    let mut text = (0..d).map(|j| format!("v{j}")).collect::<Vec<_>>().join(",") + "\n";
    for row in x.values().row_iter() {
        text += &row.iter().map(f64::to_string).collect::<Vec<_>>().join(",");
        text.push('\n');
    }
    text += &vec!["NA"; d].join(",");
    text.push('\n');
    let p = dir.join("data.csv");
    std::fs::write(&p, text).unwrap();
    p
}

fn json(p: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(p).unwrap()).unwrap()
}

const QUICK: [&str; 6] = ["--max-iter", "200", "--max-run", "2", "--cache-current-value", "true"];

#[test]
fn estimate_writes_consistent_artifacts() {
    let dir = TempDir::new().unwrap();
    let data = data_file(dir.path(), 5, 60, 1);
    let out = dir.path().join("fit");
    let mut args = vec!["estimate", "--data", path_str(&data), "--penalty", "scad", "--lambda-grid", "0.1,0.3"];
    args.extend(QUICK);
    args.extend(["--out", path_str(&out)]);
    let (code, stdout, stderr) = run(&args);
    assert_eq!(code, 0, "{stderr}");
    assert!(stdout.starts_with("best_value="));

    let gamma = io::read_corr(&out.join("gamma_hat.csv")).unwrap();
    let sigma = io::read_matrix(&out.join("sigma_hat.csv")).unwrap();
    let support = io::read_matrix(&out.join("support.csv")).unwrap();
    let summary = json(&out.join("summary.json"));
    assert_eq!(summary["n"], 60);
    assert_eq!(summary["d"], 5);
    assert_eq!(summary["dropped_rows"], 1);
    assert_eq!(summary["path"].as_array().unwrap().len(), 2);
    let tol = summary["zero_tol"].as_f64().unwrap();
    let mut edges = 0;
    for i in 0..5 {
        assert_eq!(support[(i, i)], 0.0);
        for j in 0..5 {
            let on = gamma.get(i, j).abs() > tol && i != j;
            assert_eq!(support[(i, j)], f64::from(u8::from(on)));
            edges += usize::from(on && i < j);
            // sigma = W gamma W
            let w = (sigma[(i, i)] * sigma[(j, j)]).sqrt();
            assert!((sigma[(i, j)] - w * gamma.get(i, j)).abs() < 1e-12 * w.max(1.0));
        }
    }
    assert_eq!(summary["support_size"], edges);

    let trace = std::fs::read_to_string(out.join("trace.csv")).unwrap();
    let mut lines = trace.lines();
    assert_eq!(lines.next().unwrap(), "run,iteration,step_size,best_value,evaluations");
    let best: Vec<f64> = lines.map(|l| l.split(',').nth(3).unwrap().parse().unwrap()).collect();
    assert!(best.windows(2).all(|w| w[1] <= w[0]));
}

#[test]
fn reruns_are_byte_identical() {
    let dir = TempDir::new().unwrap();
    let data = data_file(dir.path(), 5, 40, 2);
    let mut outputs = Vec::new();
    for (k, workers) in ["1", "4"].iter().enumerate() {
        let out = dir.path().join(format!("run{k}"));
        let mut args = vec!["estimate", "--data", path_str(&data), "--lambda", "0.2", "--restart", "grid", "--seed", "5"];
        args.extend(QUICK);
        args.extend(["--parallelism", workers, "--out", path_str(&out)]);
        assert_eq!(run(&args).0, 0);
        outputs.push(out);
    }
    for f in ["gamma_hat.csv", "sigma_hat.csv", "support.csv", "trace.csv"] {
        let a = std::fs::read(outputs[0].join(f)).unwrap();
        let b = std::fs::read(outputs[1].join(f)).unwrap();
        assert_eq!(a, b, "{f}");
    }
    let (mut a, mut b) = (json(&outputs[0].join("summary.json")), json(&outputs[1].join("summary.json")));
    a["seconds"] = 0.into();
    b["seconds"] = 0.into();
    assert_eq!(a, b);
}

#[test]
fn written_matrices_read_back_exactly() {
    let dir = TempDir::new().unwrap();
    let truth = gen_truth(&TruthSpec::new(TruthDesign::BlockRandom5, 10).with_seed(3)).unwrap();
    let p = dir.path().join("m.csv");
    io::write_matrix(&p, &truth.matrix).unwrap();
    assert_eq!(io::read_matrix(&p).unwrap(), truth.matrix);
    let c = validate_corr(&truth.matrix, 0.0).unwrap();
    assert_eq!(io::read_corr(&p).unwrap(), c);
    let v = vec![0.1, -2.5e-300, std::f64::consts::PI];
    io::write_vector(&p, &v).unwrap();
    assert_eq!(io::read_vector(&p).unwrap(), v);
}

#[test]
fn optimize_and_resume_from_its_output() {
    let dir = TempDir::new().unwrap();
    let target = dir.path().join("target.csv");
    std::fs::write(&target, "1,0.5,0.2\n0.5,1,0.1\n0.2,0.1,1\n").unwrap();
    let out = dir.path().join("opt");
    let (code, _, stderr) = run(&[
        "optimize", "--loss", "frobenius", "--target", path_str(&target), "--kappa", "1e-10", "--tau1", "1e-16",
        "--out", path_str(&out),
    ]);
    assert_eq!(code, 0, "{stderr}");
    let g = io::read_matrix(&out.join("gamma_hat.csv")).unwrap();
    assert!((g[(0, 1)] - 0.5).abs() < 1e-6 && (g[(1, 2)] - 0.1).abs() < 1e-6);
    assert_eq!(io::read_vector(&out.join("phi.csv")).unwrap().len(), 3);
    let s = json(&out.join("summary.json"));
    assert!(s["best_value"].as_f64().unwrap() < 1e-10);

    let again = dir.path().join("again");
    let (code, _, _) = run(&[
        "optimize", "--loss", "frobenius", "--target", path_str(&target), "--init", path_str(&out.join("gamma_hat.csv")),
        "--max-run", "1", "--out", path_str(&again),
    ]);
    assert_eq!(code, 0);
    assert!(json(&again.join("summary.json"))["best_value"].as_f64().unwrap() <= s["best_value"].as_f64().unwrap() + 1e-15);
}

#[test]
fn black_box_command_is_minimized() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("bb");
    // squared distance of the off-diagonal entries from 0.5
    let script = "while read a && read b && read c; do printf '%s\\n%s\\n%s\\n' \"$a\" \"$b\" \"$c\" | \
                  awk -F, '{ for (i = 1; i <= NF; i++) if (i != NR) s += ($i - 0.5)^2 } END { print s }'; done";
    let (code, _, stderr) = run(&[
        "optimize", "--loss", "blackbox-cmd", "--blackbox-cmd", script, "--d", "3", "--max-iter", "200",
        "--max-run", "1", "--out", path_str(&out),
    ]);
    assert_eq!(code, 0, "{stderr}");
    let g = io::read_matrix(&out.join("gamma_hat.csv")).unwrap();
    for (i, j) in [(0, 1), (0, 2), (1, 2)] {
        assert!((g[(i, j)] - 0.5).abs() < 1e-3, "{g}");
    }

    let (code, _, stderr) = run(&[
        "optimize", "--loss", "blackbox-cmd", "--blackbox-cmd", "echo nonsense", "--d", "3", "--out", path_str(&out),
    ]);
    assert_eq!(code, 2, "{stderr}");
}

#[test]
fn benchmark_and_simulate_tables() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("b");
    let (code, _, stderr) = run(&[
        "benchmark", "--fn", "griewank", "--d", "3", "--reps", "3", "--max-iter", "300", "--max-run", "2",
        "--out", path_str(&out),
    ]);
    assert_eq!(code, 0, "{stderr}");
    let table = std::fs::read_to_string(out.join("benchmark.csv")).unwrap();
    let mut lines = table.lines();
    assert_eq!(lines.next().unwrap(), "function,d,reps,min_value,mean_value,stderr,mean_seconds");
    let row: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(&row[..3], &["griewank", "3", "3"]);
    let reps = std::fs::read_to_string(out.join("replications.csv")).unwrap();
    let values: Vec<f64> = reps.lines().skip(1).map(|l| l.split(',').nth(1).unwrap().parse().unwrap()).collect();
    assert_eq!(values.len(), 3);
    assert_eq!(row[3].parse::<f64>().unwrap(), values.iter().copied().fold(f64::INFINITY, f64::min));

    let sim = dir.path().join("s");
    let (code, stdout, stderr) = run(&[
        "simulate", "--design", "toeplitz", "--d", "4", "--n", "30", "--reps", "2", "--penalty", "mcp", "--lambda",
        "0.2", "--max-iter", "100", "--max-run", "1", "--out", path_str(&sim),
    ]);
    assert_eq!(code, 0, "{stderr}");
    assert!(stdout.starts_with("mean_mcc="));
    let summary = std::fs::read_to_string(sim.join("summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), 1 + 7);
    assert!(summary.lines().nth(1).unwrap().starts_with("toeplitz,4,30,bloc-mcp,tpr,"));
    assert_eq!(std::fs::read_to_string(sim.join("replications.csv")).unwrap().lines().count(), 3);
}

#[test]
fn config_file_sits_between_defaults_and_flags() {
    let dir = TempDir::new().unwrap();
    let cfg = dir.path().join("run.cfg");
    std::fs::write(&cfg, "# small run\nmax_iter = 7\nmax-run = 1\nreps = 2\n").unwrap();
    let out = dir.path().join("o");
    let base = ["benchmark", "--fn", "ackley", "--d", "3", "--config", path_str(&cfg), "--out", path_str(&out)];
    assert_eq!(run(&base).0, 0);
    let trace_len = |p: &Path| std::fs::read_to_string(p.join("replications.csv")).unwrap().lines().count() - 1;
    assert_eq!(trace_len(&out), 2);
    let evals = |p: &Path| -> Vec<usize> {
        std::fs::read_to_string(p.join("replications.csv"))
            .unwrap()
            .lines()
            .skip(1)
            .map(|l| l.split(',').nth(2).unwrap().parse().unwrap())
            .collect()
    };
    // 7 iterations of 2N = 6 candidates, plus the start, at most
    assert!(evals(&out).iter().all(|e| *e <= 7 * 7 + 1));
    let mut args = base.to_vec();
    args.extend(["--reps", "3"]);
    assert_eq!(run(&args).0, 0);
    assert_eq!(trace_len(&out), 3);

    std::fs::write(&cfg, "max_iter 7\n").unwrap();
    assert_eq!(run(&base).0, 1);
}

#[test]
fn exit_codes() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("x");
    let o = path_str(&out);
    // usage errors
    assert_eq!(run(&["frobnicate"]).0, 1);
    assert_eq!(run(&["benchmark", "--fn", "ackley"]).0, 1);
    assert_eq!(run(&["optimize", "--loss", "gaussian", "--out", o]).0, 1);
    assert_eq!(run(&["estimate", "--data", "/nonexistent.csv", "--out", o]).0, 1);
    assert_eq!(run(&["benchmark", "--fn", "ackley", "--d", "3", "--rho", "0.5", "--out", o]).0, 1);
    assert_eq!(run(&["estimate", "--data", "x", "--lambda", "0.1", "--lambda-grid", "0.1,0.2"]).0, 1);
    // help and version go to stdout
    let (code, stdout, _) = run(&["--help"]);
    assert_eq!(code, 0);
    assert!(stdout.contains("roundtrip-check"));
    assert_eq!(run(&["--version"]).0, 0);
    // runtime failures
    let bad = dir.path().join("bad.csv");
    std::fs::write(&bad, "a,b\n1,2\n3\n").unwrap();
    assert_eq!(run(&["estimate", "--data", path_str(&bad), "--out", o]).0, 2);
    let singular = dir.path().join("singular.csv");
    std::fs::write(&singular, "1,1\n1,1\n").unwrap();
    assert_eq!(run(&["optimize", "--loss", "gaussian", "--target", path_str(&singular), "--out", o]).0, 2);
}

#[test]
fn roundtrip_check_reports_and_fails_on_tolerance() {
    let (code, stdout, _) = run(&["roundtrip-check", "--d", "6", "--reps", "20"]);
    assert_eq!(code, 0);
    assert!(stdout.starts_with("max_error="));
    let (code, _, stderr) = run(&["roundtrip-check", "--d", "6", "--reps", "20", "--tol", "0"]);
    assert_eq!(code, 2);
    assert!(stderr.contains("exceeds"));
    assert_eq!(run(&["roundtrip-check", "--d", "1"]).0, 1);
}

#[test]
fn binary_exit_status_matches() {
    let bin = env!("CARGO_BIN_EXE_bloc");
    let ok = Command::new(bin).args(["roundtrip-check", "--d", "3", "--reps", "5"]).output().unwrap();
    assert_eq!(ok.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&ok.stdout).starts_with("max_error="));
    let usage = Command::new(bin).arg("nope").output().unwrap();
    assert_eq!(usage.status.code(), Some(1));
    let fail = Command::new(bin).args(["roundtrip-check", "--d", "3", "--tol", "0"]).output().unwrap();
    assert_eq!(fail.status.code(), Some(2));
}
