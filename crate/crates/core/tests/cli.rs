use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn covshift(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_covshift"))
        .args(args)
        .output()
        .expect("run covshift")
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn write_lines(path: &Path, values: &[f64]) -> PathBuf {
    let text: String = values.iter().map(|v| format!("{v}\n")).collect();
    std::fs::write(path, text).unwrap();
    path.to_path_buf()
}

fn fitted(dir: &Path) -> (PathBuf, Vec<f64>) {
    let train: Vec<f64> = (0..2000)
        .map(|i| ((i as f64 + 0.5) / 2000.0).powf(0.2))
        .collect();
    let scores = write_lines(&dir.join("train.txt"), &train);
    let model = dir.join("model.json");
    let out = covshift(&["fit", "--scores", p(&scores), "--out", p(&model)]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("c_target") && stdout.contains("0.9100"));
    (model, train)
}

#[test]
fn fit_then_detect_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let (model, train) = fitted(dir.path());

    let id: Vec<f64> = train.iter().step_by(20).copied().collect();
    let id_path = write_lines(&dir.path().join("id.txt"), &id);
    let out = covshift(&["detect", "--model", p(&model), "--window", p(&id_path)]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stdout)
    );

    let low = write_lines(&dir.path().join("low.txt"), &[1e-4; 50]);
    let report = dir.path().join("report.json");
    let out = covshift(&[
        "detect",
        "--model",
        p(&model),
        "--window",
        p(&low),
        "--report",
        p(&report),
    ]);
    assert_eq!(out.status.code(), Some(2));
    let json: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    assert!(json["p_value"].as_f64().unwrap() < 1e-3);
    assert_eq!(json["shift_detected"], true);

    let out = covshift(&[
        "detect",
        "--model",
        p(&model),
        "--window",
        p(&low),
        "--alpha",
        "0",
    ]);
    assert_eq!(out.status.code(), Some(0));
}

#[test]
fn errors_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let one = write_lines(&dir.path().join("one.txt"), &[0.5]);
    let out = covshift(&[
        "fit",
        "--scores",
        p(&one),
        "--out",
        p(&dir.path().join("m.json")),
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("m must be ≥ 2"));

    let two = write_lines(&dir.path().join("two.txt"), &[0.2, 0.7]);
    let model = dir.path().join("two.json");
    assert_eq!(
        covshift(&["fit", "--scores", p(&two), "--out", p(&model)])
            .status
            .code(),
        Some(0)
    );

    // bad flag values are rejected before any file is touched
    let out = covshift(&[
        "fit",
        "--scores",
        "/nonexistent",
        "--delta",
        "1.5",
        "--out",
        "x",
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("delta"));

    let out = covshift(&[
        "detect",
        "--model",
        p(&model),
        "--window",
        p(&two),
        "--kappa",
        "sr",
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("mismatch"));

    let single = write_lines(&dir.path().join("single.txt"), &[0.4]);
    let out = covshift(&["detect", "--model", p(&model), "--window", p(&single)]);
    assert_eq!(out.status.code(), Some(1));

    assert_eq!(covshift(&["fit", "--unknown"]).status.code(), Some(1));
    assert_eq!(covshift(&["--help"]).status.code(), Some(0));
}

#[test]
fn simulate_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let scores = dir.path().join("s.txt");
    let out = covshift(&[
        "simulate",
        "--dist",
        "beta(2,5)",
        "--n",
        "100",
        "--seed",
        "3",
        "--out",
        p(&scores),
    ]);
    assert_eq!(out.status.code(), Some(0));
    let text = std::fs::read_to_string(&scores).unwrap();
    assert_eq!(text.lines().count(), 100);
    assert!(text
        .lines()
        .all(|l| (0.0..=1.0).contains(&l.parse::<f64>().unwrap())));

    let again = dir.path().join("s2.txt");
    covshift(&[
        "simulate",
        "--dist",
        "beta(2,5)",
        "--n",
        "100",
        "--seed",
        "3",
        "--out",
        p(&again),
    ]);
    assert_eq!(
        std::fs::read(&scores).unwrap(),
        std::fs::read(&again).unwrap()
    );

    let vecs = dir.path().join("v.csv");
    let out = covshift(&[
        "simulate",
        "--dist",
        "dirichlet(1,2,3)",
        "--n",
        "20",
        "--out",
        p(&vecs),
    ]);
    assert_eq!(out.status.code(), Some(0));
    for line in std::fs::read_to_string(&vecs).unwrap().lines() {
        let sum: f64 = line.split(',').map(|x| x.parse::<f64>().unwrap()).sum();
        assert!((sum - 1.0).abs() < 1e-12);
    }

    let out = covshift(&[
        "simulate",
        "--dist",
        "poisson(3)",
        "--n",
        "5",
        "--out",
        p(&vecs),
    ]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn eval_on_softmax_pools() {
    let dir = tempfile::tempdir().unwrap();
    let sim = |dist: &str, n: &str, seed: &str, name: &str| {
        let path = dir.path().join(name);
        let out = covshift(&[
            "simulate",
            "--dist",
            dist,
            "--n",
            n,
            "--seed",
            seed,
            "--out",
            p(&path),
        ]);
        assert_eq!(out.status.code(), Some(0));
        path
    };
    let id = sim("dirichlet(8,1,1)", "600", "1", "id.csv");
    let shifted = sim("dirichlet(1,1,1)", "300", "2", "sh.csv");
    for method in ["ours", "ks", "single-sr"] {
        let out_csv = dir.path().join(format!("{method}.csv"));
        let out = covshift(&[
            "eval",
            "--method",
            method,
            "--format",
            "softmax",
            "--kappa",
            "sr",
            "--id",
            p(&id),
            "--shifted",
            p(&shifted),
            "--window-sizes",
            "20,50",
            "--trials",
            "10",
            "--seed",
            "4",
            "--out",
            p(&out_csv),
        ]);
        assert_eq!(
            out.status.code(),
            Some(0),
            "{method}: {}",
            String::from_utf8_lossy(&out.stderr)
        );
        let text = std::fs::read_to_string(&out_csv).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(
            lines[0],
            "method,window_size,auroc,aupr_in,aupr_out,detection_error,fpr_at_95tpr,n_trials,seed"
        );
        assert_eq!(lines.len(), 3);
        let k50: Vec<&str> = lines[2].split(',').collect();
        assert_eq!(k50[0], method);
        assert!(
            k50[2].parse::<f64>().unwrap() > 0.9,
            "{method}: {}",
            lines[2]
        );
    }

    let out = covshift(&[
        "eval",
        "--method",
        "ours",
        "--format",
        "softmax",
        "--id",
        p(&id),
        "--shifted",
        p(&shifted),
        "--window-sizes",
        "1000",
        "--out",
        p(&dir.path().join("x.csv")),
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("fewer than the largest window"));
}

#[test]
fn bench_small() {
    let dir = tempfile::tempdir().unwrap();
    let out_csv = dir.path().join("b.csv");
    let out = covshift(&[
        "bench",
        "--sizes",
        "200,2000",
        "--window-size",
        "10",
        "--methods",
        "ours,ks,mmd,single-ent",
        "--repeats",
        "1",
        "--dim",
        "3",
        "--out",
        p(&out_csv),
    ]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let text = std::fs::read_to_string(&out_csv).unwrap();
    assert_eq!(
        text.lines().next(),
        Some("method,m,k,fit_seconds,detect_seconds")
    );
    assert_eq!(text.lines().count(), 9);

    let out = covshift(&["bench", "--sizes", "2000,200", "--out", p(&out_csv)]);
    assert_eq!(out.status.code(), Some(1));
}
