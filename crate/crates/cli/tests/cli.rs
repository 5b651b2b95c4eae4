use std::path::Path;
use std::process::{Command, Output};

fn cgs(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cgs"))
        .current_dir(dir)
        .args(args)
        .output()
        .unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn generated(dir: &Path) {
    let out = cgs(dir, &["generate", "--preset", "near-grid-8", "--out", "task"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn generate_writes_task_files_and_rejects_bad_presets() {
    let dir = tempfile::tempdir().unwrap();
    let out = cgs(dir.path(), &["generate", "--preset", "split-grid-8x8", "--out", "t"]);
    assert_eq!(code(&out), 0);
    assert!(dir.path().join("t/split-grid-8x8.csv").exists());
    assert!(dir.path().join("t/split-grid-8x8.json").exists());
    assert_eq!(code(&cgs(dir.path(), &["generate", "--preset", "nope"])), 2);
    assert_eq!(code(&cgs(dir.path(), &["generate"])), 2);
    assert_eq!(code(&cgs(dir.path(), &["frobnicate"])), 2);
}

#[test]
fn generate_from_spec_file() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("spec.toml"),
        "m = 2\nn_samples = 200\nn_classes = 2\nplacement = 'near'\nsnr = 4.0\nseed = 1\n[layout]\nkind = 'ring'\nn = 6\n",
    )
    .unwrap();
    let out = cgs(dir.path(), &["generate", "--spec", "spec.toml", "--stem", "ring"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert!(dir.path().join("ring.json").exists());
    std::fs::write(dir.path().join("bad.toml"), "m = 2\nshape = 'odd'\n").unwrap();
    assert_eq!(code(&cgs(dir.path(), &["generate", "--spec", "bad.toml"])), 2);
}

#[test]
fn train_then_select_reports_feasible() {
    let dir = tempfile::tempdir().unwrap();
    generated(dir.path());
    let out = cgs(
        dir.path(),
        &["train", "--task", "task/near-grid-8.json", "--threshold", "0.5", "--epochs", "10", "--out", "m"],
    );
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    for f in ["model.json", "curves.csv", "train.json"] {
        assert!(dir.path().join("m").join(f).exists(), "{f}");
    }
    let sel = cgs(dir.path(), &["select", "m/model.json"]);
    assert_eq!(code(&sel), 0);
    let v: serde_json::Value = serde_json::from_str(&stdout(&sel)).unwrap();
    assert_eq!(v["verdict"], "feasible");
    assert_eq!(v["selection"].as_array().unwrap().len(), 3);

    let vanilla = cgs(
        dir.path(),
        &["train", "--task", "task/near-grid-8.json", "--layer", "vanilla", "--epochs", "5", "--out", "v"],
    );
    assert_eq!(code(&vanilla), 0);
    let v: serde_json::Value = serde_json::from_str(&stdout(&cgs(dir.path(), &["select", "v/model.json"]))).unwrap();
    assert_eq!(v["verdict"], "unconstrained");
}

#[test]
fn select_failures_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&cgs(dir.path(), &["select", "missing.json"])), 1);
    std::fs::write(dir.path().join("corrupt.json"), "{\"layer\": 3").unwrap();
    assert_eq!(code(&cgs(dir.path(), &["select", "corrupt.json"])), 1);
}

#[test]
fn sweep_accepts_star_and_line() {
    let dir = tempfile::tempdir().unwrap();
    generated(dir.path());
    for topo in ["star", "line"] {
        let out = cgs(
            dir.path(),
            &[
                "sweep", "--task", "task/near-grid-8.json", "--topology", topo, "--M", "4", "--thresholds",
                "0.4,0.75,1.0", "--epochs", "5", "--repeats", "2", "--out", topo,
            ],
        );
        assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
        let csv = std::fs::read_to_string(dir.path().join(topo).join("sweep.csv")).unwrap();
        assert_eq!(csv.lines().count(), 1 + 3 * 4 * 2);
        let long = std::fs::read_to_string(dir.path().join(topo).join("sweep_long.csv")).unwrap();
        for method in ["conditional", "greedy-mi", "oracle", "vanilla"] {
            assert!(long.lines().any(|l| l.split(',').nth(1) == Some(method)), "{method}");
        }
        let oracle: Vec<f64> = long
            .lines()
            .filter(|l| l.split(',').nth(1) == Some("oracle"))
            .filter_map(|l| l.split(',').nth(2).and_then(|x| x.parse().ok()))
            .collect();
        assert!(oracle.windows(2).all(|w| w[0] <= w[1]), "{oracle:?}");
    }
}

#[test]
fn sweep_infeasible_everywhere_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let out = cgs(dir.path(), &["sweep", "--preset", "near-grid-8", "--thresholds", "0.0,0.1"]);
    assert_eq!(code(&out), 1);
    let unsorted = cgs(dir.path(), &["sweep", "--preset", "near-grid-8", "--thresholds", "0.5,0.1"]);
    assert_eq!(code(&unsorted), 2);
}

#[test]
fn config_files_reject_unknown_keys() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("bad.toml"), "preset = 'near-grid-8'\nthreshhold = 0.5\n").unwrap();
    assert_eq!(code(&cgs(dir.path(), &["train", "--config", "bad.toml"])), 2);
    std::fs::write(
        dir.path().join("ok.toml"),
        "preset = 'near-grid-8'\nthreshold = 0.5\nout = 'run'\n[train]\nepochs = 3\n",
    )
    .unwrap();
    let out = cgs(dir.path(), &["train", "--config", "ok.toml"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert!(dir.path().join("run/model.json").exists());
}

#[test]
fn oracle_and_baseline_write_rows() {
    let dir = tempfile::tempdir().unwrap();
    generated(dir.path());
    let out = cgs(
        dir.path(),
        &["oracle", "--task", "task/near-grid-8.json", "--threshold", "0,0.5", "--evaluator", "probe"],
    );
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let text = stdout(&out);
    assert!(text.starts_with("threshold,method,selection,score,status,wall_time"));
    assert!(text.contains("0.0,oracle,,,infeasible,"));
    let base = cgs(
        dir.path(),
        &["baseline", "--task", "task/near-grid-8.json", "--threshold", "1.0", "--evaluator", "probe"],
    );
    assert_eq!(code(&base), 0);
    assert!(stdout(&base).contains(",greedy-mi,"));
    assert!(dir.path().join("baseline.csv").exists());
}

#[test]
fn oracle_too_large_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let out = cgs(
        dir.path(),
        &["oracle", "--preset", "split-grid-8x8", "--threshold", "1.0", "--evaluator", "probe"],
    );
    assert_eq!(code(&out), 1);
}

#[test]
fn csv_input_uses_topology_geometry() {
    let dir = tempfile::tempdir().unwrap();
    generated(dir.path());
    std::fs::write(
        dir.path().join("topo.toml"),
        "kind = 'star'\nvertices = 3\nthreshold = 0.75\n\
         coords = [[0.0, 0.0], [1.0, 0.0], [2.0, 0.0], [3.0, 0.0], [0.0, 1.0], [1.0, 1.0], [2.0, 1.0], [3.0, 1.0]]\n",
    )
    .unwrap();
    let out = cgs(
        dir.path(),
        &[
            "baseline", "--csv", "task/near-grid-8.csv", "--feature-dim", "8", "--classes", "4", "--topology",
            "topo.toml", "--evaluator", "probe",
        ],
    );
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert!(stdout(&out).contains("0.75,greedy-mi,"));
    let missing = cgs(dir.path(), &["baseline", "--csv", "task/near-grid-8.csv", "--feature-dim", "8"]);
    assert_eq!(code(&missing), 2);
}

#[test]
fn arch_calc_prints_the_table() {
    let dir = tempfile::tempdir().unwrap();
    let out = cgs(dir.path(), &["arch-calc", "--C", "44", "--T", "1125", "--F_T", "10", "--F_S", "10", "--N_C", "4"]);
    assert_eq!(code(&out), 0);
    let text = stdout(&out);
    assert!(text.contains("4CF_TF_S"));
    assert!(text.lines().last().unwrap().ends_with("22100"));
    let json = cgs(dir.path(), &["arch-calc", "--C", "2", "--T", "100", "--ft", "1", "--fs", "1", "--nc", "2", "--json"]);
    let v: serde_json::Value = serde_json::from_str(&stdout(&json)).unwrap();
    assert_eq!(v["t_rounded"], true);
    assert_eq!(code(&cgs(dir.path(), &["arch-calc", "--C", "0", "--T", "1", "--F_T", "1", "--F_S", "1", "--N_C", "1"])), 2);
}
