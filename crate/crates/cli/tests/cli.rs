use std::fs;
use std::path::Path;
use std::process::Command;

fn gridee(args: &[&str]) -> std::process::Output {
    let out = Command::new(env!("CARGO_BIN_EXE_gridee"))
        .args(args)
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "gridee {args:?} failed:\n{}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn generate_train_eval_bench_decode() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path();
    let data = root.join("data");
    fs::create_dir(&data).unwrap();
    fs::write(
        root.join("data.toml"),
        "event_types = [\"A\", \"B\"]\nrole_types = [\"x\", \"y\"]\nsentence_count = 40\nmax_len = 10\n",
    )
    .unwrap();
    fs::write(root.join("train.toml"), "epochs = 2\nk = 2\nd_h = 8\n").unwrap();

    gridee(&[
        "gen-data",
        "--config",
        s(&root.join("data.toml")),
        "--out",
        s(&data.join("train.jsonl")),
    ]);
    gridee(&[
        "gen-data",
        "--config",
        s(&root.join("data.toml")),
        "--out",
        s(&data.join("dev.jsonl")),
        "--seed",
        "3",
    ]);
    let ckpt = root.join("model.json");
    gridee(&[
        "train",
        "--config",
        s(&root.join("train.toml")),
        "--data",
        s(&data),
        "--out",
        s(&ckpt),
    ]);
    let log = fs::read_to_string(root.join("model.json.log.jsonl")).unwrap();
    assert_eq!(log.lines().count(), 2);
    assert!(log.contains("\"tc_f1\""));

    let report = root.join("report.json");
    gridee(&[
        "eval",
        "--ckpt",
        s(&ckpt),
        "--data",
        s(&data.join("dev.jsonl")),
        "--report",
        s(&report),
    ]);
    let json: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(&report).unwrap()).unwrap();
    for key in ["ti", "tc", "ai", "ac", "by_distance", "by_event_count"] {
        assert!(json.get(key).is_some(), "missing {key}");
    }

    let out = gridee(&[
        "bench",
        "--ckpt",
        s(&ckpt),
        "--data",
        s(&data.join("dev.jsonl")),
        "--batch",
        "1,2",
    ]);
    assert_eq!(String::from_utf8_lossy(&out.stdout).lines().count(), 2);

    let grid = root.join("grid.json");
    fs::write(
        &grid,
        r#"{"event_type": 0, "scores": [
            [[-1, -1, -1], [-1, 2, -1], [-1, -1, -1]],
            [[-1, 3, -1], [-1, -1, -1], [-1, -1, -1]],
            [[-1, -1, -1], [1, 1, -1], [-1, -1, -1]]
        ]}"#,
    )
    .unwrap();
    let out = gridee(&["decode", "--grid", s(&grid), "--strategy", "tw-aw"]);
    let events: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(events[0]["trigger"], serde_json::json!([1, 1]));
    assert_eq!(
        events[0]["arguments"],
        serde_json::json!([{"role": 0, "span": [0, 1]}])
    );
}

#[test]
fn bad_inputs_fail_cleanly() {
    let dir = tempfile::tempdir().unwrap();
    let grid = dir.path().join("bad.json");
    fs::write(&grid, "{\"event_type\": 0, \"scores\": [[[1]]]}").unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_gridee"))
        .args(["decode", "--grid", s(&grid)])
        .output()
        .unwrap();
    assert!(!out.status.success());
    let out = Command::new(env!("CARGO_BIN_EXE_gridee"))
        .args(["eval", "--ckpt", "/nonexistent", "--data", "/nonexistent"])
        .output()
        .unwrap();
    assert!(!out.status.success());
}
