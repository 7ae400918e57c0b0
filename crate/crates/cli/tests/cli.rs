use std::path::PathBuf;
use std::process::Command;

fn slfv() -> Command {
    Command::new(env!("CARGO_BIN_EXE_slfv"))
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("slfv-cli-{}-{name}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    dir
}

#[test]
fn verify_formulas_writes_a_passing_report() {
    let out = scratch("formulas");
    let status = slfv()
        .args(["verify:formulas", "--seed", "1", "--out"])
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());
    let report: serde_json::Value = serde_json::from_slice(&std::fs::read(out.join("formulas.json")).unwrap()).unwrap();
    assert_eq!(report["suite"], "formulas");
    assert!(report["rows"].as_array().unwrap().iter().all(|r| r["pass"] == true));
}

#[test]
fn forward_runs_are_reproducible_from_a_config_file() {
    let dir = scratch("forward");
    std::fs::create_dir_all(&dir).unwrap();
    let config = dir.join("forward.json");
    std::fs::write(
        &config,
        r#"{"kind": "forward", "n": 9, "window": [-2, 2], "snapshots": [0.5, 1.0], "w0": {"kind": "constant", "value": 0.5}}"#,
    )
    .unwrap();
    let mut outputs = Vec::new();
    for (run, threads) in [("a", "1"), ("b", "2")] {
        let out = dir.join(run);
        let status = slfv()
            .arg("forward")
            .arg("--config")
            .arg(&config)
            .args(["--seed", "7", "--replicates", "3", "--threads", threads, "--out"])
            .arg(&out)
            .status()
            .unwrap();
        assert!(status.success());
        outputs.push(std::fs::read_to_string(out.join("snapshots.csv")).unwrap());
    }
    assert_eq!(outputs[0], outputs[1]);
    assert!(outputs[0].starts_with("replicate,t,cell_index,x_center,w\n"));
    let replicates: std::collections::BTreeSet<_> = outputs[0]
        .lines()
        .skip(1)
        .map(|l| l.split(',').next().unwrap())
        .collect();
    assert_eq!(replicates.len(), 3);
}

#[test]
fn bad_arguments_fail() {
    assert!(!slfv().arg("backward").status().unwrap().success());
    let missing = slfv()
        .args(["pde", "--config", "/nonexistent/config.json"])
        .output()
        .unwrap();
    assert_eq!(missing.status.code(), Some(2));
}
