use std::process::Command;

fn memnet() -> Command {
    Command::new(env!("CARGO_BIN_EXE_memnet"))
}

#[test]
fn characterize_prints_ranges() {
    let out = memnet().args(["characterize", "--model", "titania"]).output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("linear range"));
}

#[test]
fn train_writes_reports() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let status = memnet()
        .args(["train", "--dataset", "xor", "--model", "silver", "--mode", "device"])
        .args(["--epochs", "20", "--seed", "3", "--dump-waveforms", "--trace-energy"])
        .arg("--out")
        .arg(&out)
        .output()
        .unwrap()
        .status;
    assert!(status.success());
    for f in ["cost.csv", "metrics.txt", "report.txt", "conductance_1.csv", "conductance_2.csv", "steps.csv", "waveforms_1.csv"] {
        assert!(out.join(f).exists(), "{f}");
    }
    let cost = std::fs::read_to_string(out.join("cost.csv")).unwrap();
    assert_eq!(cost.lines().count(), 21);
    let report = std::fs::read_to_string(out.join("report.txt")).unwrap();
    assert!(report.contains("epochs = 20") && report.contains("seed = 3"));
    assert!(report.contains("kappa_inc"));
}

#[test]
fn errors_map_to_categories() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("x");
    let code = |args: &[&str]| memnet().args(args).arg("--out").arg(&out).output().unwrap().status.code();
    assert_eq!(code(&["train", "--dataset", "no_such_thing"]), Some(7));
    assert_eq!(code(&["train", "--dataset", "iris", "--epochs", "0"]), Some(9));

    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "[network]\ngain = -1.0\n").unwrap();
    let status = memnet()
        .args(["train", "--dataset", "iris", "--config"])
        .arg(&bad)
        .arg("--out")
        .arg(&out)
        .output()
        .unwrap()
        .status;
    assert_eq!(status.code(), Some(2));

    let csv = dir.path().join("empty.csv");
    std::fs::write(&csv, "").unwrap();
    assert_eq!(code(&["train", "--dataset", csv.to_str().unwrap()]), Some(8));
}

#[test]
fn experiment_from_spec() {
    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("spec.toml");
    std::fs::write(
        &spec,
        "[experiment]\nkind = \"fault\"\ndataset = \"iris\"\nmode = \"behavioral\"\nseeds = [1, 2]\n\
         epochs = 3\nfault_fraction = 0.1\n",
    )
    .unwrap();
    let out = dir.path().join("exp");
    let status = memnet()
        .args(["experiment", "--spec"])
        .arg(&spec)
        .arg("--out")
        .arg(&out)
        .output()
        .unwrap()
        .status;
    assert!(status.success());
    let summary = std::fs::read_to_string(out.join("summary.txt")).unwrap();
    assert!(summary.contains("baseline:"));
    assert!(out.join("seed_2").join("metrics.txt").exists());
    assert_eq!(std::fs::read_to_string(out.join("runs.csv")).unwrap().lines().count(), 5);
}
