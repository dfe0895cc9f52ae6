use std::path::Path;
use std::process::{Command, Output};

use aeroforge::config::{DistributionSpec, GeneratorConfig, ObjectClass};

fn aeroforge(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_aeroforge"))
        .args(args)
        .env_remove("AEROFORGE_THREADS")
        .output()
        .unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn write_config(dir: &Path, config: &GeneratorConfig) -> std::path::PathBuf {
    let p = dir.join("config.json");
    std::fs::write(&p, config.to_json_pretty()).unwrap();
    p
}

fn generate(dir: &Path, name: &str, extra: &[&str]) -> std::path::PathBuf {
    let out = dir.join(name);
    let mut args = vec![
        "generate",
        "--scenario",
        "counting",
        "--count",
        "12",
        "--seed",
        "3",
        "--out",
        s(&out),
    ];
    args.extend_from_slice(extra);
    let o = aeroforge(&args);
    assert!(o.status.success(), "{}", stderr(&o));
    out
}

#[test]
fn generate_from_config_file_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &GeneratorConfig::fire_default());
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for out in [&a, &b] {
        let o = aeroforge(&[
            "generate",
            "--config",
            s(&cfg),
            "--count",
            "10",
            "--out",
            s(out),
            "--seed",
            "1",
        ]);
        assert!(o.status.success(), "{}", stderr(&o));
        assert!(stdout(&o).contains("wrote 10 images"));
    }
    for i in 0..10 {
        let rel = format!("images/img_{i:06}.png");
        assert_eq!(
            std::fs::read(a.join(&rel)).unwrap(),
            std::fs::read(b.join(&rel)).unwrap()
        );
    }
    let strip = |p: &Path| -> Vec<String> {
        std::fs::read_to_string(p.join("manifest.jsonl"))
            .unwrap()
            .lines()
            .skip(1)
            .map(str::to_string)
            .collect()
    };
    assert_eq!(strip(&a), strip(&b));
}

#[test]
fn thread_env_var_does_not_change_output() {
    let dir = tempfile::tempdir().unwrap();
    let one = generate(dir.path(), "one", &["--threads", "1"]);
    let out = dir.path().join("env");
    let o = Command::new(env!("CARGO_BIN_EXE_aeroforge"))
        .args([
            "generate",
            "--scenario",
            "counting",
            "--count",
            "12",
            "--seed",
            "3",
            "--out",
            s(&out),
        ])
        .env("AEROFORGE_THREADS", "4")
        .output()
        .unwrap();
    assert!(o.status.success());
    for i in 0..12 {
        let rel = format!("images/img_{i:06}.png");
        assert_eq!(
            std::fs::read(one.join(&rel)).unwrap(),
            std::fs::read(out.join(&rel)).unwrap()
        );
    }
}

#[test]
fn impossible_overlap_exits_3_with_seed() {
    let dir = tempfile::tempdir().unwrap();
    let mut c = GeneratorConfig::counting_default();
    c.count_distribution = DistributionSpec::constant(2.0);
    let house = c
        .object_specs
        .iter_mut()
        .find(|s| s.class == ObjectClass::House)
        .unwrap();
    house.width = DistributionSpec::constant(60.0);
    house.height = DistributionSpec::constant(60.0);
    let cfg = write_config(dir.path(), &c);
    let out = dir.path().join("out");
    let o = aeroforge(&[
        "generate",
        "--config",
        s(&cfg),
        "--count",
        "3",
        "--out",
        s(&out),
        "--seed",
        "9",
    ]);
    assert_eq!(o.status.code(), Some(3));
    let seed = aeroforge::seed::derive_image_seed(9, 0);
    assert!(
        stderr(&o).contains(&format!("failing seed: {seed}")),
        "{}",
        stderr(&o)
    );
    assert!(!out.exists());
}

#[test]
fn invalid_config_exits_1_naming_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let mut c = GeneratorConfig::counting_default();
    c.image_width = 0;
    let cfg = write_config(dir.path(), &c);
    let o = aeroforge(&[
        "generate",
        "--config",
        s(&cfg),
        "--count",
        "1",
        "--out",
        s(&dir.path().join("x")),
    ]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("image_width"), "{}", stderr(&o));
}

#[test]
fn missing_inputs_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let ds = generate(dir.path(), "ds", &[]);
    let o = aeroforge(&[
        "evaluate",
        "--manifest",
        s(&ds),
        "--predictions",
        s(&dir.path().join("none.csv")),
        "--task",
        "count",
    ]);
    assert_eq!(o.status.code(), Some(2));
    let o = aeroforge(&[
        "generate",
        "--config",
        "/nonexistent.json",
        "--count",
        "1",
        "--out",
        s(&dir.path().join("y")),
    ]);
    assert_eq!(o.status.code(), Some(2));
    let o = aeroforge(&[
        "plot",
        "--log",
        "/nonexistent.csv",
        "--out",
        s(&dir.path().join("c.svg")),
    ]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn usage_errors_exit_1() {
    assert_eq!(
        aeroforge(&["generate", "--count", "1", "--out", "x", "--frobnicate"])
            .status
            .code(),
        Some(1)
    );
    assert_eq!(
        aeroforge(&["generate", "--count", "1", "--out", "x"])
            .status
            .code(),
        Some(1)
    );
    assert_eq!(aeroforge(&[]).status.code(), Some(1));
}

#[test]
fn every_subcommand_has_help() {
    let o = aeroforge(&["--help"]);
    assert!(o.status.success());
    for sub in [
        "generate", "validate", "stats", "split", "augment", "evaluate", "plot", "export",
        "defaults",
    ] {
        assert!(
            stdout(&o).contains(sub),
            "{sub} missing from top-level help"
        );
        let h = aeroforge(&[sub, "--help"]);
        assert!(h.status.success(), "{sub}");
        assert!(stdout(&h).contains("--threads"), "{sub}");
    }
    let h = stdout(&aeroforge(&["generate", "--help"]));
    for flag in [
        "--config",
        "--count",
        "--out",
        "--seed",
        "--balanced",
        "--density",
    ] {
        assert!(h.contains(flag), "{flag}");
    }
}

#[test]
fn split_augment_stats_evaluate_plot_export() {
    let dir = tempfile::tempdir().unwrap();
    let ds = generate(dir.path(), "ds", &["--density"]);
    let manifest = ds.join("manifest.jsonl");

    let o = aeroforge(&[
        "split",
        "--manifest",
        s(&manifest),
        "--val",
        "0.25",
        "--seed",
        "2",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("train 9 / val 3"), "{}", stdout(&o));

    let o = aeroforge(&[
        "augment",
        "--manifest",
        s(&manifest),
        "--ops",
        "hflip,rot90",
        "--multiplier",
        "2",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("added 9"));
    let o = aeroforge(&["augment", "--manifest", s(&manifest), "--ops", "shear"]);
    assert_eq!(o.status.code(), Some(1));
    let elsewhere = dir.path().join("elsewhere.jsonl");
    let o = aeroforge(&[
        "split",
        "--manifest",
        s(&manifest),
        "--val",
        "0.2",
        "--out",
        s(&elsewhere),
    ]);
    assert_eq!(o.status.code(), Some(1));

    assert!(aeroforge(&["validate", "--manifest", s(&manifest)])
        .status
        .success());

    let o = aeroforge(&["stats", "--manifest", s(&ds), "--format", "json"]);
    assert!(o.status.success());
    let stats: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(stats["total"], 21);
    assert_eq!(stats["augmented"], 9);
    assert_eq!(stats["splits"]["val"], 3);

    // Perfect predictions for the val split.
    let m = aeroforge::dataset::DatasetManifest::load(&manifest).unwrap();
    let mut csv = String::from("image_id,prediction\n");
    for r in m
        .rows
        .iter()
        .filter(|r| r.split == aeroforge::dataset::Split::Val)
    {
        csv.push_str(&format!(
            "{},{}\n",
            r.image_id,
            r.ground_truth.house_count.unwrap() as f64 + 0.5
        ));
    }
    let preds = dir.path().join("preds.csv");
    std::fs::write(&preds, csv).unwrap();
    let o = aeroforge(&[
        "evaluate",
        "--manifest",
        s(&manifest),
        "--predictions",
        s(&preds),
        "--task",
        "count",
        "--split",
        "val",
        "--round",
        "--format",
        "json",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let report: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(report["n"], 3);
    assert_eq!(report["counting"]["mse"], 0.25);
    assert_eq!(report["counting"]["mae"], 0.5);
    // Without a split filter the train rows have no predictions.
    let o = aeroforge(&[
        "evaluate",
        "--manifest",
        s(&manifest),
        "--predictions",
        s(&preds),
        "--task",
        "count",
    ]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("no prediction for"));
    let o = aeroforge(&[
        "evaluate",
        "--manifest",
        s(&manifest),
        "--predictions",
        s(&preds),
        "--task",
        "classify",
        "--split",
        "val",
    ]);
    assert_eq!(o.status.code(), Some(1));

    let log = dir.path().join("log.csv");
    let mut text = String::from("epoch,train,val\n");
    for e in 1..=18 {
        text.push_str(&format!("{e},{},{}\n", 40.0 / e as f64, 45.0 / e as f64));
    }
    std::fs::write(&log, text).unwrap();
    let svg = dir.path().join("curves.svg");
    let o = aeroforge(&["plot", "--log", s(&log), "--out", s(&svg)]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(std::fs::read_to_string(&svg)
        .unwrap()
        .contains(r#"data-x-min="1" data-x-max="18""#));
    assert!(dir.path().join("curves.csv").is_file());
    std::fs::write(&log, "epoch,train,val\n1,2,3\nfoo,1,1\n").unwrap();
    let o = aeroforge(&[
        "plot",
        "--log",
        s(&log),
        "--out",
        s(&dir.path().join("bad.svg")),
    ]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("line 3"), "{}", stderr(&o));

    let o = aeroforge(&["export", "--manifest", s(&manifest)]);
    assert!(o.status.success());
    assert_eq!(stdout(&o).lines().count(), 22);
}

#[test]
fn validate_reports_and_exits_1() {
    let dir = tempfile::tempdir().unwrap();
    let ds = generate(dir.path(), "ds", &[]);
    std::fs::remove_file(ds.join("images/img_000004.png")).unwrap();
    let o = aeroforge(&["validate", "--manifest", s(&ds), "--format", "json"]);
    assert_eq!(o.status.code(), Some(1));
    let report: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(report["violations"][0]["kind"], "missing_file");
    assert_eq!(report["violations"][0]["image_id"], "img_000004");
}
