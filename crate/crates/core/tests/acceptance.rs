//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any fails.

use std::collections::BTreeMap;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::time::{Duration, Instant};

use aeroforge::config::{GeneratorConfig, Scenario};
use aeroforge::dataset::{
    augment_dataset, split_dataset, AugmentOp, AugmentationSpec, DatasetManifest, ManifestHeader,
    ManifestRow, Split, MANIFEST_FILE,
};
use aeroforge::eval::{evaluate_classification, evaluate_counting, PredictionSet};
use aeroforge::groundtruth::{derive_ground_truth, render_density_map, ClassLabel, GroundTruth};
use aeroforge::raster::{render_scene, Backgrounds};
use aeroforge::scene::sample_scene;
use aeroforge::seed::{derive_image_seed, Stream};

type Outcome = Result<String, String>;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_aeroforge"));
    c.env_remove("AEROFORGE_THREADS")
        .env_remove("SOURCE_DATE_EPOCH");
    c
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn files_under(root: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in std::fs::read_dir(&dir).unwrap() {
            let p = entry.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.insert(
                    p.strip_prefix(root).unwrap().to_path_buf(),
                    std::fs::read(&p).unwrap(),
                );
            }
        }
    }
    out
}

/// Manifest lines as JSON values with the creation timestamp removed.
fn manifest_without_timestamp(bytes: &[u8]) -> Vec<serde_json::Value> {
    std::str::from_utf8(bytes)
        .unwrap()
        .lines()
        .map(|l| {
            let mut v: serde_json::Value = serde_json::from_str(l).unwrap();
            if let Some(o) = v.as_object_mut() {
                o.remove("created_at");
            }
            v
        })
        .collect()
}

fn compare_trees(a: &Path, b: &Path) -> Result<usize, String> {
    let (fa, fb) = (files_under(a), files_under(b));
    ensure(fa.keys().eq(fb.keys()), || {
        format!(
            "file sets differ between {} and {}",
            a.display(),
            b.display()
        )
    })?;
    for (name, bytes) in &fa {
        let other = &fb[name];
        if name == Path::new(MANIFEST_FILE) {
            ensure(
                manifest_without_timestamp(bytes) == manifest_without_timestamp(other),
                || "manifests differ beyond created_at".into(),
            )?;
        } else {
            ensure(bytes == other, || format!("{} differs", name.display()))?;
        }
    }
    Ok(fa.len())
}

fn determinism(tmp: &Path) -> Outcome {
    let mut detail = Vec::new();
    for (scenario, extra) in [("counting", "--density"), ("fire", "--balanced")] {
        let mut dirs = Vec::new();
        for (run_no, threads) in [(0, "1"), (1, "1"), (2, "8")] {
            let out = tmp.join(format!("det-{scenario}-{run_no}"));
            let start = Instant::now();
            let o = run(&[
                "generate",
                "--scenario",
                scenario,
                "--count",
                "500",
                "--seed",
                "1",
                extra,
                "--threads",
                threads,
                "--out",
                out.to_str().unwrap(),
                "--quiet",
            ]);
            let secs = start.elapsed().as_secs_f64();
            ensure(o.status.success(), || {
                format!("generate failed: {}", String::from_utf8_lossy(&o.stderr))
            })?;
            ensure(secs < 60.0, || {
                format!("{scenario} run took {secs:.1}s (target < 60 s)")
            })?;
            if run_no == 0 {
                detail.push(format!("{scenario} 500 in {secs:.1}s"));
            }
            dirs.push(out);
        }
        let n = compare_trees(&dirs[0], &dirs[1])?;
        compare_trees(&dirs[0], &dirs[2])?;
        detail.push(format!(
            "{n} files identical across reruns and 1 vs 8 threads"
        ));
    }
    Ok(detail.join("; "))
}

fn scale_parity(tmp: &Path) -> Outcome {
    let start = Instant::now();
    let fire_dir = tmp.join("scale-fire");
    let o = run(&[
        "generate",
        "--scenario",
        "fire",
        "--count",
        "2000",
        "--seed",
        "1",
        "--balanced",
        "--out",
        fire_dir.to_str().unwrap(),
        "--quiet",
    ]);
    ensure(o.status.success(), || {
        format!(
            "fire generation exit {:?}: {}",
            o.status.code(),
            String::from_utf8_lossy(&o.stderr)
        )
    })?;
    let fire = DatasetManifest::load(&fire_dir.join(MANIFEST_FILE)).map_err(|e| e.to_string())?;
    let n_fire = fire
        .rows
        .iter()
        .filter(|r| r.ground_truth.class_label == Some(ClassLabel::Fire))
        .count();
    let n_forest = fire
        .rows
        .iter()
        .filter(|r| r.ground_truth.class_label == Some(ClassLabel::Forest))
        .count();
    ensure((n_fire, n_forest) == (1000, 1000), || {
        format!("balance {n_fire}/{n_forest}")
    })?;

    let count_dir = tmp.join("scale-count");
    let o = run(&[
        "generate",
        "--scenario",
        "counting",
        "--count",
        "10000",
        "--seed",
        "1",
        "--out",
        count_dir.to_str().unwrap(),
        "--quiet",
    ]);
    ensure(o.status.code() != Some(3), || {
        format!(
            "placement exhausted: {}",
            String::from_utf8_lossy(&o.stderr)
        )
    })?;
    ensure(o.status.success(), || {
        format!(
            "counting generation exit {:?}: {}",
            o.status.code(),
            String::from_utf8_lossy(&o.stderr)
        )
    })?;
    let counting =
        DatasetManifest::load(&count_dir.join(MANIFEST_FILE)).map_err(|e| e.to_string())?;
    ensure(counting.rows.len() == 10_000, || {
        format!("{} rows", counting.rows.len())
    })?;
    let mut hist = [0usize; 39];
    for r in &counting.rows {
        let c = r.ground_truth.house_count.ok_or("missing count")? as usize;
        ensure(c <= 38, || format!("{} has count {c}", r.image_id))?;
        hist[c] += 1;
    }
    let p = 1.0 / 39.0;
    let max_dev = hist
        .iter()
        .map(|&h| (h as f64 / 10_000.0 - p).abs())
        .fold(0.0, f64::max);
    // Binomial standard error of one bin; ±1.5% is about 9.5 of them.
    let se = (p * (1.0 - p) / 10_000.0).sqrt();
    ensure(max_dev <= 0.015, || {
        format!("histogram bin deviates by {max_dev:.4}")
    })?;

    for dir in [&fire_dir, &count_dir] {
        let o = run(&["validate", "--manifest", dir.to_str().unwrap(), "--quiet"]);
        ensure(o.status.success(), || {
            format!(
                "{} fails validation: {}",
                dir.display(),
                String::from_utf8_lossy(&o.stdout)
            )
        })?;
    }
    let total = start.elapsed();
    ensure(total < Duration::from_secs(15 * 60), || {
        format!("took {:.0}s (target < 15 min)", total.as_secs_f64())
    })?;
    Ok(format!(
        "fire 1000/1000; counting 10000 in [0,38], max bin deviation {max_dev:.4} (se {se:.4}); both validate; {:.0}s",
        total.as_secs_f64()
    ))
}

fn synthetic_manifest(scenario: Scenario, truths: &[u32]) -> DatasetManifest {
    DatasetManifest {
        header: ManifestHeader::new(scenario, 100, 100, 38),
        rows: truths
            .iter()
            .enumerate()
            .map(|(i, &t)| {
                let id = format!("img_{i:06}");
                let (class_label, house_count) = match scenario {
                    Scenario::FireClassification => (
                        Some(if t == 1 {
                            ClassLabel::Fire
                        } else {
                            ClassLabel::Forest
                        }),
                        None,
                    ),
                    Scenario::HouseCounting => (None, Some(t)),
                };
                ManifestRow {
                    image_id: id.clone(),
                    path: format!("images/{id}.png"),
                    image_seed: None,
                    split: Split::Val,
                    ground_truth: GroundTruth {
                        image_id: id,
                        class_label,
                        house_count,
                        boxes: vec![],
                        density_ref: None,
                    },
                    config_hash: None,
                    detail_version: None,
                    parent_id: None,
                    augmentation: None,
                }
            })
            .collect(),
    }
}

fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    a == b || (a - b).abs() <= tol * a.abs().max(b.abs())
}

fn metric_oracles() -> Outcome {
    let mut s = Stream::from_seed(2024);
    let mut worst = 0.0f64;
    for set in 0..100 {
        let n = s.uniform_int(1, 20) as usize;
        // Counting: brute force with pairwise-summed squares in reverse order.
        let truths: Vec<u32> = (0..n).map(|_| s.uniform_int(0, 38) as u32).collect();
        let preds: Vec<f64> = (0..n).map(|_| s.uniform_real(0.0, 45.0)).collect();
        let m = synthetic_manifest(Scenario::HouseCounting, &truths);
        let ps = PredictionSet::from_pairs(
            preds
                .iter()
                .enumerate()
                .map(|(i, &p)| (format!("img_{i:06}"), p)),
        );
        let got = evaluate_counting(&ps, &m, None, 10, false)
            .map_err(|e| e.to_string())?
            .counting
            .unwrap();
        let sq: Vec<f64> = (0..n)
            .rev()
            .map(|i| (preds[i] - truths[i] as f64).powi(2))
            .collect();
        let ab: Vec<f64> = (0..n)
            .rev()
            .map(|i| (truths[i] as f64 - preds[i]).abs())
            .collect();
        let mse = sq.iter().sum::<f64>() / n as f64;
        let mae = ab.iter().sum::<f64>() / n as f64;
        for (name, g, w) in [
            ("mse", got.mse, mse),
            ("mae", got.mae, mae),
            ("rmse", got.rmse, mse.sqrt()),
        ] {
            ensure(rel_close(g, w, 1e-12), || {
                format!("set {set}: {name} {g} vs oracle {w}")
            })?;
            if w != 0.0 {
                worst = worst.max((g - w).abs() / w.abs());
            }
        }
        // Classification.
        let labels: Vec<u32> = (0..n).map(|_| s.uniform_int(0, 1) as u32).collect();
        let guesses: Vec<u32> = (0..n).map(|_| s.uniform_int(0, 1) as u32).collect();
        let m = synthetic_manifest(Scenario::FireClassification, &labels);
        let ps = PredictionSet::from_pairs(
            guesses
                .iter()
                .enumerate()
                .map(|(i, &p)| (format!("img_{i:06}"), p as f64)),
        );
        let got = evaluate_classification(&ps, &m, None, 10)
            .map_err(|e| e.to_string())?
            .accuracy
            .unwrap();
        let correct = labels.iter().zip(&guesses).filter(|(a, b)| a == b).count();
        let want = correct as f64 / n as f64;
        ensure(rel_close(got, want, 1e-12), || {
            format!("set {set}: accuracy {got} vs {want}")
        })?;
    }
    // Errors of 6 and 2 give mse (36 + 4) / 2 = 20.
    let m = synthetic_manifest(Scenario::HouseCounting, &[10, 10]);
    let ps = PredictionSet::from_pairs([("img_000000", 16.0), ("img_000001", 8.0)]);
    let c = evaluate_counting(&ps, &m, None, 10, false)
        .map_err(|e| e.to_string())?
        .counting
        .unwrap();
    ensure(c.mse == 20.0, || format!("mse {}", c.mse))?;
    ensure((c.rmse - 4.472).abs() <= 1e-3, || {
        format!("rmse {}", c.rmse)
    })?;
    // 96 of 100 correct.
    let labels: Vec<u32> = (0..100).map(|i| (i % 2) as u32).collect();
    let guesses: Vec<f64> = (0..100)
        .map(|i| {
            if i < 4 {
                1.0 - (i % 2) as f64
            } else {
                (i % 2) as f64
            }
        })
        .collect();
    let ps = PredictionSet::from_pairs(
        guesses
            .iter()
            .enumerate()
            .map(|(i, &p)| (format!("img_{i:06}"), p)),
    );
    let acc = evaluate_classification(
        &ps,
        &synthetic_manifest(Scenario::FireClassification, &labels),
        None,
        10,
    )
    .map_err(|e| e.to_string())?
    .accuracy
    .unwrap();
    ensure(acc == 0.96, || format!("accuracy {acc}"))?;
    Ok(format!(
        "100 random sets within 1e-12 (worst {worst:.1e}); mse 20 -> rmse {:.6}; 96/100 -> {acc}",
        c.rmse
    ))
}

fn density_integral() -> Outcome {
    let mut s = Stream::from_seed(31337);
    let config = GeneratorConfig::counting_default();
    let master = s.next_u64();
    let mut worst = 0.0f64;
    for i in 0..1000u64 {
        let seed = derive_image_seed(master, i);
        let scene = sample_scene(&config, seed).map_err(|e| e.to_string())?;
        let sigma = s.uniform_real(0.5, 6.0);
        let count = derive_ground_truth(&scene, "d").house_count.unwrap() as f64;
        let total = render_density_map(&scene, sigma).total();
        let err = (total - count).abs();
        ensure(err <= 1e-3 * count + 1e-6, || {
            format!("seed {seed:#x}: integral {total} for count {count}")
        })?;
        worst = worst.max(err);
    }
    Ok(format!("1000 scenes, worst absolute error {worst:.2e}"))
}

fn augmentation_safety(tmp: &Path) -> Outcome {
    let configs = [
        GeneratorConfig::fire_default(),
        GeneratorConfig::counting_default(),
    ];
    let mut pairs = 0;
    for i in 0..2000u64 {
        let config = &configs[(i % 2) as usize];
        let scene = sample_scene(config, derive_image_seed(99, i)).map_err(|e| e.to_string())?;
        let gt = derive_ground_truth(&scene, "p");
        for op in AugmentOp::ALL {
            let t = op.apply_ground_truth(&gt, 100, 100, "c");
            ensure(
                t.house_count == gt.house_count && t.class_label == gt.class_label,
                || format!("scene {i}, {op}: labels changed"),
            )?;
            ensure(t.house_boxes() == gt.house_boxes(), || {
                format!("scene {i}, {op}: house boxes changed")
            })?;
            pairs += 1;
        }
        let raster =
            render_scene(&scene, config, &Backgrounds::none()).map_err(|e| e.to_string())?;
        for op in [AugmentOp::HFlip, AugmentOp::VFlip] {
            ensure(op.apply_raster(&op.apply_raster(&raster)) == raster, || {
                format!("scene {i}: double {op} not identity")
            })?;
        }
    }
    // The same through the on-disk augmentation path.
    let dir = tmp.join("augment");
    let o = run(&[
        "generate",
        "--scenario",
        "counting",
        "--count",
        "40",
        "--seed",
        "4",
        "--density",
        "--out",
        dir.to_str().unwrap(),
        "--quiet",
    ]);
    ensure(o.status.success(), || "generate failed".into())?;
    let path = dir.join(MANIFEST_FILE);
    let m = DatasetManifest::load(&path).map_err(|e| e.to_string())?;
    let m = split_dataset(&m, 0.25, 1).map_err(|e| e.to_string())?;
    let spec =
        AugmentationSpec::parse("hflip,vflip,rot90,rot180,rot270", 6).map_err(|e| e.to_string())?;
    let aug = augment_dataset(&m, &path, &spec).map_err(|e| e.to_string())?;
    aug.save(&path).map_err(|e| e.to_string())?;
    let children: Vec<&ManifestRow> = aug.rows.iter().filter(|r| r.parent_id.is_some()).collect();
    ensure(children.len() == 30 * 5, || {
        format!("{} augmented rows", children.len())
    })?;
    for c in &children {
        let parent = aug.row(c.parent_id.as_ref().unwrap()).unwrap();
        ensure(
            c.ground_truth.house_count == parent.ground_truth.house_count,
            || format!("{} count changed", c.image_id),
        )?;
    }
    let o = run(&["validate", "--manifest", path.to_str().unwrap()]);
    ensure(o.status.success(), || {
        format!(
            "augmented manifest invalid: {}",
            String::from_utf8_lossy(&o.stdout)
        )
    })?;
    Ok(format!("{pairs} (scene, op) pairs keep labels; double flips bitwise identical; {} on-disk copies validate", children.len()))
}

fn copy_dir(from: &Path, to: &Path) {
    for (rel, bytes) in files_under(from) {
        let dest = to.join(rel);
        std::fs::create_dir_all(dest.parent().unwrap()).unwrap();
        std::fs::write(dest, bytes).unwrap();
    }
}

fn corrupted_manifests(tmp: &Path) -> Outcome {
    let base = tmp.join("fixture-base");
    let o = run(&[
        "generate",
        "--scenario",
        "counting",
        "--count",
        "30",
        "--seed",
        "8",
        "--out",
        base.to_str().unwrap(),
        "--quiet",
    ]);
    ensure(o.status.success(), || "generate failed".into())?;
    let o = run(&["validate", "--manifest", base.to_str().unwrap()]);
    ensure(o.status.code() == Some(0), || {
        format!(
            "pristine fixture rejected: {}",
            String::from_utf8_lossy(&o.stdout)
        )
    })?;

    type Fault = fn(&Path, &mut DatasetManifest);
    let faults: [(&str, &str, &str, Fault); 3] = [
        ("missing file", "missing file", "img_000007", |dir, _| {
            std::fs::remove_file(dir.join("images/img_000007.png")).unwrap();
        }),
        ("duplicate id", "duplicate id", "img_000003", |_, m| {
            let dup = m.rows[3].clone();
            m.rows.push(dup);
        }),
        (
            "out-of-range count",
            "count out of range",
            "img_000012",
            |_, m| {
                m.rows[12].ground_truth.house_count = Some(40);
            },
        ),
    ];
    let mut seen = Vec::new();
    for (name, marker, id, inject) in faults {
        let dir = tmp.join(format!("fixture-{}", name.replace(' ', "-")));
        copy_dir(&base, &dir);
        let path = dir.join(MANIFEST_FILE);
        let mut m = DatasetManifest::load(&path).map_err(|e| e.to_string())?;
        inject(&dir, &mut m);
        m.save(&path).map_err(|e| e.to_string())?;
        let o = run(&["validate", "--manifest", path.to_str().unwrap()]);
        let report = String::from_utf8_lossy(&o.stdout);
        ensure(o.status.code() == Some(1), || {
            format!("{name}: exit {:?}", o.status.code())
        })?;
        ensure(
            report.lines().any(|l| l.contains(marker) && l.contains(id)),
            || format!("{name}: report does not name {id}: {report}"),
        )?;
        seen.push(name);
    }
    Ok(format!("{} each caught with exit 1", seen.join(", ")))
}

fn main() {
    let tmp = tempfile::tempdir().expect("temp dir");
    let t = tmp.path();
    let criteria: Vec<(&str, Box<dyn Fn() -> Outcome>)> = vec![
        ("determinism", Box::new(|| determinism(t))),
        ("scale parity", Box::new(|| scale_parity(t))),
        ("metric oracles", Box::new(metric_oracles)),
        ("density integral", Box::new(density_integral)),
        ("augmentation safety", Box::new(|| augmentation_safety(t))),
        ("corrupted manifests", Box::new(|| corrupted_manifests(t))),
    ];
    let mut failed = 0;
    for (name, check) in &criteria {
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            Err(p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into()))
        });
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS  {name:<22} {detail} [{secs:.1}s]"),
            Err(why) => {
                failed += 1;
                println!("FAIL  {name:<22} {why} [{secs:.1}s]");
            }
        }
    }
    println!(
        "acceptance: {} passed, {failed} failed",
        criteria.len() - failed
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
