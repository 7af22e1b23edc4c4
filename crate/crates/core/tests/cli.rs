use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use evigrid::pipeline::represent_dataset;
use evigrid::sim::{read_dataset, Agent, SensorSpec, StaticShape, Trajectory, WorldSpec};
use evigrid::store::{write_predictions, PredInfo};

fn evigrid(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_evigrid")).args(args).env_remove("EVIGRID_THREADS").output().expect("binary runs")
}

fn ok(args: &[&str]) -> Output {
    let out = evigrid(args);
    assert!(out.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
    out
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

/// Relative path to contents for every file below `dir`.
fn tree(dir: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    fn walk(root: &Path, dir: &Path, out: &mut BTreeMap<PathBuf, Vec<u8>>) {
        for entry in std::fs::read_dir(dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                walk(root, &path, out);
            } else {
                out.insert(path.strip_prefix(root).unwrap().to_path_buf(), std::fs::read(&path).unwrap());
            }
        }
    }
    let mut out = BTreeMap::new();
    walk(dir, dir, &mut out);
    out
}

fn street_spec() -> WorldSpec {
    WorldSpec {
        static_shapes: vec![
            StaticShape::Wall { from: [-60.0, 8.745], to: [60.0, 8.745] },
            StaticShape::Wall { from: [-60.0, -8.745], to: [60.0, -8.745] },
        ],
        agents: vec![Agent {
            length: 4.62,
            width: 1.98,
            trajectory: Trajectory::straight([18.0, 3.135], [-60.0, 3.135], 8.0),
        }],
        ego: Trajectory::straight([0.0, 0.0], [100.0, 0.0], 3.3),
        sensor: SensorSpec { beams: 1440, ..SensorSpec::default() },
        seed: 5,
        ground_points: false,
    }
}

/// Runs gen and repr on a one-sequence street scene.
fn small_pipeline(root: &Path) -> (PathBuf, PathBuf) {
    let spec = root.join("spec.json");
    std::fs::write(&spec, serde_json::to_vec_pretty(&street_spec()).unwrap()).unwrap();
    let ds = root.join("ds");
    ok(&["gen", "--spec", p(&spec), "--out", p(&ds), "--quiet"]);
    let repr = root.join("repr");
    ok(&["repr", "--dataset", p(&ds), "--out", p(&repr), "--quiet"]);
    (ds, repr)
}

#[test]
fn help_and_version_exit_zero() {
    assert!(evigrid(&["--help"]).status.success());
    assert!(evigrid(&["--version"]).status.success());
    assert_eq!(evigrid(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(evigrid(&["gen", "--out", "x"]).status.code(), Some(2));
}

#[test]
fn standard_suite_is_thirty_sequences_and_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    let out = ok(&["gen", "--standard-suite", "--seed", "7", "--out", p(&a)]);
    assert!(stderr(&out).contains("30 sequences, 600 frames"));
    ok(&["gen", "--standard-suite", "--seed", "7", "--out", p(&b), "--threads", "2"]);
    let seqs = std::fs::read_dir(&a).unwrap().filter(|e| e.as_ref().unwrap().path().is_dir()).count();
    assert_eq!(seqs, 30);
    assert!(tree(&a) == tree(&b));
}

#[test]
fn malformed_spec_reports_line_and_column() {
    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("bad.json");
    std::fs::write(&spec, "{\n  \"ego\": {\"waypoints\": [[0, 0]],}\n}\n").unwrap();
    let out = evigrid(&["gen", "--spec", p(&spec), "--out", p(&dir.path().join("o"))]);
    assert_eq!(out.status.code(), Some(2));
    let msg = stderr(&out);
    assert!(msg.contains("line 2") && msg.contains("column"), "{msg}");
}

#[test]
fn invalid_spec_and_missing_input_codes() {
    let dir = tempfile::tempdir().unwrap();
    let mut spec = street_spec();
    spec.agents[0].width = 0.0;
    let path = dir.path().join("spec.json");
    std::fs::write(&path, serde_json::to_vec(&spec).unwrap()).unwrap();
    let out = evigrid(&["gen", "--spec", p(&path), "--out", p(&dir.path().join("o"))]);
    assert_eq!(out.status.code(), Some(2));
    let missing = dir.path().join("nope.json");
    assert_eq!(evigrid(&["gen", "--spec", p(&missing), "--out", "o"]).status.code(), Some(3));
    let out = evigrid(&["repr", "--dataset", p(&dir.path().join("none")), "--out", "o"]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn repr_segment_predict_eval_round() {
    let dir = tempfile::tempdir().unwrap();
    let (ds, repr) = small_pipeline(dir.path());
    let before = tree(&ds);

    let files = tree(&repr.join("seq000"));
    for kind in ["sgm", "rgm", "eogm"] {
        let n = files.keys().filter(|k| k.to_str().unwrap().ends_with(&format!("_{kind}.egrd"))).count();
        assert_eq!(n, 20, "{kind}");
    }
    let manifest: serde_json::Value =
        serde_json::from_slice(&std::fs::read(repr.join("manifest.json")).unwrap()).unwrap();
    let f3 = &manifest["sequences"][0]["frames"][3];
    assert_eq!(f3["rgm_past_frame"], 0);
    assert_eq!(f3["rgm_flagged"], true);
    assert_eq!(manifest["sequences"][0]["frames"][5]["rgm_flagged"], false);

    let masks = dir.path().join("masks");
    let out = ok(&["segment", "--repr", p(&repr), "--out", p(&masks)]);
    let table = stderr(&out);
    assert!(table.contains("seq000") && table.contains("average"), "{table}");
    let out = ok(&["segment", "--repr", p(&repr), "--out", p(&masks), "--json", "--quiet"]);
    let json: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(json["dynamic_iou"].as_f64().unwrap() > 0.5);

    let pred = dir.path().join("pred");
    let out = ok(&["predict", "--repr", p(&repr), "--masks", p(&masks), "--out", p(&pred)]);
    let line = stderr(&out).lines().find(|l| l.starts_with("latency: ")).unwrap().to_owned();
    let ms = line.trim_start_matches("latency: ").trim_end_matches(" ms per frame");
    assert_eq!(ms.split('.').nth(1).unwrap().len(), 3, "{line}");
    assert_eq!(tree(&pred.join("seq000")).len(), 15);

    let base = dir.path().join("base");
    ok(&["predict", "--repr", p(&repr), "--masks", p(&masks), "--baseline", "persistence", "--out", p(&base)]);
    let pm: serde_json::Value = serde_json::from_slice(&std::fs::read(base.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(pm["predictor"], "persistence");
    assert_ne!(tree(&pred), tree(&base));

    let report = dir.path().join("report");
    ok(&["eval", "--pred", p(&pred), "--dataset", p(&ds), "--masks", p(&masks), "--out", p(&report)]);
    let r: serde_json::Value = serde_json::from_slice(&std::fs::read(report.join("report.json")).unwrap()).unwrap();
    let keys: Vec<&str> = r.as_object().unwrap().keys().map(String::as_str).collect();
    for k in [
        "mse_per_step",
        "dynamic_mse_per_step",
        "is_per_step",
        "mse_avg",
        "dynamic_mse_avg",
        "is_avg",
        "iou_static",
        "iou_dynamic",
        "iou_mean",
        "samples",
    ] {
        assert!(keys.contains(&k), "{k}");
    }
    assert_eq!(r["mse_per_step"].as_array().unwrap().len(), 15);
    assert!(std::fs::read_to_string(report.join("report.txt")).unwrap().contains("avg"));

    assert!(tree(&ds) == before, "inputs were modified");
}

#[test]
fn learned_mode_needs_a_model_and_training_is_seeded() {
    let dir = tempfile::tempdir().unwrap();
    let (_, repr) = small_pipeline(dir.path());
    let out = evigrid(&["segment", "--repr", p(&repr), "--out", p(&dir.path().join("m")), "--mode", "learned"]);
    assert_eq!(out.status.code(), Some(2));

    let (a, b) = (dir.path().join("a.eseg"), dir.path().join("b.eseg"));
    let out =
        ok(&["train-seg", "--repr", p(&repr), "--out", p(&a), "--epochs", "1", "--half-width", "2", "--seed", "3"]);
    assert_eq!(stderr(&out).lines().filter(|l| l.starts_with("epoch")).count(), 1);
    ok(&["train-seg", "--repr", p(&repr), "--out", p(&b), "--epochs", "1", "--half-width", "2", "--seed", "3"]);
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());

    ok(&["segment", "--repr", p(&repr), "--out", p(&dir.path().join("lm")), "--mode", "learned", "--model", p(&a)]);
}

#[test]
fn eval_of_truth_has_zero_error() {
    let dir = tempfile::tempdir().unwrap();
    let (ds, _) = small_pipeline(dir.path());
    let dataset = read_dataset(&ds).unwrap();
    let seqs = represent_dataset(&dataset, &dataset.config).unwrap();
    let preds: Vec<Vec<evigrid::Ogm>> =
        seqs.iter().map(|s| s.frames[5..20].iter().map(|f| f.eogm.to_ogm()).collect()).collect();
    let info = PredInfo { predictor: "truth".into(), masks: "none".into(), past_frames: 5, horizon: 15 };
    let pred = dir.path().join("pred");
    write_predictions(&pred, &info, &seqs, &preds).unwrap();
    let out = ok(&["eval", "--pred", p(&pred), "--dataset", p(&ds), "--out", p(&dir.path().join("r")), "--json"]);
    let r: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    // probabilities are stored as f32
    assert!(r["mse_avg"].as_f64().unwrap() < 1e-12);
    assert!(r["dynamic_mse_avg"].as_f64().unwrap() < 1e-12);
}

#[test]
fn eval_rejects_misaligned_predictions() {
    let dir = tempfile::tempdir().unwrap();
    let (_, repr) = small_pipeline(dir.path());
    let pred = dir.path().join("pred");
    ok(&["predict", "--repr", p(&repr), "--gt-masks", "--horizon", "10", "--out", p(&pred)]);
    let mut short = street_spec();
    short.seed = 99;
    let spec = dir.path().join("short.json");
    std::fs::write(&spec, serde_json::to_vec(&short).unwrap()).unwrap();
    let ds12 = dir.path().join("ds12");
    ok(&["gen", "--spec", p(&spec), "--frames", "12", "--out", p(&ds12)]);
    let out = evigrid(&["eval", "--pred", p(&pred), "--dataset", p(&ds12), "--out", p(&dir.path().join("r"))]);
    assert_eq!(out.status.code(), Some(2), "{}", stderr(&out));
    // predicting past the end of a sequence is a misalignment too
    let repr12 = dir.path().join("repr12");
    ok(&["repr", "--dataset", p(&ds12), "--out", p(&repr12)]);
    let out = evigrid(&["predict", "--repr", p(&repr12), "--gt-masks", "--out", p(&dir.path().join("p12"))]);
    assert_eq!(out.status.code(), Some(2));
}

fn ppm_pixels(path: &Path) -> (usize, usize, Vec<[u8; 3]>) {
    let bytes = std::fs::read(path).unwrap();
    let text = String::from_utf8_lossy(&bytes[..20]).into_owned();
    let mut parts = text.split_ascii_whitespace();
    assert_eq!(parts.next(), Some("P6"));
    let w: usize = parts.next().unwrap().parse().unwrap();
    let h: usize = parts.next().unwrap().parse().unwrap();
    let header = format!("P6\n{w} {h}\n255\n").len();
    let px = bytes[header..].chunks(3).map(|c| [c[0], c[1], c[2]]).collect::<Vec<_>>();
    assert_eq!(px.len(), w * h);
    (w, h, px)
}

#[test]
fn render_palettes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = evigrid::GridConfig::default();
    let occluded = evigrid::format::GridFile::from_sgm(&evigrid::Sgm::occluded(cfg, Default::default(), 0.0));
    let sgm_path = dir.path().join("blank_sgm.egrd");
    evigrid::format::write_grid(&sgm_path, &occluded).unwrap();
    let mut mask = evigrid::DynamicMask::empty(cfg);
    mask.grid.cells[100] = true;
    let mask_path = dir.path().join("one_mask.egrd");
    evigrid::format::write_grid(
        &mask_path,
        &evigrid::format::GridFile::from_binary(&mask.grid, 0.0, Default::default()),
    )
    .unwrap();
    let out = dir.path().join("img");
    ok(&["render", p(&sgm_path), p(&mask_path), "--out", p(&out)]);

    let (w, h, px) = ppm_pixels(&out.join("blank_sgm.ppm"));
    assert_eq!((w, h), (128, 128));
    let ego = cfg.ego_cell();
    let ego_px = (127 - ego.row) * 128 + ego.col;
    for (i, c) in px.iter().enumerate() {
        if i != ego_px {
            assert_eq!(*c, evigrid::render::SGM_OCCLUDED);
        }
    }
    let (_, _, px) = ppm_pixels(&out.join("one_mask.ppm"));
    assert!(px.iter().all(|c| *c == evigrid::render::MASK_ON || *c == evigrid::render::MASK_OFF));
    assert_eq!(px.iter().filter(|c| **c == evigrid::render::MASK_ON).count(), 1);

    let bad = evigrid(&["render", p(&sgm_path), "--palette", "rgm", "--out", p(&out)]);
    assert_eq!(bad.status.code(), Some(2));
    let junk = dir.path().join("junk.egrd");
    std::fs::write(&junk, b"EGRD but not really").unwrap();
    assert_eq!(evigrid(&["render", p(&junk), "--out", p(&out)]).status.code(), Some(2));
}

#[test]
fn all_static_scene_scores_perfect_dynamic_iou() {
    let dir = tempfile::tempdir().unwrap();
    let mut spec = street_spec();
    spec.agents.clear();
    spec.ego = Trajectory::stationary(0.0, 0.0, 0.0);
    let path = dir.path().join("static.json");
    std::fs::write(&path, serde_json::to_vec(&spec).unwrap()).unwrap();
    let (ds, repr) = (dir.path().join("ds"), dir.path().join("repr"));
    ok(&["gen", "--spec", p(&path), "--out", p(&ds)]);
    ok(&["repr", "--dataset", p(&ds), "--out", p(&repr)]);
    let out = ok(&["segment", "--repr", p(&repr), "--out", p(&dir.path().join("m")), "--json"]);
    let json: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(json["dynamic_iou"], 1.0);
}
