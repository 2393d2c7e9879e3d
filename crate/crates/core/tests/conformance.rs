//! Fixture-backed checks shared with the viewer: DBSCAN label sets and a
//! golden bundle. Set `DNASCAPE_UPDATE_FIXTURES=1` to regenerate.

mod common;

use std::fs;

use dnascape::bundle::ViewerBundle;
use dnascape::embed::Embedding;
use dnascape::eval::{dbscan, embedding_points, kinetic_traps};
use dnascape::multistrand::parse_log;
use nalgebra::DMatrix;
use rand::Rng;
use serde::{Deserialize, Serialize};

use common::{fixtures_dir, gaussian, reference_dbscan, rng, updating};

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DbscanCase {
    points: Vec<Vec<f64>>,
    eps: f64,
    min_samples: usize,
    labels: Vec<i64>,
}

fn blobs(seed: u64, dim: usize, centers: &[f64], per: usize, sd: f64, noise: usize) -> Vec<Vec<f64>> {
    let mut r = rng(seed);
    let mut pts = Vec::new();
    for &c in centers {
        for _ in 0..per {
            pts.push((0..dim).map(|d| c * (d as f64 + 1.0) + sd * gaussian(&mut r)).collect());
        }
    }
    for _ in 0..noise {
        pts.push((0..dim).map(|_| r.random_range(-10.0..10.0)).collect());
    }
    pts
}

fn generated_cases() -> Vec<(&'static str, Vec<Vec<f64>>, f64, usize)> {
    vec![
        (
            "border_tie_1d",
            [-1.0, -0.5, 0.0, 1.0, 2.0, 2.5, 3.0].iter().map(|&x| vec![x]).collect(),
            1.0,
            4,
        ),
        ("blobs_2d", blobs(1, 2, &[-4.0, 0.0, 4.0], 40, 0.5, 15), 0.6, 4),
        ("blobs_3d", blobs(2, 3, &[-3.0, 3.0], 50, 0.6, 10), 0.9, 5),
        ("uniform_2d", blobs(3, 2, &[], 0, 0.0, 200), 1.0, 4),
        ("blobs_5d", blobs(4, 5, &[-2.0, 2.0], 30, 0.4, 8), 1.1, 4),
        ("duplicates_2d", vec![vec![0.5, 0.5]; 5].into_iter().chain([vec![3.0, 3.0]]).collect(), 0.1, 5),
    ]
}

#[test]
fn dbscan_fixtures() {
    let dir = fixtures_dir().join("dbscan");
    if updating() {
        fs::create_dir_all(&dir).unwrap();
        for (name, points, eps, min_samples) in generated_cases() {
            let labels = reference_dbscan(&points, eps, min_samples);
            let case = DbscanCase { points, eps, min_samples, labels };
            let text = serde_json::to_string_pretty(&case).unwrap() + "\n";
            fs::write(dir.join(format!("{name}.json")), text).unwrap();
        }
    }
    let mut seen = 0;
    for (name, ..) in generated_cases() {
        let path = dir.join(format!("{name}.json"));
        let text = fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        let case: DbscanCase = serde_json::from_str(&text).unwrap();
        let got = dbscan(&case.points, case.eps, case.min_samples).unwrap();
        assert_eq!(got.labels, case.labels, "{name}");
        assert_eq!(reference_dbscan(&case.points, case.eps, case.min_samples), case.labels, "{name}");
        seen += 1;
    }
    assert_eq!(seen, 6);
}

const GOLDEN_LOG: &str = "GCGC\n[0] .... | 0 | 0\n[0] (..) | 2 | -1.5\n[0] (()) | 3 | -4\n";

fn golden_bundle() -> ViewerBundle {
    let data = parse_log(GOLDEN_LOG).unwrap();
    let emb = Embedding::new(DMatrix::from_row_slice(3, 2, &[0.0, 0.0, 1.0, 0.5, 2.0, -1.0]));
    let cr = dbscan(&embedding_points(&emb, &[0, 1, 2]), 1.2, 2).unwrap();
    let traps = kinetic_traps(&cr, &data.states).unwrap();
    ViewerBundle::build("toy-3state", &data, &emb, Some((&cr, &traps))).unwrap()
}

#[test]
fn golden_viewer_bundle() {
    let path = fixtures_dir().join("viewer/golden_3state.json");
    let built = golden_bundle().to_json();
    if updating() {
        fs::create_dir_all(path.parent().unwrap()).unwrap();
        fs::write(&path, &built).unwrap();
    }
    let golden = fs::read_to_string(&path).unwrap();
    assert_eq!(built, golden, "golden bundle drifted; rerun with DNASCAPE_UPDATE_FIXTURES=1 if intended");
    let back = ViewerBundle::from_json(&golden).unwrap();
    assert_eq!(back.to_json(), golden);
    let c = back.clusters.as_ref().unwrap();
    assert_eq!(c.labels, vec![0, 0, -1]);
    assert_eq!(c.traps.len(), 1);
    assert_eq!(c.traps[0].dp, "(..)");
}
