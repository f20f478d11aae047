use std::path::Path;
use std::process::{Command, Output};

use skymark_core::metrics::Confusion;
use skymark_core::pipeline::{write_results, ResultRow, RESULTS_HEADER};
use skymark_core::Raster;

fn skymark(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_skymark")).args(args).output().expect("binary runs")
}

fn s(p: &Path) -> String {
    p.to_string_lossy().into_owned()
}

#[test]
fn run_single_technique_gives_one_row_per_image() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = dir.path().join("corpus");
    assert!(skymark(&["synth", "--out", &s(&corpus), "--per-class", "2"]).status.success());
    let manifest = corpus.join("manifest.jsonl");
    assert_eq!(std::fs::read_to_string(&manifest).unwrap().lines().count(), 10);

    let out = dir.path().join("run");
    let o = skymark(&["run", "--manifest", &s(&manifest), "--out", &s(&out), "--technique", "Sobel_70", "--workers", "2"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(out.join("results_Sobel_70.csv")).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], RESULTS_HEADER);
    assert_eq!(lines.len(), 11);
    assert!(lines[1].starts_with("synth/clear_0000,Sobel_70,"));

    let o = skymark(&["run", "--manifest", &s(&manifest), "--out", &s(&out), "--all", "--split", "validation"]);
    assert!(o.status.success());
    let all = std::fs::read_to_string(out.join("results_all.csv")).unwrap();
    assert_eq!(all.lines().count(), 1 + 2 * 14);
}

#[test]
fn unknown_technique_is_a_usage_error() {
    let o = skymark(&["run", "--manifest", "m.jsonl", "--out", "x", "--technique", "Sobel_75"]);
    assert_eq!(o.status.code(), Some(1));
    let err = String::from_utf8_lossy(&o.stderr);
    for name in ["Sobel_50", "Mean_7_8_300", "K-mean_14", "sobel-floodfill"] {
        assert!(err.contains(name), "{err}");
    }
    assert_eq!(skymark(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(skymark(&["--help"]).status.code(), Some(0));
}

#[test]
fn missing_data_is_a_data_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = skymark(&["eval", "--results", &s(&dir.path().join("none.csv")), "--out", &s(dir.path())]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("none.csv"));
    let o = skymark(&["train", "--labels", &s(&dir.path().join("none.jsonl")), "--out", &s(dir.path())]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn eval_on_perfect_predictions_reports_full_agreement() {
    let dir = tempfile::tempdir().unwrap();
    let rows: Vec<ResultRow> = (0..6)
        .map(|i| ResultRow::scored(format!("fixture/{i}"), "Mean_7_6_100", &Confusion { tp: 10 * i + 5, fp: 0, tn: 80 - 10 * i, fn_: 0 }, 0))
        .collect();
    let results = dir.path().join("r.csv");
    write_results(&results, &rows).unwrap();
    let o = skymark(&["eval", "--results", &s(&results), "--out", &s(&dir.path().join("eval"))]);
    assert!(o.status.success());
    let text = String::from_utf8_lossy(&o.stdout);
    let line = text.lines().find(|l| l.starts_with("Mean_7_6_100") && l.contains("0.000")).unwrap();
    assert!(line.trim_end().ends_with("1.000"), "{line}");
    assert!(dir.path().join("eval/eval.csv").exists());
    assert_eq!(std::fs::read_to_string(dir.path().join("eval/eval.txt")).unwrap(), text);

    let o = skymark(&["report", "--results", &s(&results), &s(&results)]);
    assert!(String::from_utf8_lossy(&o.stdout).contains("12"));
}

#[test]
fn stitch_writes_the_panorama() {
    let dir = tempfile::tempdir().unwrap();
    for (i, face) in ["front", "right", "back", "left", "up", "down"].iter().enumerate() {
        Raster::filled(640, 640, [i as u8 * 40, 10, 10]).unwrap().save(&dir.path().join(format!("{face}.png"))).unwrap();
    }
    let out = dir.path().join("pano.png");
    assert!(skymark(&["stitch", "--tiles", &s(dir.path()), "--out", &s(&out)]).status.success());
    let pano = Raster::load(&out).unwrap();
    assert_eq!((pano.width(), pano.height()), (1280, 960));
    assert_eq!(pano.get(640, 480), [0, 10, 10]);
    assert_eq!(pano.get(640, 0), [160, 10, 10]);
}
