mod common;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use n2rpp::cli::{EVAL_SAMPLE_COLUMNS, EVAL_SUMMARY_COLUMNS};
use n2rpp::formats::{decode_model, encode_model, read_grid_csv, read_pgm, Manifest};

fn n2rpp(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_n2rpp"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = n2rpp(dir, args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

const SMALL: &[&str] = &[
    "--set",
    "synth_healthy=20",
    "--set",
    "synth_acld=20",
    "--set",
    "ae_epochs=3",
    "--set",
    "clf_epochs=2",
    "--set",
    "gan_iterations=3",
    "--set",
    "batch=8",
];

fn with(small: &[&str], rest: &[&str]) -> Vec<String> {
    small.iter().chain(rest).map(|s| s.to_string()).collect()
}

/// Runs every command at tiny scale into `root`, returning the output dirs.
fn pipeline(root: &Path) -> Vec<PathBuf> {
    let run = |rest: &[&str]| {
        let args = with(SMALL, rest);
        ok(root, &args.iter().map(String::as_str).collect::<Vec<_>>())
    };
    run(&["--quiet", "--out", "raw", "synth"]);
    run(&[
        "--quiet",
        "--out",
        "img",
        "preprocess",
        "--manifest",
        "raw/manifest.tsv",
        "--aggregation",
        "all",
    ]);
    run(&[
        "--quiet",
        "--out",
        "clf",
        "train-clf",
        "--manifest",
        "img/manifest.tsv",
        "--only-aggregation",
        "max",
    ]);
    run(&[
        "--quiet",
        "--out",
        "ae",
        "train-ae",
        "--manifest",
        "clf/split_train.tsv",
    ]);
    run(&[
        "--quiet",
        "--out",
        "gan",
        "train-gan",
        "--manifest",
        "clf/split_train.tsv",
        "--ae",
        "ae/ae.model",
    ]);
    run(&[
        "--quiet",
        "--out",
        "reb",
        "rebuild",
        "--manifest",
        "clf/split_test.tsv",
        "--label",
        "acld",
        "--ae",
        "ae/ae.model",
        "--gen",
        "gan/gen.model",
    ]);
    run(&[
        "--quiet",
        "--out",
        "ev",
        "eval",
        "--clf",
        "clf/clf.model",
        "--manifest",
        "clf/split_test.tsv",
        "--rebuilt",
        "reb/manifest.tsv",
    ]);
    run(&[
        "--quiet",
        "--out",
        "vis",
        "visualize",
        "--manifest",
        "clf/split_test.tsv",
        "--ae",
        "ae/ae.model",
        "--gen",
        "gan/gen.model",
        "--clf",
        "clf/clf.model",
        "--limit",
        "3",
    ]);
    ["raw", "img", "clf", "ae", "gan", "reb", "ev", "vis"]
        .iter()
        .map(|d| root.join(d))
        .collect()
}

fn snapshot(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<(String, Vec<u8>)> = fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let p = e.unwrap().path();
            (
                p.file_name().unwrap().to_string_lossy().into_owned(),
                fs::read(&p).unwrap(),
            )
        })
        .collect();
    files.sort();
    files
}

#[test]
fn reruns_are_byte_identical_and_formats_hold() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let dirs_a = pipeline(a.path());
    let dirs_b = pipeline(b.path());
    for (da, db) in dirs_a.iter().zip(&dirs_b) {
        let (sa, sb) = (snapshot(da), snapshot(db));
        assert_eq!(sa.len(), sb.len());
        for ((na, ba), (nb, bb)) in sa.iter().zip(&sb) {
            assert_eq!(na, nb);
            // Split manifests hold absolute paths, which differ between the two roots.
            if !na.starts_with("split_") {
                assert!(ba == bb, "{} differs between reruns", da.join(na).display());
            }
        }
    }
    let root = a.path();

    // synth: one file per sequence plus the manifest
    let raw = Manifest::load(&root.join("raw/manifest.tsv")).unwrap();
    assert_eq!(raw.records.len(), 40);
    assert_eq!(snapshot(&root.join("raw")).len(), 40 + 2);

    // preprocess all: three images per sequence, all within [0, 1]
    let img = Manifest::load(&root.join("img/manifest.tsv")).unwrap();
    assert_eq!(img.records.len(), 120);
    for r in img.records.iter().take(6) {
        let image = n2rpp::formats::read_image(&img.resolve(r), &r.case_id).unwrap();
        assert!(image.grid().iter().all(|v| (0.0..=1.0).contains(v)));
    }

    // model files: save -> load -> save is byte-identical
    for model in ["ae/ae.model", "gan/gen.model", "gan/disc.model", "clf/clf.model"] {
        let bytes = fs::read(root.join(model)).unwrap();
        let (name, params) = decode_model(&bytes, Path::new(model)).unwrap();
        assert_eq!(encode_model(name, &params), bytes, "{model}");
    }

    // eval: fixed, documented columns
    let summary = fs::read_to_string(root.join("ev/eval_summary.csv")).unwrap();
    let lines: Vec<&str> = summary.lines().collect();
    assert_eq!(lines[0], EVAL_SUMMARY_COLUMNS);
    assert_eq!(lines.len(), 2);
    assert_eq!(lines[1].split(',').count(), EVAL_SUMMARY_COLUMNS.split(',').count());
    let samples = fs::read_to_string(root.join("ev/eval_samples.csv")).unwrap();
    assert_eq!(samples.lines().next().unwrap(), EVAL_SAMPLE_COLUMNS);
    assert!(samples.lines().skip(1).all(|l| l.split(',').count() == 5));

    // visualize: valid 16-bit PGMs, 52x32 CSVs, a region line per image
    let vis = root.join("vis");
    let mut pgms = 0;
    for (name, _) in snapshot(&vis) {
        if name.ends_with(".pgm") {
            let (w, h, max, px) = read_pgm(&vis.join(&name)).unwrap();
            assert_eq!((w, h, max, px.len()), (32, 52, 65535, 1664));
            pgms += 1;
        } else if name.ends_with(".csv") && name != "regions.csv" {
            let g = read_grid_csv(&vis.join(&name)).unwrap();
            assert_eq!((g.rows, g.cols), (52, 32));
        }
    }
    assert_eq!(pgms, 3 * 5);
    let regions = fs::read_to_string(vis.join("regions.csv")).unwrap();
    assert_eq!(regions.lines().count(), 1 + 3);

    // every command records its resolved configuration
    assert!(fs::read_to_string(root.join("gan/config.resolved"))
        .unwrap()
        .contains("gan_iterations=3\n"));
}

#[test]
fn train_gan_leaves_the_autoencoder_file_untouched() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path();
    let run = |rest: &[&str]| {
        let args = with(SMALL, rest);
        ok(root, &args.iter().map(String::as_str).collect::<Vec<_>>())
    };
    run(&["--quiet", "--out", "raw", "synth"]);
    run(&[
        "--quiet",
        "--out",
        "img",
        "preprocess",
        "--manifest",
        "raw/manifest.tsv",
    ]);
    run(&["--quiet", "--out", "ae", "train-ae", "--manifest", "img/manifest.tsv"]);
    let before = fs::read(root.join("ae/ae.model")).unwrap();
    run(&[
        "--quiet",
        "--out",
        "ae",
        "train-gan",
        "--manifest",
        "img/manifest.tsv",
        "--ae",
        "ae/ae.model",
    ]);
    assert_eq!(fs::read(root.join("ae/ae.model")).unwrap(), before);
    let trace = fs::read_to_string(root.join("ae/gan_trace.csv")).unwrap();
    assert_eq!(trace.lines().next().unwrap(), "iteration,l_G,l_D,d_accuracy");
    assert_eq!(trace.lines().count(), 1 + 3);
}

#[test]
fn diff_of_an_image_against_itself_is_zero() {
    let images = common::images(1, 1, 0);
    let d = n2rpp::saliency::diff_heatmap(&images[0], &images[0]).unwrap();
    assert!(d.grid.iter().chain(&d.absolute).all(|&v| v == 0.0));
}

#[test]
fn all_zero_sequences_are_rejected_not_fatal() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path();
    fs::write(root.join("zero.pfs"), "PFS1\n2 2 1\n0 0\n0 0\n").unwrap();
    fs::write(root.join("ok.pfs"), "PFS1\n2 2 1\n0 1\n2 0\n").unwrap();
    fs::write(
        root.join("m.tsv"),
        "zero.pfs\tL\thealthy\tz1\traw\nok.pfs\tL\tacld\to1\traw\n",
    )
    .unwrap();
    let out = n2rpp(root, &["--out", "img", "preprocess", "--manifest", "m.tsv"]);
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("warning"));
    let rejects = fs::read_to_string(root.join("img/rejects.tsv")).unwrap();
    assert_eq!(rejects.lines().count(), 2);
    assert!(rejects.contains("z1"));
    assert_eq!(Manifest::load(&root.join("img/manifest.tsv")).unwrap().records.len(), 1);
}

#[test]
fn usage_errors_exit_nonzero() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path();
    for args in [&["bogus"][..], &["preprocess"], &["--seed", "x", "synth"], &[]] {
        let out = n2rpp(root, args);
        assert_eq!(out.status.code(), Some(2), "{args:?}");
        let err = String::from_utf8_lossy(&out.stderr);
        assert!(err.contains("Usage") || err.contains("--help"), "{err}");
    }
    fs::write(root.join("bad.cfg"), "alpha=0.1\nnot_a_key=3\n").unwrap();
    let out = n2rpp(root, &["--config", "bad.cfg", "synth"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("not_a_key"));
    let out = n2rpp(root, &["eval", "--clf", "missing.model", "--manifest", "none.tsv"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn seed_flag_overrides_config() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path();
    fs::write(root.join("c.cfg"), "# small\nseed=5\nsynth_healthy=1\nsynth_acld=1\n").unwrap();
    ok(
        root,
        &["--quiet", "--config", "c.cfg", "--seed", "9", "--out", "a", "synth"],
    );
    let resolved = fs::read_to_string(root.join("a/config.resolved")).unwrap();
    assert!(resolved.contains("seed=9\n") && resolved.contains("synth_healthy=1\n"));
    ok(root, &["--quiet", "--config", "c.cfg", "--out", "b", "synth"]);
    assert_ne!(
        fs::read(root.join("a/h0000.pfs")).unwrap(),
        fs::read(root.join("b/h0000.pfs")).unwrap()
    );
}

#[test]
fn gradcheck_command_succeeds() {
    let dir = tempfile::tempdir().unwrap();
    let out = ok(dir.path(), &["--out", "g", "gradcheck", "--seeds", "2"]);
    assert!(out.starts_with("gradcheck: 22 checks"));
    let csv = fs::read_to_string(dir.path().join("g/gradcheck.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 22);
}
