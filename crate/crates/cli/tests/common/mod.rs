#![allow(dead_code)]

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

pub const BIN: &str = env!("CARGO_BIN_EXE_nmc-profiler");

/// The four behavioral classes used end to end, as `gen` arguments.
pub const APPS: [(&str, &[&str]); 4] = [
    ("stream", &["stream", "--n", "10000", "--stride", "8"]),
    ("random", &["random", "--n", "10000", "--space", "16777216"]),
    ("dploop", &["dploop", "--instances", "64", "--body", "5"]),
    ("chain", &["chain", "--n", "1000"]),
];

pub fn run(args: &[&str]) -> Output {
    Command::new(BIN).args(args).output().expect("spawn nmc-profiler")
}

pub fn run_ok(args: &[&str]) -> Output {
    let out = run(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

pub fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Runs gen → analyze → pca into `dir`; returns the report directory.
pub fn pipeline(dir: &Path) -> PathBuf {
    let reports = dir.join("reports");
    fs::create_dir_all(&reports).unwrap();
    for (name, gen_args) in APPS {
        let trace = dir.join(format!("{name}.trace"));
        let mut args = vec!["gen"];
        args.extend_from_slice(gen_args);
        args.extend(["--out", s(&trace)]);
        run_ok(&args);
        let report = reports.join(format!("{name}.json"));
        run_ok(&["analyze", s(&trace), "--out", s(&report)]);
    }
    run_ok(&["pca", s(&reports)]);
    reports
}

/// Output files of a pipeline run, sorted by name.
pub fn outputs(reports: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<(String, Vec<u8>)> = fs::read_dir(reports)
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

pub fn golden_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden")
}

/// Compares against the committed golden files, rewriting them instead when
/// `NMC_UPDATE_GOLDEN` is set. Returns the names of mismatching files.
pub fn check_golden(files: &[(String, Vec<u8>)]) -> Vec<String> {
    let dir = golden_dir();
    if std::env::var_os("NMC_UPDATE_GOLDEN").is_some() {
        fs::create_dir_all(&dir).unwrap();
        for (name, bytes) in files {
            fs::write(dir.join(name), bytes).unwrap();
        }
        return vec![];
    }
    let mut bad = vec![];
    for (name, bytes) in files {
        if fs::read(dir.join(name)).ok().as_ref() != Some(bytes) {
            bad.push(name.clone());
        }
    }
    let committed = fs::read_dir(&dir).map(|d| d.count()).unwrap_or(0);
    if committed != files.len() {
        bad.push(format!("{committed} golden files vs {} produced", files.len()));
    }
    bad
}
