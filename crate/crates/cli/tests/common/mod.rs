#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

pub fn vecdep(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_vecdep"))
        .args(args)
        .env_remove("VECDEP_THREADS")
        .output()
        .expect("spawn vecdep")
}

pub fn ok(args: &[&str]) -> Vec<u8> {
    let out = vecdep(args);
    assert!(
        out.status.success(),
        "vecdep {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out.stdout
}

pub fn ok_text(args: &[&str]) -> String {
    String::from_utf8(ok(args)).expect("utf-8 output")
}

pub fn ok_json(args: &[&str]) -> serde_json::Value {
    serde_json::from_slice(&ok(args)).expect("valid JSON")
}

pub fn code(args: &[&str]) -> i32 {
    vecdep(args).status.code().expect("exit code")
}

pub fn path_str(p: &Path) -> &str {
    p.to_str().expect("utf-8 path")
}

/// Simulate a two-group sample into `dir`, returning the data and groups paths.
pub fn simulate(dir: &Path, name: &str, extra: &[&str]) -> (PathBuf, PathBuf) {
    let data = dir.join(format!("{name}.csv"));
    let groups = dir.join(format!("{name}.json"));
    let mut args = vec![
        "simulate",
        "-o",
        path_str(&data),
        "--groups-out",
        path_str(&groups),
    ];
    args.extend_from_slice(extra);
    ok(&args);
    (data, groups)
}

/// Parse CSV text into a header and numeric rows.
pub fn csv_rows(text: &str) -> (Vec<String>, Vec<Vec<String>>) {
    let mut rdr = csv::Reader::from_reader(text.as_bytes());
    let header = rdr.headers().unwrap().iter().map(str::to_string).collect();
    let rows = rdr
        .records()
        .map(|r| r.unwrap().iter().map(str::to_string).collect())
        .collect();
    (header, rows)
}

pub fn concat<'a>(base: &[&'a str], extra: &[&'a str]) -> Vec<&'a str> {
    base.iter().chain(extra).copied().collect()
}
