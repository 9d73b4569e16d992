#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

pub struct Run {
    pub code: i32,
    pub stdout: String,
    pub stderr: String,
}

impl From<Output> for Run {
    fn from(o: Output) -> Self {
        Run {
            code: o.status.code().expect("terminated by signal"),
            stdout: String::from_utf8_lossy(&o.stdout).into_owned(),
            stderr: String::from_utf8_lossy(&o.stderr).into_owned(),
        }
    }
}

pub fn mmml<S: AsRef<std::ffi::OsStr>>(args: &[S]) -> Run {
    Command::new(env!("CARGO_BIN_EXE_mmml")).args(args).output().expect("spawn mmml").into()
}

/// Runs and asserts success.
pub fn ok<S: AsRef<std::ffi::OsStr>>(args: &[S]) -> Run {
    let r = mmml(args);
    assert_eq!(r.code, 0, "stderr: {}", r.stderr);
    r
}

pub fn path(dir: &Path, name: &str) -> PathBuf {
    dir.join(name)
}

pub fn s(p: &Path) -> String {
    p.to_str().unwrap().to_owned()
}

/// Parses the first `EER x (y%)` line.
pub fn parse_eer(stdout: &str) -> f64 {
    let line = stdout.lines().find(|l| l.starts_with("EER ")).expect("EER line");
    line.split_whitespace().nth(1).unwrap().parse().unwrap()
}

pub fn write_scores(path: &Path, rows: &[(&str, &str, f64)]) {
    let body: String = rows.iter().map(|(e, t, s)| format!("{e}\t{t}\t{s:?}\n")).collect();
    std::fs::write(path, body).unwrap();
}

pub fn write_trials(path: &Path, rows: &[(&str, &str, &str)]) {
    let body: String = rows.iter().map(|(e, t, l)| format!("{e}\t{t}\t{l}\n")).collect();
    std::fs::write(path, body).unwrap();
}
