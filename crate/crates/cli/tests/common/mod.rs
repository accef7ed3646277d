//! Helpers shared by the CLI test targets.
#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

pub fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_ner-audit"))
}

pub struct Run {
    pub code: i32,
    pub stdout: String,
    pub stderr: String,
}

pub fn run<S: AsRef<std::ffi::OsStr>>(args: &[S]) -> Run {
    let out: Output = bin().args(args).env("NO_COLOR", "1").output().expect("binary runs");
    Run {
        code: out.status.code().unwrap_or(-1),
        stdout: String::from_utf8(out.stdout).expect("utf-8 stdout"),
        stderr: String::from_utf8(out.stderr).expect("utf-8 stderr"),
    }
}

pub fn write(dir: &Path, name: &str, body: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, body).unwrap();
    p
}

/// Documents per `(domain, format)` cell of the reference test split.
pub const CENSUS: [(&str, &str, usize); 9] = [
    ("world_events", "text_article", 63),
    ("world_events", "data_report", 0),
    ("world_events", "hybrid", 0),
    ("economy", "text_article", 45),
    ("economy", "data_report", 14),
    ("economy", "hybrid", 8),
    ("sports", "text_article", 31),
    ("sports", "data_report", 59),
    ("sports", "hybrid", 11),
];

/// A corpus with one short document per census entry and its sidecar.
pub fn census_fixture(dir: &Path) -> (PathBuf, PathBuf) {
    let mut corpus = String::new();
    let mut meta = String::from("doc_index\tdomain\tformat\n");
    let mut d = 0;
    for (domain, format, n) in CENSUS {
        for _ in 0..n {
            corpus.push_str(&format!("-DOCSTART- O\n\nReport B-MISC\n{d} O\n\n"));
            meta.push_str(&format!("{d}\t{domain}\t{format}\n"));
            d += 1;
        }
    }
    (write(dir, "census.conll", &corpus), write(dir, "census.tsv", &meta))
}
