//! Input loading, report output and error classification.

use std::fmt;
use std::io::{ErrorKind, Write};
use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use ner_audit::conll::{parse_corpus, repair_conlleval, ParseOptions, ParseReport};
use ner_audit::{Corpus, EncodingScheme, MetadataTable};
use serde::Serialize;
use thiserror::Error;

pub const EXIT_FINDINGS: u8 = 1;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{0}")]
    Data(String),
    #[error("internal error: {0}")]
    Internal(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Data(_) => 1,
            CliError::Usage(_) => 2,
            CliError::Io { .. } => 3,
            CliError::Internal(_) => 4,
        }
    }

    pub fn data(path: &Path, e: impl fmt::Display) -> Self {
        CliError::Data(format!("{}: {e}", path.display()))
    }

    pub fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OutputFormat {
    Text,
    Json,
    Tsv,
}

#[derive(Debug, Clone, Args)]
pub struct OutputArgs {
    /// Report format.
    #[arg(long, value_enum, default_value_t = OutputFormat::Text)]
    pub format: OutputFormat,
    /// Write the report to this file instead of standard output.
    #[arg(long, short = 'o', value_name = "FILE")]
    pub output: Option<PathBuf>,
}

impl OutputArgs {
    /// Render with the closure matching the chosen format and write it out.
    pub fn emit<T: Serialize>(
        &self,
        value: &T,
        text: impl FnOnce() -> String,
        tsv: impl FnOnce() -> String,
    ) -> Result<(), CliError> {
        let body = match self.format {
            OutputFormat::Text => text(),
            OutputFormat::Json => to_json(value)?,
            OutputFormat::Tsv => tsv(),
        };
        write_output(self.output.as_deref(), body.as_bytes())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum RepairMode {
    /// I-X after O or another type becomes B-X.
    Conlleval,
}

#[derive(Debug, Clone, Args)]
pub struct ReadArgs {
    /// Label encoding of the inputs (IOB1 or BIO); detected when omitted.
    #[arg(long, value_parser = parse_encoding)]
    pub encoding: Option<EncodingScheme>,
    /// Rewrite invalid label transitions before use.
    #[arg(long, value_enum)]
    pub repair: Option<RepairMode>,
    /// Zero-based NER column; defaults to the last column.
    #[arg(long, value_name = "N")]
    pub ner_column: Option<usize>,
}

pub fn parse_encoding(s: &str) -> Result<EncodingScheme, String> {
    s.parse()
}

pub fn to_json<T: Serialize>(value: &T) -> Result<String, CliError> {
    let mut s = serde_json::to_string_pretty(value).map_err(|e| CliError::Internal(e.to_string()))?;
    s.push('\n');
    Ok(s)
}

pub fn write_output(path: Option<&Path>, body: &[u8]) -> Result<(), CliError> {
    match path {
        Some(p) => std::fs::write(p, body).map_err(|e| CliError::io(p, e)),
        None => {
            let mut out = std::io::stdout().lock();
            match out.write_all(body).and_then(|_| out.flush()) {
                Err(e) if e.kind() != ErrorKind::BrokenPipe => Err(CliError::io(Path::new("<stdout>"), e)),
                _ => Ok(()),
            }
        }
    }
}

pub fn read_bytes(path: &Path) -> Result<Vec<u8>, CliError> {
    std::fs::read(path).map_err(|e| CliError::io(path, e))
}

pub fn read_text(path: &Path) -> Result<String, CliError> {
    String::from_utf8(read_bytes(path)?).map_err(|e| CliError::data(path, e))
}

pub fn notice(message: impl fmt::Display) {
    eprintln!("ner-audit: {message}");
}

pub struct Loaded {
    pub corpus: Corpus,
    pub report: ParseReport,
    /// Labels rewritten by `--repair`.
    pub repaired: usize,
}

pub fn load_corpus(path: &Path, args: &ReadArgs) -> Result<Loaded, CliError> {
    let options = ParseOptions {
        ner_column: args.ner_column,
        expected_columns: None,
        encoding: args.encoding,
    };
    let (corpus, report) = parse_corpus(&read_bytes(path)?, options).map_err(|e| CliError::data(path, e))?;
    for n in &report.notices {
        notice(format_args!("{}: {n}", path.display()));
    }
    let (corpus, repaired) = match args.repair {
        Some(RepairMode::Conlleval) => {
            let (c, n) = repair_conlleval(&corpus);
            if n > 0 {
                notice(format_args!("{}: repaired {n} invalid transitions", path.display()));
            }
            (c, n)
        }
        None => (corpus, 0),
    };
    Ok(Loaded {
        corpus,
        report,
        repaired,
    })
}

pub fn load_metadata(path: Option<&Path>) -> Result<MetadataTable, CliError> {
    let Some(path) = path else {
        return Ok(MetadataTable::new());
    };
    let table = MetadataTable::parse(&read_text(path)?).map_err(|e| CliError::data(path, e))?;
    for w in &table.warnings {
        notice(format_args!("{}: {w}", path.display()));
    }
    Ok(table)
}

/// Version names: explicit `--names`, else file stems made unique.
pub fn version_names(files: &[PathBuf], names: Option<&[String]>) -> Result<Vec<String>, CliError> {
    if let Some(names) = names {
        if names.len() != files.len() {
            return Err(CliError::Usage(format!(
                "--names has {} entries for {} files",
                names.len(),
                files.len()
            )));
        }
        let mut seen = std::collections::HashSet::new();
        if let Some(dup) = names.iter().find(|n| !seen.insert(n.as_str())) {
            return Err(CliError::Usage(format!("duplicate version name {dup:?}")));
        }
        return Ok(names.to_vec());
    }
    let mut out: Vec<String> = Vec::new();
    for f in files {
        let stem = f
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "version".to_string());
        let mut name = stem.clone();
        let mut k = 2;
        while out.contains(&name) {
            name = format!("{stem}#{k}");
            k += 1;
        }
        out.push(name);
    }
    Ok(out)
}
