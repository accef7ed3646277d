//! Per-document domain and format annotation, read from a TSV sidecar.
//!
//! ```text
//! doc_index	domain	format
//! 0	sports	data_report
//! 1	economy	text_article
//! ```
//!
//! Documents without a row are `Unknown` on both axes.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::Corpus;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Domain {
    Sports,
    WorldEvents,
    Economy,
    #[default]
    Unknown,
}

impl Domain {
    pub const ALL: [Domain; 4] = [
        Domain::Sports,
        Domain::WorldEvents,
        Domain::Economy,
        Domain::Unknown,
    ];

    pub fn key(self) -> &'static str {
        match self {
            Domain::Sports => "sports",
            Domain::WorldEvents => "world_events",
            Domain::Economy => "economy",
            Domain::Unknown => "unknown",
        }
    }

    pub fn title(self) -> &'static str {
        match self {
            Domain::Sports => "Sports",
            Domain::WorldEvents => "World Events",
            Domain::Economy => "Economy",
            Domain::Unknown => "Unknown",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    TextArticle,
    DataReport,
    Hybrid,
    #[default]
    Unknown,
}

impl Format {
    pub const ALL: [Format; 4] = [
        Format::TextArticle,
        Format::DataReport,
        Format::Hybrid,
        Format::Unknown,
    ];

    pub fn key(self) -> &'static str {
        match self {
            Format::TextArticle => "text_article",
            Format::DataReport => "data_report",
            Format::Hybrid => "hybrid",
            Format::Unknown => "unknown",
        }
    }

    pub fn title(self) -> &'static str {
        match self {
            Format::TextArticle => "Text Article",
            Format::DataReport => "Data Report",
            Format::Hybrid => "Hybrid",
            Format::Unknown => "Unknown",
        }
    }
}

impl fmt::Display for Domain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.key())
    }
}

impl fmt::Display for Format {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.key())
    }
}

impl FromStr for Domain {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Domain::ALL
            .into_iter()
            .find(|d| d.key() == s)
            .or_else(|| s.is_empty().then_some(Domain::Unknown))
            .ok_or_else(|| format!("unknown domain {s:?}"))
    }
}

impl FromStr for Format {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Format::ALL
            .into_iter()
            .find(|d| d.key() == s)
            .or_else(|| s.is_empty().then_some(Format::Unknown))
            .ok_or_else(|| format!("unknown format {s:?}"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct DocMetadata {
    pub domain: Domain,
    pub format: Format,
}

impl DocMetadata {
    pub fn new(domain: Domain, format: Format) -> Self {
        DocMetadata { domain, format }
    }

    /// World-events documents are all text articles in the reference
    /// annotation; any other known combination is suspicious.
    pub fn is_unusual(&self) -> bool {
        self.domain == Domain::WorldEvents
            && matches!(self.format, Format::DataReport | Format::Hybrid)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MetadataError {
    #[error("metadata header must be `doc_index<TAB>domain<TAB>format`, found {0:?}")]
    BadHeader(String),
    #[error("metadata line {line}: {message}")]
    BadRow { line: usize, message: String },
    #[error("metadata line {line}: duplicate doc_index {doc_index}")]
    Duplicate { line: usize, doc_index: usize },
}

/// Sidecar contents keyed by document ordinal.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct MetadataTable {
    rows: BTreeMap<usize, DocMetadata>,
    pub warnings: Vec<String>,
}

impl MetadataTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, doc_index: usize, meta: DocMetadata) {
        self.rows.insert(doc_index, meta);
    }

    pub fn get(&self, doc_index: usize) -> DocMetadata {
        self.rows.get(&doc_index).copied().unwrap_or_default()
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, DocMetadata)> + '_ {
        self.rows.iter().map(|(k, v)| (*k, *v))
    }

    pub fn parse(text: &str) -> Result<Self, MetadataError> {
        let mut lines = text.lines().enumerate();
        let header = loop {
            match lines.next() {
                Some((_, l)) if l.trim().is_empty() => continue,
                Some((_, l)) => break l.trim_end_matches('\r'),
                None => return Ok(MetadataTable::default()),
            }
        };
        let cols: Vec<&str> = header.split('\t').map(str::trim).collect();
        if cols != ["doc_index", "domain", "format"] {
            return Err(MetadataError::BadHeader(header.to_string()));
        }

        let mut table = MetadataTable::default();
        for (i, raw) in lines {
            let line = i + 1;
            let raw = raw.trim_end_matches('\r');
            if raw.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = raw.split('\t').map(str::trim).collect();
            if fields.len() != 3 {
                return Err(MetadataError::BadRow {
                    line,
                    message: format!("expected 3 fields, found {}", fields.len()),
                });
            }
            let bad = |message: String| MetadataError::BadRow { line, message };
            let doc_index: usize = fields[0]
                .parse()
                .map_err(|_| bad(format!("bad doc_index {:?}", fields[0])))?;
            let meta = DocMetadata {
                domain: fields[1].parse().map_err(bad)?,
                format: fields[2].parse().map_err(bad)?,
            };
            if meta.is_unusual() {
                table.warnings.push(format!(
                    "line {line}: document {doc_index} is {} but formatted as {}",
                    meta.domain, meta.format
                ));
            }
            if table.rows.insert(doc_index, meta).is_some() {
                return Err(MetadataError::Duplicate { line, doc_index });
            }
        }
        Ok(table)
    }

    pub fn to_tsv(&self) -> String {
        let mut out = String::from("doc_index\tdomain\tformat\n");
        for (i, m) in &self.rows {
            out.push_str(&format!("{i}\t{}\t{}\n", m.domain, m.format));
        }
        out
    }

    /// Copy of `corpus` with every document's metadata set from this table.
    pub fn attach(&self, corpus: &Corpus) -> Corpus {
        let mut out = corpus.clone();
        for doc in &mut out.documents {
            doc.metadata = self.get(doc.doc_index);
        }
        out
    }

    /// Table built from the metadata already attached to `corpus`.
    pub fn from_corpus(corpus: &Corpus) -> Self {
        let mut table = MetadataTable::default();
        for doc in &corpus.documents {
            if doc.metadata != DocMetadata::default() {
                table.insert(doc.doc_index, doc.metadata);
            }
        }
        table
    }
}

/// Document counts per `(domain, format)` cell with marginals.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Census {
    pub cells: BTreeMap<(Domain, Format), u64>,
}

impl Census {
    pub fn of(corpus: &Corpus, metadata: &MetadataTable) -> Self {
        let mut cells = BTreeMap::new();
        for doc in &corpus.documents {
            let m = metadata.get(doc.doc_index);
            *cells.entry((m.domain, m.format)).or_default() += 1;
        }
        Census { cells }
    }

    pub fn get(&self, domain: Domain, format: Format) -> u64 {
        self.cells.get(&(domain, format)).copied().unwrap_or(0)
    }

    pub fn by_domain(&self, domain: Domain) -> u64 {
        Format::ALL.iter().map(|f| self.get(domain, *f)).sum()
    }

    pub fn by_format(&self, format: Format) -> u64 {
        Domain::ALL.iter().map(|d| self.get(*d, format)).sum()
    }

    pub fn total(&self) -> u64 {
        self.cells.values().sum()
    }

    fn domains(&self) -> Vec<Domain> {
        let mut out = vec![Domain::WorldEvents, Domain::Economy, Domain::Sports];
        if self.by_domain(Domain::Unknown) > 0 {
            out.push(Domain::Unknown);
        }
        out
    }

    fn formats(&self) -> Vec<Format> {
        let mut out = vec![Format::TextArticle, Format::DataReport, Format::Hybrid];
        if self.by_format(Format::Unknown) > 0 {
            out.push(Format::Unknown);
        }
        out
    }

    /// Formats down, domains across, totals last.
    pub fn render_text(&self) -> String {
        let domains = self.domains();
        let mut out = format!("{:<14}", "");
        for d in &domains {
            out.push_str(&format!(" {:>13}", d.title()));
        }
        out.push_str(&format!(" {:>13}\n", "Total"));
        for f in self.formats() {
            out.push_str(&format!("{:<14}", f.title()));
            for d in &domains {
                out.push_str(&format!(" {:>13}", self.get(*d, f)));
            }
            out.push_str(&format!(" {:>13}\n", self.by_format(f)));
        }
        out.push_str(&format!("{:<14}", "Total"));
        for d in &domains {
            out.push_str(&format!(" {:>13}", self.by_domain(*d)));
        }
        out.push_str(&format!(" {:>13}\n", self.total()));
        out
    }

    pub fn render_tsv(&self) -> String {
        let domains = self.domains();
        let mut out = String::from("format");
        for d in &domains {
            out.push('\t');
            out.push_str(d.key());
        }
        out.push_str("\ttotal\n");
        for f in self.formats() {
            out.push_str(f.key());
            for d in &domains {
                out.push_str(&format!("\t{}", self.get(*d, f)));
            }
            out.push_str(&format!("\t{}\n", self.by_format(f)));
        }
        out.push_str("total");
        for d in &domains {
            out.push_str(&format!("\t{}", self.by_domain(*d)));
        }
        out.push_str(&format!("\t{}\n", self.total()));
        out
    }
}

impl Serialize for Census {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        #[derive(Serialize)]
        struct Cell {
            domain: Domain,
            format: Format,
            documents: u64,
        }
        #[derive(Serialize)]
        struct View {
            cells: Vec<Cell>,
            by_domain: BTreeMap<Domain, u64>,
            by_format: BTreeMap<Format, u64>,
            total: u64,
        }
        View {
            cells: self
                .cells
                .iter()
                .map(|(&(domain, format), &documents)| Cell {
                    domain,
                    format,
                    documents,
                })
                .collect(),
            by_domain: Domain::ALL.iter().map(|d| (*d, self.by_domain(*d))).collect(),
            by_format: Format::ALL.iter().map(|f| (*f, self.by_format(*f))).collect(),
            total: self.total(),
        }
        .serialize(serializer)
    }
}
