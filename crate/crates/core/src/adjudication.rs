//! Adjudication sessions: a fixed disagreement queue plus an append-only
//! decision log.
//!
//! A decision is written and synced to the log before it becomes visible in
//! the session, so an acknowledged decision survives a crash. The log keeps
//! every decision; the latest one per `diff_id` is authoritative.

use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::{self, Read, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};

use indexmap::IndexMap;
use regex::Regex;
use serde::Serialize;
use thiserror::Error;

use crate::diff::{to_jsonl, Decision, Disagreement};
use crate::metadata::{Domain, Format};
use crate::model::Label;
use crate::percent::Percent;

/// Largest accepted page size.
pub const MAX_PAGE_SIZE: usize = 500;

#[derive(Debug, Error)]
pub enum SessionError {
    #[error("unknown diff_id {0}")]
    UnknownDiffId(String),
    #[error("malformed label {0:?}")]
    MalformedLabel(String),
    #[error("bad page: {0}")]
    BadPage(String),
    #[error("duplicate diff_id {0} in the disagreement set")]
    DuplicateDiffId(String),
    #[error("decision log {path}, line {line}: {message}")]
    CorruptLog {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("decision log: {0}")]
    Io(#[from] io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Progress {
    pub total: usize,
    pub decided: usize,
    pub remaining: usize,
}

#[derive(Debug, Clone, Default)]
pub struct Filter {
    pub undecided_only: bool,
    pub domain: Option<Domain>,
    pub format: Option<Format>,
    /// Matched against `name=LABEL` for each version; any match selects the item.
    pub version_pattern: Option<Regex>,
}

impl Filter {
    fn matches(&self, item: &Disagreement, decided: bool) -> bool {
        if self.undecided_only && decided {
            return false;
        }
        if let Some(d) = self.domain {
            if item.domain.unwrap_or_default() != d {
                return false;
            }
        }
        if let Some(f) = self.format {
            if item.format.unwrap_or_default() != f {
                return false;
            }
        }
        if let Some(re) = &self.version_pattern {
            if !item.labels.iter().any(|(name, label)| re.is_match(&format!("{name}={label}"))) {
                return false;
            }
        }
        true
    }
}

/// A queue item with its current decision, if any.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ReviewItem {
    #[serde(flatten)]
    pub disagreement: Disagreement,
    pub decision: Option<Decision>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Page {
    pub total: usize,
    pub page: usize,
    pub page_size: usize,
    pub items: Vec<ReviewItem>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Wins {
    pub count: u64,
    pub percent: Percent,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct AdjudicationStats {
    pub decided: u64,
    /// Per version: decided items whose chosen label equals that version's.
    pub per_version: IndexMap<String, Wins>,
    /// Decided items whose chosen label matches no version.
    pub neither: Wins,
}

impl AdjudicationStats {
    pub fn render_text(&self) -> String {
        let mut out = String::new();
        for (name, w) in &self.per_version {
            out.push_str(&format!("{name:<24}{:>8}{:>9}%\n", w.count, w.percent));
        }
        out.push_str(&format!("{:<24}{:>8}{:>9}%\n", "neither", self.neither.count, self.neither.percent));
        out.push_str(&format!("{:<24}{:>8}\n", "decided", self.decided));
        out
    }
}

/// Decision log file opened for appending.
#[derive(Debug)]
struct LogFile {
    path: PathBuf,
    file: File,
}

#[derive(Debug)]
pub struct Session {
    items: Vec<Disagreement>,
    index: HashMap<String, usize>,
    log: Vec<Decision>,
    /// diff_id -> position in `log` of its latest decision
    latest: HashMap<String, usize>,
    sink: Option<LogFile>,
}

impl Session {
    /// In-memory session without a durable log.
    pub fn new(mut items: Vec<Disagreement>) -> Result<Self, SessionError> {
        items.sort_by_key(|d| (d.doc_index, d.sentence_index, d.token_index));
        let mut index = HashMap::with_capacity(items.len());
        for (i, item) in items.iter().enumerate() {
            if index.insert(item.diff_id.clone(), i).is_some() {
                return Err(SessionError::DuplicateDiffId(item.diff_id.clone()));
            }
        }
        Ok(Session {
            items,
            index,
            log: Vec::new(),
            latest: HashMap::new(),
            sink: None,
        })
    }

    /// In-memory session replaying `decisions` in order, for offline
    /// reporting over an existing log.
    pub fn replay(items: Vec<Disagreement>, decisions: Vec<Decision>) -> Result<Self, SessionError> {
        let mut session = Session::new(items)?;
        for d in decisions {
            if !session.index.contains_key(&d.diff_id) {
                return Err(SessionError::UnknownDiffId(d.diff_id));
            }
            session.push(d);
        }
        Ok(session)
    }

    /// Session backed by the log at `path`, replaying any decisions in it.
    ///
    /// A final line without a newline that fails to parse is the remains of
    /// an interrupted write; it was never acknowledged and is truncated.
    pub fn open(items: Vec<Disagreement>, path: &Path) -> Result<Self, SessionError> {
        let mut session = Session::new(items)?;
        let mut file = OpenOptions::new().read(true).append(true).create(true).open(path)?;
        let mut text = String::new();
        file.read_to_string(&mut text)?;

        let mut good_len = 0;
        for (i, line) in text.split_inclusive('\n').enumerate() {
            let complete = line.ends_with('\n');
            if line.trim().is_empty() {
                good_len += line.len();
                continue;
            }
            let corrupt = |message: String| SessionError::CorruptLog {
                path: path.to_path_buf(),
                line: i + 1,
                message,
            };
            match serde_json::from_str::<Decision>(line) {
                Ok(d) => {
                    if !session.index.contains_key(&d.diff_id) {
                        return Err(corrupt(format!("unknown diff_id {}", d.diff_id)));
                    }
                    session.push(d);
                    good_len += line.len();
                }
                Err(_) if !complete => break,
                Err(e) => return Err(corrupt(e.to_string())),
            }
        }
        if good_len < text.len() {
            file.set_len(good_len as u64)?;
            file.sync_all()?;
        }
        file.seek(SeekFrom::End(0))?;
        if good_len > 0 && !text[..good_len].ends_with('\n') {
            file.write_all(b"\n")?;
            file.sync_data()?;
        }
        session.sink = Some(LogFile {
            path: path.to_path_buf(),
            file,
        });
        Ok(session)
    }

    pub fn log_path(&self) -> Option<&Path> {
        self.sink.as_ref().map(|s| s.path.as_path())
    }

    fn push(&mut self, d: Decision) {
        self.latest.insert(d.diff_id.clone(), self.log.len());
        self.log.push(d);
    }

    pub fn items(&self) -> &[Disagreement] {
        &self.items
    }

    /// Every decision recorded, superseded ones included.
    pub fn log(&self) -> &[Decision] {
        &self.log
    }

    pub fn progress(&self) -> Progress {
        let decided = self.latest.len();
        Progress {
            total: self.items.len(),
            decided,
            remaining: self.items.len() - decided,
        }
    }

    pub fn decision(&self, diff_id: &str) -> Option<&Decision> {
        self.latest.get(diff_id).map(|&i| &self.log[i])
    }

    pub fn get(&self, diff_id: &str) -> Option<ReviewItem> {
        let &i = self.index.get(diff_id)?;
        Some(self.review_item(i))
    }

    fn review_item(&self, i: usize) -> ReviewItem {
        let item = &self.items[i];
        ReviewItem {
            disagreement: item.clone(),
            decision: self.decision(&item.diff_id).cloned(),
        }
    }

    /// Items in (document, sentence, token) order, paged from 0.
    pub fn list_disagreements(&self, filter: &Filter, page: usize, page_size: usize) -> Result<Page, SessionError> {
        if page_size == 0 || page_size > MAX_PAGE_SIZE {
            return Err(SessionError::BadPage(format!(
                "page_size must be between 1 and {MAX_PAGE_SIZE}, got {page_size}"
            )));
        }
        let selected: Vec<usize> = (0..self.items.len())
            .filter(|&i| filter.matches(&self.items[i], self.latest.contains_key(&self.items[i].diff_id)))
            .collect();
        let total = selected.len();
        let pages = total.div_ceil(page_size);
        if page > 0 && page >= pages {
            return Err(SessionError::BadPage(format!("page {page} is past the last page ({pages} pages)")));
        }
        let items = selected
            .iter()
            .skip(page * page_size)
            .take(page_size)
            .map(|&i| self.review_item(i))
            .collect();
        Ok(Page {
            total,
            page,
            page_size,
            items,
        })
    }

    /// Record a decision stamped with the current time.
    pub fn record_decision(
        &mut self,
        diff_id: &str,
        chosen_label: &str,
        chooser: &str,
        note: Option<String>,
    ) -> Result<Progress, SessionError> {
        let now = chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Millis, true);
        self.record_decision_at(diff_id, chosen_label, chooser, note, now)
    }

    /// Record a decision; it is durable once this returns.
    pub fn record_decision_at(
        &mut self,
        diff_id: &str,
        chosen_label: &str,
        chooser: &str,
        note: Option<String>,
        timestamp: String,
    ) -> Result<Progress, SessionError> {
        if !self.index.contains_key(diff_id) {
            return Err(SessionError::UnknownDiffId(diff_id.to_string()));
        }
        let label: Label = chosen_label
            .trim()
            .parse()
            .map_err(|_| SessionError::MalformedLabel(chosen_label.to_string()))?;
        let decision = Decision {
            diff_id: diff_id.to_string(),
            chosen_label: label,
            chooser: chooser.to_string(),
            timestamp,
            note,
        };
        if let Some(sink) = &mut self.sink {
            let mut line = serde_json::to_string(&decision).expect("serializable");
            line.push('\n');
            sink.file.write_all(line.as_bytes())?;
            sink.file.sync_data()?;
        }
        self.push(decision);
        Ok(self.progress())
    }

    pub fn stats(&self) -> AdjudicationStats {
        adjudication_stats(self)
    }

    /// Latest decision per item, in queue order.
    pub fn export_decisions(&self) -> String {
        let latest: Vec<&Decision> = self
            .items
            .iter()
            .filter_map(|item| self.decision(&item.diff_id))
            .collect();
        to_jsonl(&latest)
    }
}

/// Win counts per version over decided items.
pub fn adjudication_stats(session: &Session) -> AdjudicationStats {
    let mut per_version: IndexMap<String, u64> = IndexMap::new();
    for item in &session.items {
        for name in item.labels.keys() {
            per_version.entry(name.clone()).or_default();
        }
    }
    let mut decided = 0u64;
    let mut neither = 0u64;
    for item in &session.items {
        let Some(d) = session.decision(&item.diff_id) else {
            continue;
        };
        decided += 1;
        let chosen = d.chosen_label.to_string();
        let mut any = false;
        for (name, label) in &item.labels {
            if *label == chosen {
                *per_version.get_mut(name).expect("registered above") += 1;
                any = true;
            }
        }
        if !any {
            neither += 1;
        }
    }
    let wins = |count| Wins {
        count,
        percent: Percent::new(count, decided),
    };
    AdjudicationStats {
        decided,
        per_version: per_version.into_iter().map(|(k, v)| (k, wins(v))).collect(),
        neither: wins(neither),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diff::ContextToken;

    fn item(i: usize, a: &str, b: &str) -> Disagreement {
        Disagreement {
            diff_id: format!("id{i:04}"),
            doc_index: i / 10,
            sentence_index: i % 10,
            token_index: 0,
            surface: format!("w{i}"),
            labels: [("A".to_string(), a.to_string()), ("B".to_string(), b.to_string())]
                .into_iter()
                .collect(),
            context: vec![ContextToken {
                surface: format!("w{i}"),
                labels: IndexMap::new(),
                focus: true,
            }],
            domain: None,
            format: None,
        }
    }

    fn fixture(n: usize) -> Vec<Disagreement> {
        (0..n).map(|i| item(i, "B-ORG", "B-LOC")).collect()
    }

    const TS: &str = "2024-01-01T00:00:00Z";

    #[test]
    fn empty_session() {
        let s = Session::new(vec![]).unwrap();
        let p = s.list_disagreements(&Filter::default(), 0, 50).unwrap();
        assert_eq!(p.total, 0);
        assert!(p.items.is_empty());
        assert_eq!(s.export_decisions(), "");
        let st = s.stats();
        assert_eq!(st.decided, 0);
        assert_eq!(st.neither.count, 0);
    }

    #[test]
    fn paging() {
        let s = Session::new(fixture(276)).unwrap();
        let f = Filter::default();
        let sizes: Vec<usize> = (0..3)
            .map(|p| s.list_disagreements(&f, p, 100).unwrap().items.len())
            .collect();
        assert_eq!(sizes, vec![100, 100, 76]);
        assert!(matches!(s.list_disagreements(&f, 3, 100), Err(SessionError::BadPage(_))));
        assert!(matches!(s.list_disagreements(&f, 0, 0), Err(SessionError::BadPage(_))));
        assert!(matches!(s.list_disagreements(&f, 0, 501), Err(SessionError::BadPage(_))));
        assert!(s.list_disagreements(&f, 0, 500).is_ok());
    }

    #[test]
    fn undecided_filter_after_ten() {
        let mut s = Session::new(fixture(276)).unwrap();
        for i in 0..10 {
            s.record_decision_at(&format!("id{i:04}"), "B-ORG", "me", None, TS.into()).unwrap();
        }
        let f = Filter {
            undecided_only: true,
            ..Default::default()
        };
        assert_eq!(s.list_disagreements(&f, 0, 50).unwrap().total, 266);
        assert_eq!(s.progress().remaining, 266);
    }

    #[test]
    fn redeciding_supersedes() {
        let mut s = Session::new(fixture(5)).unwrap();
        assert_eq!(s.record_decision_at("id0000", "B-ORG", "me", None, TS.into()).unwrap().remaining, 4);
        assert_eq!(s.record_decision_at("id0000", "B-LOC", "me", None, TS.into()).unwrap().remaining, 4);
        assert_eq!(s.log().len(), 2);
        assert_eq!(s.decision("id0000").unwrap().chosen_label.to_string(), "B-LOC");
    }

    #[test]
    fn replay_matches_live_session() {
        let mut live = Session::new(fixture(6)).unwrap();
        for (i, l) in ["B-ORG", "B-LOC", "B-ORG"].iter().enumerate() {
            live.record_decision_at(&format!("id{i:04}"), l, "me", None, TS.into()).unwrap();
        }
        live.record_decision_at("id0001", "B-ORG", "me", None, TS.into()).unwrap();
        let replayed = Session::replay(fixture(6), live.log().to_vec()).unwrap();
        assert_eq!(replayed.export_decisions(), live.export_decisions());
        assert_eq!(replayed.progress().decided, 3);
        assert_eq!(replayed.stats().per_version["A"].count, 3);

        let mut stray = live.log()[0].clone();
        stray.diff_id = "missing".into();
        assert!(matches!(
            Session::replay(fixture(6), vec![stray]),
            Err(SessionError::UnknownDiffId(id)) if id == "missing"
        ));
    }

    #[test]
    fn bad_decisions() {
        let mut s = Session::new(fixture(2)).unwrap();
        assert!(matches!(s.record_decision("nope", "O", "me", None), Err(SessionError::UnknownDiffId(_))));
        assert!(matches!(s.record_decision("id0000", "X-ORG", "me", None), Err(SessionError::MalformedLabel(_))));
        assert_eq!(s.log().len(), 0);
        // a custom label outside both candidates is fine
        s.record_decision("id0000", "B-MISC", "me", Some("neither".into())).unwrap();
        assert_eq!(s.stats().neither.count, 1);
    }

    #[test]
    fn stats_190_of_276() {
        let mut s = Session::new(fixture(276)).unwrap();
        for i in 0..276 {
            let label = if i < 190 { "B-ORG" } else { "B-LOC" };
            s.record_decision_at(&format!("id{i:04}"), label, "me", None, TS.into()).unwrap();
        }
        let st = s.stats();
        assert_eq!(st.per_version["A"].count, 190);
        assert_eq!(st.per_version["A"].percent.to_string(), "68.84");
        assert_eq!(st.per_version["B"].percent.to_string(), "31.16");
    }

    #[test]
    fn export_latest_wins() {
        let mut s = Session::new(fixture(3)).unwrap();
        s.record_decision_at("id0001", "B-ORG", "me", None, TS.into()).unwrap();
        s.record_decision_at("id0000", "B-ORG", "me", None, TS.into()).unwrap();
        s.record_decision_at("id0001", "B-LOC", "me", None, TS.into()).unwrap();
        let out = s.export_decisions();
        let lines: Vec<&str> = out.lines().collect();
        assert_eq!(lines.len(), 2);
        assert!(lines[0].contains("id0000"));
        assert!(lines[1].contains("B-LOC"));
    }

    #[test]
    fn filters() {
        let mut items = fixture(4);
        items[1].domain = Some(Domain::Sports);
        items[2].labels["A"] = "O".into();
        let s = Session::new(items).unwrap();
        let by_domain = Filter {
            domain: Some(Domain::Sports),
            ..Default::default()
        };
        assert_eq!(s.list_disagreements(&by_domain, 0, 10).unwrap().total, 1);
        let unknown = Filter {
            domain: Some(Domain::Unknown),
            ..Default::default()
        };
        assert_eq!(s.list_disagreements(&unknown, 0, 10).unwrap().total, 3);
        let pattern = Filter {
            version_pattern: Some(Regex::new("^A=O$").unwrap()),
            ..Default::default()
        };
        let p = s.list_disagreements(&pattern, 0, 10).unwrap();
        assert_eq!(p.total, 1);
        assert_eq!(p.items[0].disagreement.diff_id, "id0002");
    }

    #[test]
    fn log_survives_reopen_and_torn_tail() {
        let dir = std::env::temp_dir().join(format!("adj-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("log.jsonl");
        let _ = std::fs::remove_file(&path);
        {
            let mut s = Session::open(fixture(3), &path).unwrap();
            s.record_decision_at("id0000", "B-ORG", "me", None, TS.into()).unwrap();
            s.record_decision_at("id0001", "B-LOC", "me", None, TS.into()).unwrap();
        }
        // simulate a write cut short
        let mut f = OpenOptions::new().append(true).open(&path).unwrap();
        f.write_all(br#"{"diff_id":"id0002","chosen_la"#).unwrap();
        drop(f);

        let mut s = Session::open(fixture(3), &path).unwrap();
        assert_eq!(s.progress().decided, 2);
        s.record_decision_at("id0002", "O", "me", None, TS.into()).unwrap();
        drop(s);
        let s = Session::open(fixture(3), &path).unwrap();
        assert_eq!(s.progress().decided, 3);
        assert_eq!(s.log().len(), 3);
        std::fs::remove_dir_all(&dir).unwrap();
    }
}
