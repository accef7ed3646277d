//! Four-way classification of span mismatches.
//!
//! After removing exact matches, the remaining gold and predicted mentions of
//! each sentence are paired greedily by token overlap. A pair with identical
//! boundaries is a type error; any other overlapping pair is a boundary
//! error, whether or not the types agree. Unpaired gold mentions are missed
//! and unpaired predictions are spurious.

use std::cmp::Reverse;
use std::collections::{BTreeMap, HashSet};
use std::fmt::{self, Write as _};

use serde::Serialize;

use crate::metadata::{Domain, Format, MetadataTable};
use crate::model::{Corpus, EntityType, Mention};
use crate::scoring::{sentence_pairs, ScoreError, SentencePair};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Category {
    Missed,
    Spurious,
    BoundaryError,
    TypeError,
}

impl Category {
    pub const ALL: [Category; 4] = [
        Category::Missed,
        Category::Spurious,
        Category::BoundaryError,
        Category::TypeError,
    ];

    pub fn title(self) -> &'static str {
        match self {
            Category::Missed => "Missed",
            Category::Spurious => "Spurious",
            Category::BoundaryError => "Boundary Error",
            Category::TypeError => "Type Error",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub struct Confusion {
    pub gold_type: EntityType,
    pub pred_type: EntityType,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ErrorRecord {
    pub category: Category,
    pub doc_index: usize,
    pub sentence_index: usize,
    pub gold: Option<Mention>,
    pub pred: Option<Mention>,
    /// Present exactly for type errors.
    pub confusion: Option<Confusion>,
}

impl ErrorRecord {
    fn anchor(&self) -> (usize, usize) {
        let m = self.gold.as_ref().or(self.pred.as_ref()).expect("record has a mention");
        (m.start_token, m.end_token)
    }
}

fn classify_sentence(pair: &SentencePair) -> Vec<ErrorRecord> {
    let key = |m: &Mention| (m.start_token, m.end_token, m.entity_type.clone());
    let gold_keys: HashSet<_> = pair.gold.iter().map(key).collect();
    let pred_keys: HashSet<_> = pair.pred.iter().map(key).collect();
    let gold: Vec<&Mention> = pair.gold.iter().filter(|m| !pred_keys.contains(&key(m))).collect();
    let pred: Vec<&Mention> = pair.pred.iter().filter(|m| !gold_keys.contains(&key(m))).collect();

    let mut candidates = Vec::new();
    for (gi, g) in gold.iter().enumerate() {
        for (pi, p) in pred.iter().enumerate() {
            let overlap = g.overlap(p);
            if overlap > 0 {
                candidates.push((gi, pi, overlap));
            }
        }
    }
    // largest overlap first; ties by earlier gold start, then longer prediction
    candidates.sort_by_key(|&(gi, pi, overlap)| {
        (
            Reverse(overlap),
            gold[gi].start_token,
            Reverse(pred[pi].len()),
            pred[pi].start_token,
        )
    });

    let mut gold_used = vec![false; gold.len()];
    let mut pred_used = vec![false; pred.len()];
    let mut out = Vec::new();
    let record = |category, g: Option<&Mention>, p: Option<&Mention>| {
        let confusion = match (category, g, p) {
            (Category::TypeError, Some(g), Some(p)) => Some(Confusion {
                gold_type: g.entity_type.clone(),
                pred_type: p.entity_type.clone(),
            }),
            _ => None,
        };
        ErrorRecord {
            category,
            doc_index: pair.doc_index,
            sentence_index: pair.sentence_index,
            gold: g.cloned(),
            pred: p.cloned(),
            confusion,
        }
    };
    for (gi, pi, _) in candidates {
        if gold_used[gi] || pred_used[pi] {
            continue;
        }
        gold_used[gi] = true;
        pred_used[pi] = true;
        let (g, p) = (gold[gi], pred[pi]);
        let category = if g.same_span(p) {
            Category::TypeError
        } else {
            Category::BoundaryError
        };
        out.push(record(category, Some(g), Some(p)));
    }
    for (g, used) in gold.iter().zip(&gold_used) {
        if !used {
            out.push(record(Category::Missed, Some(g), None));
        }
    }
    for (p, used) in pred.iter().zip(&pred_used) {
        if !used {
            out.push(record(Category::Spurious, None, Some(p)));
        }
    }
    out.sort_by_key(|r| (r.anchor(), r.category));
    out
}

/// Every non-exact gold/prediction mismatch, in corpus order.
pub fn classify_errors(gold: &Corpus, pred: &Corpus) -> Result<Vec<ErrorRecord>, ScoreError> {
    Ok(sentence_pairs(gold, pred)?
        .iter()
        .flat_map(classify_sentence)
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum GroupBy {
    Domain,
    Format,
    Category,
}

/// Counts per category (rows) and group (columns).
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ErrorTable {
    pub group_by: GroupBy,
    pub columns: Vec<String>,
    pub rows: BTreeMap<Category, Vec<u64>>,
}

impl ErrorTable {
    pub fn get(&self, category: Category, column: &str) -> Option<u64> {
        let c = self.columns.iter().position(|x| x == column)?;
        Some(self.rows[&category][c])
    }

    pub fn total(&self) -> u64 {
        self.rows.values().flatten().sum()
    }

    pub fn render_text(&self) -> String {
        let mut out = format!("{:<16}", "");
        for c in &self.columns {
            let _ = write!(out, " {c:>13}");
        }
        out.push('\n');
        for cat in Category::ALL {
            let _ = write!(out, "{:<16}", cat.title());
            for v in &self.rows[&cat] {
                let _ = write!(out, " {v:>13}");
            }
            out.push('\n');
        }
        out
    }

    pub fn render_tsv(&self) -> String {
        let mut out = String::from("category");
        for c in &self.columns {
            let _ = write!(out, "\t{c}");
        }
        out.push('\n');
        for cat in Category::ALL {
            out.push_str(cat.title());
            for v in &self.rows[&cat] {
                let _ = write!(out, "\t{v}");
            }
            out.push('\n');
        }
        out
    }
}

/// Tabulate records by category and by document domain or format.
pub fn error_summary(records: &[ErrorRecord], metadata: &MetadataTable, group_by: GroupBy) -> ErrorTable {
    let group_of = |r: &ErrorRecord| -> String {
        let m = metadata.get(r.doc_index);
        match group_by {
            GroupBy::Domain => m.domain.title().to_string(),
            GroupBy::Format => m.format.title().to_string(),
            GroupBy::Category => "All".to_string(),
        }
    };
    let mut columns: Vec<String> = match group_by {
        GroupBy::Domain => [Domain::Sports, Domain::Economy, Domain::WorldEvents]
            .iter()
            .map(|d| d.title().to_string())
            .collect(),
        GroupBy::Format => [Format::TextArticle, Format::DataReport, Format::Hybrid]
            .iter()
            .map(|f| f.title().to_string())
            .collect(),
        GroupBy::Category => vec!["All".to_string()],
    };
    for r in records {
        let g = group_of(r);
        if !columns.contains(&g) {
            columns.push(g);
        }
    }
    let mut rows: BTreeMap<Category, Vec<u64>> =
        Category::ALL.iter().map(|c| (*c, vec![0; columns.len()])).collect();
    for r in records {
        let g = group_of(r);
        let c = columns.iter().position(|x| *x == g).expect("column registered");
        rows.get_mut(&r.category).expect("row exists")[c] += 1;
    }
    ErrorTable {
        group_by,
        columns,
        rows,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum Polarity {
    FP,
    FN,
}

impl fmt::Display for Polarity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Polarity::FP => "FP",
            Polarity::FN => "FN",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ErrorCountRow {
    pub count: u64,
    pub polarity: Polarity,
    #[serde(rename = "type")]
    pub entity_type: EntityType,
    pub surface: String,
}

/// Restricts an operation to documents of one domain and/or format.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct DocFilter {
    pub domain: Option<Domain>,
    pub format: Option<Format>,
}

impl DocFilter {
    pub fn matches(&self, metadata: &MetadataTable, doc_index: usize) -> bool {
        let m = metadata.get(doc_index);
        self.domain.is_none_or(|d| d == m.domain) && self.format.is_none_or(|f| f == m.format)
    }
}

/// Aggregate non-exact mentions into `(polarity, type, surface)` counts,
/// most frequent first.
pub fn count_mention_errors(
    gold: &Corpus,
    pred: &Corpus,
    metadata: &MetadataTable,
    filter: DocFilter,
) -> Result<Vec<ErrorCountRow>, ScoreError> {
    let mut counts: BTreeMap<(Polarity, EntityType, String), u64> = BTreeMap::new();
    for pair in sentence_pairs(gold, pred)? {
        if !filter.matches(metadata, pair.doc_index) {
            continue;
        }
        let key = |m: &Mention| (m.start_token, m.end_token, m.entity_type.clone());
        let gold_keys: HashSet<_> = pair.gold.iter().map(key).collect();
        let pred_keys: HashSet<_> = pair.pred.iter().map(key).collect();
        for m in pair.gold.iter().filter(|m| !pred_keys.contains(&key(m))) {
            *counts
                .entry((Polarity::FN, m.entity_type.clone(), m.surface.clone()))
                .or_default() += 1;
        }
        for m in pair.pred.iter().filter(|m| !gold_keys.contains(&key(m))) {
            *counts
                .entry((Polarity::FP, m.entity_type.clone(), m.surface.clone()))
                .or_default() += 1;
        }
    }
    let mut rows: Vec<ErrorCountRow> = counts
        .into_iter()
        .map(|((polarity, entity_type, surface), count)| ErrorCountRow {
            count,
            polarity,
            entity_type,
            surface,
        })
        .collect();
    rows.sort_by(|a, b| {
        b.count
            .cmp(&a.count)
            .then(a.polarity.cmp(&b.polarity))
            .then_with(|| a.surface.cmp(&b.surface))
            .then_with(|| a.entity_type.cmp(&b.entity_type))
    });
    Ok(rows)
}

/// `count  polarity  type  surface`, tab separated, with a header.
pub fn error_counts_tsv(rows: &[ErrorCountRow]) -> String {
    let mut out = String::from("count\tpolarity\ttype\tsurface\n");
    for r in rows {
        let _ = writeln!(out, "{}\t{}\t{}\t{}", r.count, r.polarity, r.entity_type, r.surface);
    }
    out
}

/// Error records as TSV, one per line.
pub fn records_tsv(records: &[ErrorRecord]) -> String {
    let mut out = String::from("category\tdoc_index\tsentence_index\tgold\tpred\n");
    let fmt_m = |m: &Option<Mention>| match m {
        Some(m) => format!("[{},{}) {} {}", m.start_token, m.end_token, m.entity_type, m.surface),
        None => "-".to_string(),
    };
    for r in records {
        let _ = writeln!(
            out,
            "{}\t{}\t{}\t{}\t{}",
            r.category.title(),
            r.doc_index,
            r.sentence_index,
            fmt_m(&r.gold),
            fmt_m(&r.pred)
        );
    }
    out
}
