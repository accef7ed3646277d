//! Exact-match span precision, recall and F1.
//!
//! A predicted mention is a true positive iff a gold mention has the same
//! document, sentence, token boundaries and type. Scores are micro-averaged
//! over integer counts and rounded only for display.

use std::collections::{BTreeMap, HashSet};
use std::fmt::Write as _;

use serde::ser::SerializeMap;
use serde::{Serialize, Serializer};
use thiserror::Error;

use crate::encoding::InvalidSequence;
use crate::metadata::{Domain, Format, MetadataTable};
use crate::model::{extract_mentions, Corpus, EntityType, Mention};
use crate::percent::Percent;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Gold,
    Pred,
    Train,
}

impl std::fmt::Display for Side {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Side::Gold => "gold",
            Side::Pred => "prediction",
            Side::Train => "training",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error(
    "tokenization mismatch at document {doc_index}, sentence {sentence_index}, token {token_index}: gold {gold:?}, prediction {pred:?}"
)]
pub struct TokenizationMismatch {
    pub doc_index: usize,
    pub sentence_index: usize,
    pub token_index: usize,
    pub gold: Option<String>,
    pub pred: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ScoreError {
    #[error(transparent)]
    TokenizationMismatch(#[from] TokenizationMismatch),
    #[error("{side} corpus, document {doc_index}, sentence {sentence_index}: {source}")]
    EncodingInvalid {
        side: Side,
        doc_index: usize,
        sentence_index: usize,
        #[source]
        source: InvalidSequence,
    },
}

/// True positive, false positive and false negative counts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Counts {
    pub tp: u64,
    pub fp: u64,
    pub fn_: u64,
}

impl Counts {
    pub fn precision(&self) -> Percent {
        Percent::new(self.tp, self.tp + self.fp)
    }

    pub fn recall(&self) -> Percent {
        Percent::new(self.tp, self.tp + self.fn_)
    }

    /// Harmonic mean of precision and recall, `2TP / (2TP + FP + FN)`.
    pub fn f1(&self) -> Percent {
        Percent::new(2 * self.tp, 2 * self.tp + self.fp + self.fn_)
    }

    pub fn gold(&self) -> u64 {
        self.tp + self.fn_
    }

    pub fn predicted(&self) -> u64 {
        self.tp + self.fp
    }

    pub fn add(&mut self, other: &Counts) {
        self.tp += other.tp;
        self.fp += other.fp;
        self.fn_ += other.fn_;
    }
}

impl Serialize for Counts {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let mut map = serializer.serialize_map(Some(8))?;
        map.serialize_entry("tp", &self.tp)?;
        map.serialize_entry("fp", &self.fp)?;
        map.serialize_entry("fn", &self.fn_)?;
        map.serialize_entry("precision", &self.precision())?;
        map.serialize_entry("recall", &self.recall())?;
        map.serialize_entry("f1", &self.f1())?;
        map.serialize_entry("precision_undefined", &self.precision().undefined())?;
        map.serialize_entry("recall_undefined", &self.recall().undefined())?;
        map.end()
    }
}

/// A `(domain, format)` key; `None` on an axis means all values.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct Stratum {
    pub domain: Option<Domain>,
    pub format: Option<Format>,
}

impl Serialize for Stratum {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let mut map = serializer.serialize_map(Some(2))?;
        map.serialize_entry("domain", self.domain.map_or("all", Domain::key))?;
        map.serialize_entry("format", self.format.map_or("all", Format::key))?;
        map.end()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize)]
pub struct ScoreReport {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stratum: Option<Stratum>,
    #[serde(flatten)]
    pub counts: Counts,
    pub per_type: BTreeMap<EntityType, Counts>,
}

impl ScoreReport {
    fn add_sentence(&mut self, gold: &[Mention], pred: &[Mention]) {
        let key = |m: &Mention| (m.start_token, m.end_token, m.entity_type.clone());
        let gold_keys: HashSet<_> = gold.iter().map(key).collect();
        let pred_keys: HashSet<_> = pred.iter().map(key).collect();
        for m in gold {
            let c = self.per_type.entry(m.entity_type.clone()).or_default();
            if pred_keys.contains(&key(m)) {
                c.tp += 1;
                self.counts.tp += 1;
            } else {
                c.fn_ += 1;
                self.counts.fn_ += 1;
            }
        }
        for m in pred {
            if !gold_keys.contains(&key(m)) {
                self.per_type.entry(m.entity_type.clone()).or_default().fp += 1;
                self.counts.fp += 1;
            }
        }
    }

    fn merge(&mut self, other: &ScoreReport) {
        self.counts.add(&other.counts);
        for (ty, c) in &other.per_type {
            self.per_type.entry(ty.clone()).or_default().add(c);
        }
    }

    /// Aligned plain-text table: one row per type plus the overall row.
    pub fn render_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{:<10} {:>7} {:>7} {:>7} {:>9} {:>9} {:>9}",
            "type", "tp", "fp", "fn", "precision", "recall", "f1"
        );
        let row = |out: &mut String, name: &str, c: &Counts| {
            let _ = writeln!(
                out,
                "{:<10} {:>7} {:>7} {:>7} {:>9} {:>9} {:>9}",
                name,
                c.tp,
                c.fp,
                c.fn_,
                c.precision(),
                c.recall(),
                c.f1()
            );
        };
        for (ty, c) in &self.per_type {
            row(&mut out, ty.as_str(), c);
        }
        row(&mut out, "overall", &self.counts);
        out
    }
}

/// Gold and predicted mentions of one sentence.
#[derive(Debug, Clone)]
pub struct SentencePair {
    pub doc_index: usize,
    pub sentence_index: usize,
    pub gold: Vec<Mention>,
    pub pred: Vec<Mention>,
}

/// First position where the two corpora differ in tokenization, if any.
pub fn tokenization_mismatch(gold: &Corpus, pred: &Corpus) -> Option<TokenizationMismatch> {
    let n_docs = gold.documents.len().max(pred.documents.len());
    for d in 0..n_docs {
        let (gd, pd) = (gold.documents.get(d), pred.documents.get(d));
        let n_sent = gd.map_or(0, |x| x.sentences.len()).max(pd.map_or(0, |x| x.sentences.len()));
        if gd.is_none() || pd.is_none() {
            return Some(TokenizationMismatch {
                doc_index: d,
                sentence_index: 0,
                token_index: 0,
                gold: gd.and_then(|x| x.tokens().next()).map(|t| t.surface.clone()),
                pred: pd.and_then(|x| x.tokens().next()).map(|t| t.surface.clone()),
            });
        }
        let (gd, pd) = (gd.unwrap(), pd.unwrap());
        for s in 0..n_sent {
            let gs = gd.sentences.get(s).map_or(&[][..], |x| &x.tokens[..]);
            let ps = pd.sentences.get(s).map_or(&[][..], |x| &x.tokens[..]);
            for t in 0..gs.len().max(ps.len()) {
                let g = gs.get(t).map(|x| &x.surface);
                let p = ps.get(t).map(|x| &x.surface);
                if g != p {
                    return Some(TokenizationMismatch {
                        doc_index: d,
                        sentence_index: s,
                        token_index: t,
                        gold: g.cloned(),
                        pred: p.cloned(),
                    });
                }
            }
        }
    }
    None
}

/// Mentions of both corpora, sentence by sentence, after checking that they
/// share one tokenization.
pub fn sentence_pairs(gold: &Corpus, pred: &Corpus) -> Result<Vec<SentencePair>, ScoreError> {
    if let Some(m) = tokenization_mismatch(gold, pred) {
        return Err(m.into());
    }
    let mut out = Vec::new();
    for (gd, pd) in gold.documents.iter().zip(&pred.documents) {
        for (si, (gs, ps)) in gd.sentences.iter().zip(&pd.sentences).enumerate() {
            let invalid = |side, source| ScoreError::EncodingInvalid {
                side,
                doc_index: gd.doc_index,
                sentence_index: si,
                source,
            };
            let g = extract_mentions(gs, gold.encoding, gd.doc_index, si)
                .map_err(|e| invalid(Side::Gold, e))?;
            let p = extract_mentions(ps, pred.encoding, gd.doc_index, si)
                .map_err(|e| invalid(Side::Pred, e))?;
            out.push(SentencePair {
                doc_index: gd.doc_index,
                sentence_index: si,
                gold: g,
                pred: p,
            });
        }
    }
    Ok(out)
}

/// Micro-averaged exact-match scores of `pred` against `gold`.
pub fn score(gold: &Corpus, pred: &Corpus) -> Result<ScoreReport, ScoreError> {
    let mut report = ScoreReport::default();
    for pair in sentence_pairs(gold, pred)? {
        report.add_sentence(&pair.gold, &pair.pred);
    }
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct StratifiedReport {
    /// Fine cells first, then domain marginals, format marginals and the
    /// global report.
    pub reports: Vec<ScoreReport>,
}

impl StratifiedReport {
    pub fn get(&self, domain: Option<Domain>, format: Option<Format>) -> Option<&ScoreReport> {
        let key = Stratum { domain, format };
        self.reports.iter().find(|r| r.stratum == Some(key))
    }

    pub fn global(&self) -> &ScoreReport {
        self.get(None, None).expect("global report is always present")
    }

    /// Fine `(domain, format)` cells only.
    pub fn cells(&self) -> impl Iterator<Item = &ScoreReport> {
        self.reports.iter().filter(|r| {
            r.stratum
                .is_some_and(|s| s.domain.is_some() && s.format.is_some())
        })
    }

    /// F1 grid: formats down, domains across, `-` for empty cells.
    pub fn render_f1_table(&self) -> String {
        let has_unknown_domain = self.cells().any(|r| r.stratum.unwrap().domain == Some(Domain::Unknown));
        let has_unknown_format = self.cells().any(|r| r.stratum.unwrap().format == Some(Format::Unknown));
        let mut domains: Vec<Option<Domain>> = vec![
            Some(Domain::Sports),
            Some(Domain::WorldEvents),
            Some(Domain::Economy),
        ];
        if has_unknown_domain {
            domains.push(Some(Domain::Unknown));
        }
        domains.push(None);
        let mut formats: Vec<Option<Format>> = vec![
            Some(Format::TextArticle),
            Some(Format::DataReport),
            Some(Format::Hybrid),
        ];
        if has_unknown_format {
            formats.push(Some(Format::Unknown));
        }
        formats.push(None);

        let mut out = format!("{:<14}", "");
        for d in &domains {
            let _ = write!(out, " {:>13}", d.map_or("All Domains", Domain::title));
        }
        out.push('\n');
        for f in &formats {
            let _ = write!(out, "{:<14}", f.map_or("All Formats", Format::title));
            for d in &domains {
                let cell = self
                    .get(*d, *f)
                    .map_or_else(|| "-".to_string(), |r| r.counts.f1().to_string());
                let _ = write!(out, " {cell:>13}");
            }
            out.push('\n');
        }
        out
    }
}

/// Scores per `(domain, format)` cell, per-axis marginals, and overall.
/// Documents without metadata fall into the `unknown` values.
pub fn score_stratified(
    gold: &Corpus,
    pred: &Corpus,
    metadata: &MetadataTable,
) -> Result<StratifiedReport, ScoreError> {
    let mut fine: BTreeMap<(Domain, Format), ScoreReport> = BTreeMap::new();
    // documents with no sentences still define a stratum
    for doc in &gold.documents {
        let m = metadata.get(doc.doc_index);
        fine.entry((m.domain, m.format)).or_default();
    }
    for pair in sentence_pairs(gold, pred)? {
        let m = metadata.get(pair.doc_index);
        fine.entry((m.domain, m.format))
            .or_default()
            .add_sentence(&pair.gold, &pair.pred);
    }

    let mut by_domain: BTreeMap<Domain, ScoreReport> = BTreeMap::new();
    let mut by_format: BTreeMap<Format, ScoreReport> = BTreeMap::new();
    let mut global = ScoreReport::default();
    for ((d, f), r) in &fine {
        by_domain.entry(*d).or_default().merge(r);
        by_format.entry(*f).or_default().merge(r);
        global.merge(r);
    }

    let mut reports = Vec::new();
    let with = |mut r: ScoreReport, domain, format| {
        r.stratum = Some(Stratum { domain, format });
        r
    };
    for ((d, f), r) in fine {
        reports.push(with(r, Some(d), Some(f)));
    }
    for (d, r) in by_domain {
        reports.push(with(r, Some(d), None));
    }
    for (f, r) in by_format {
        reports.push(with(r, None, Some(f)));
    }
    reports.push(with(global, None, None));
    Ok(StratifiedReport { reports })
}

/// How a test mention is matched against training mentions.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SeenOptions {
    pub case_sensitive: bool,
    pub type_aware: bool,
}

impl Default for SeenOptions {
    fn default() -> Self {
        SeenOptions {
            case_sensitive: true,
            type_aware: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SeenSplit {
    pub seen_recall: Percent,
    pub unseen_recall: Percent,
    pub overall_recall: Percent,
    pub seen_gold_count: u64,
    pub unseen_gold_count: u64,
    pub seen_tp: u64,
    pub unseen_tp: u64,
}

/// Recall over gold test mentions whose surface does / does not occur as a
/// gold training mention.
pub fn seen_unseen_recall(
    gold_test: &Corpus,
    pred_test: &Corpus,
    gold_train: &Corpus,
    options: SeenOptions,
) -> Result<SeenSplit, ScoreError> {
    let key = |m: &Mention| {
        let surface = if options.case_sensitive {
            m.surface.clone()
        } else {
            m.surface.to_lowercase()
        };
        let ty = options.type_aware.then(|| m.entity_type.clone());
        (surface, ty)
    };
    let train: HashSet<_> = gold_train
        .mentions()
        .map_err(|source| invalid_train(gold_train, source))?
        .iter()
        .map(key)
        .collect();

    let (mut seen, mut unseen, mut seen_tp, mut unseen_tp) = (0, 0, 0, 0);
    for pair in sentence_pairs(gold_test, pred_test)? {
        let pred: HashSet<_> = pair
            .pred
            .iter()
            .map(|m| (m.start_token, m.end_token, &m.entity_type))
            .collect();
        for g in &pair.gold {
            let hit = pred.contains(&(g.start_token, g.end_token, &g.entity_type)) as u64;
            if train.contains(&key(g)) {
                seen += 1;
                seen_tp += hit;
            } else {
                unseen += 1;
                unseen_tp += hit;
            }
        }
    }
    Ok(SeenSplit {
        seen_recall: Percent::new(seen_tp, seen),
        unseen_recall: Percent::new(unseen_tp, unseen),
        overall_recall: Percent::new(seen_tp + unseen_tp, seen + unseen),
        seen_gold_count: seen,
        unseen_gold_count: unseen,
        seen_tp,
        unseen_tp,
    })
}

fn invalid_train(train: &Corpus, source: InvalidSequence) -> ScoreError {
    // locate the offending sentence for the diagnostic
    for doc in &train.documents {
        for (si, s) in doc.sentences.iter().enumerate() {
            if extract_mentions(s, train.encoding, doc.doc_index, si).is_err() {
                return ScoreError::EncodingInvalid {
                    side: Side::Train,
                    doc_index: doc.doc_index,
                    sentence_index: si,
                    source,
                };
            }
        }
    }
    ScoreError::EncodingInvalid {
        side: Side::Train,
        doc_index: 0,
        sentence_index: 0,
        source,
    }
}
