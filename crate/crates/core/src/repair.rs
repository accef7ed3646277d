//! Declarative corpus repairs and advisory detectors for common defects.
//!
//! Every op locates its target in the input corpus. Ops are applied right
//! to left within each document (later sentences first, later tokens first)
//! so that no op shifts the coordinates of an op still to come.

use std::cmp::Reverse;
use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::conll::{sentence_violations, TransitionViolation};
use crate::metadata::{Domain, Format, MetadataTable};
use crate::model::{Corpus, Label, Sentence, Token};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OpKind {
    #[serde(alias = "SentenceMerge")]
    SentenceMerge,
    #[serde(alias = "SentenceSplit")]
    SentenceSplit,
    #[serde(alias = "TokenSplit")]
    TokenSplit,
    #[serde(alias = "HyphenSplit")]
    HyphenSplit,
    #[serde(alias = "LabelFix")]
    LabelFix,
}

impl OpKind {
    pub const ALL: [OpKind; 5] = [
        OpKind::TokenSplit,
        OpKind::HyphenSplit,
        OpKind::SentenceMerge,
        OpKind::SentenceSplit,
        OpKind::LabelFix,
    ];

    pub fn key(self) -> &'static str {
        match self {
            OpKind::SentenceMerge => "sentence_merge",
            OpKind::SentenceSplit => "sentence_split",
            OpKind::TokenSplit => "token_split",
            OpKind::HyphenSplit => "hyphen_split",
            OpKind::LabelFix => "label_fix",
        }
    }
}

/// One line of a patch file.
///
/// `expected_surface` guards against stale patches. For token ops it is the
/// token's surface; for sentence merges and splits it is the sentence text
/// with tokens joined by single spaces.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RepairOp {
    pub kind: OpKind,
    pub doc_index: usize,
    pub sentence_index: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub token_index: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expected_surface: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub surfaces: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub labels: Option<Vec<Label>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub new_label: Option<Label>,
    /// Token index for a sentence split; character offset of the hyphen
    /// for a hyphen split.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub split_at: Option<usize>,
}

impl RepairOp {
    fn base(kind: OpKind, doc_index: usize, sentence_index: usize) -> Self {
        RepairOp {
            kind,
            doc_index,
            sentence_index,
            token_index: None,
            expected_surface: None,
            surfaces: None,
            labels: None,
            new_label: None,
            split_at: None,
        }
    }

    pub fn sentence_merge(doc_index: usize, sentence_index: usize) -> Self {
        Self::base(OpKind::SentenceMerge, doc_index, sentence_index)
    }

    pub fn sentence_split(doc_index: usize, sentence_index: usize, split_at: usize) -> Self {
        RepairOp {
            split_at: Some(split_at),
            ..Self::base(OpKind::SentenceSplit, doc_index, sentence_index)
        }
    }

    pub fn token_split(
        doc_index: usize,
        sentence_index: usize,
        token_index: usize,
        surfaces: Vec<String>,
        labels: Vec<Label>,
    ) -> Self {
        RepairOp {
            token_index: Some(token_index),
            surfaces: Some(surfaces),
            labels: Some(labels),
            ..Self::base(OpKind::TokenSplit, doc_index, sentence_index)
        }
    }

    pub fn hyphen_split(doc_index: usize, sentence_index: usize, token_index: usize, labels: Vec<Label>) -> Self {
        RepairOp {
            token_index: Some(token_index),
            labels: Some(labels),
            ..Self::base(OpKind::HyphenSplit, doc_index, sentence_index)
        }
    }

    pub fn label_fix(doc_index: usize, sentence_index: usize, token_index: usize, new_label: Label) -> Self {
        RepairOp {
            token_index: Some(token_index),
            new_label: Some(new_label),
            ..Self::base(OpKind::LabelFix, doc_index, sentence_index)
        }
    }

    pub fn expecting(mut self, surface: impl Into<String>) -> Self {
        self.expected_surface = Some(surface.into());
        self
    }

    /// Tokens this op adds when applied.
    pub fn token_delta(&self) -> i64 {
        match self.kind {
            OpKind::TokenSplit => self.surfaces.as_ref().map_or(0, |s| s.len() as i64 - 1),
            OpKind::HyphenSplit => 2,
            _ => 0,
        }
    }

    /// Sentences this op adds when applied.
    pub fn sentence_delta(&self) -> i64 {
        match self.kind {
            OpKind::SentenceMerge => -1,
            OpKind::SentenceSplit => 1,
            _ => 0,
        }
    }

    /// Ordering key: documents ascending, then right to left. A split at
    /// token `k` runs after any op on token `k` itself.
    fn order_key(&self) -> (usize, Reverse<usize>, Reverse<usize>, bool) {
        let token = match self.kind {
            OpKind::SentenceMerge => usize::MAX,
            OpKind::SentenceSplit => self.split_at.unwrap_or(0),
            _ => self.token_index.unwrap_or(0),
        };
        (
            self.doc_index,
            Reverse(self.sentence_index),
            Reverse(token),
            self.kind == OpKind::SentenceSplit,
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RepairError {
    #[error("op {op}: {message}")]
    BadLocation { op: usize, message: String },
    #[error("op {op}: expected {expected:?}, found {found:?}")]
    SurfaceMismatch {
        op: usize,
        expected: String,
        found: String,
    },
    #[error("op {op}: {message}")]
    BadPayload { op: usize, message: String },
    #[error("patch would create {} invalid transition(s), first at document {}, sentence {}, token {}",
        .0.len(), .0[0].location.doc_index, .0[0].location.sentence_index, .0[0].location.token_index)]
    WouldCreateInvalidTransition(Vec<TransitionViolation>),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SkippedOp {
    /// Position of the op in the patch.
    pub op: usize,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize)]
pub struct RepairStats {
    pub submitted: usize,
    pub applied: usize,
    pub skipped: Vec<SkippedOp>,
    pub counts: BTreeMap<OpKind, usize>,
    pub token_delta: i64,
    pub sentence_delta: i64,
}

impl RepairStats {
    pub fn count(&self, kind: OpKind) -> usize {
        self.counts.get(&kind).copied().unwrap_or(0)
    }

    /// Merges and splits together.
    pub fn sentence_boundary_fixes(&self) -> usize {
        self.count(OpKind::SentenceMerge) + self.count(OpKind::SentenceSplit)
    }

    pub fn render_text(&self) -> String {
        let mut out = String::new();
        let rows = [
            ("Token splits", self.count(OpKind::TokenSplit)),
            ("Hyphen fixes", self.count(OpKind::HyphenSplit)),
            ("Sentence boundary fixes", self.sentence_boundary_fixes()),
            ("  merges", self.count(OpKind::SentenceMerge)),
            ("  splits", self.count(OpKind::SentenceSplit)),
            ("Label fixes", self.count(OpKind::LabelFix)),
        ];
        for (name, n) in rows {
            let _ = writeln!(out, "{name:<26}{n:>8}");
        }
        let _ = writeln!(out, "{:<26}{:>8}", "Submitted", self.submitted);
        let _ = writeln!(out, "{:<26}{:>8}", "Applied", self.applied);
        let _ = writeln!(out, "{:<26}{:>8}", "Skipped", self.skipped.len());
        for s in &self.skipped {
            let _ = writeln!(out, "  op {}: {}", s.op, s.reason);
        }
        let _ = writeln!(out, "{:<26}{:>+8}", "Token delta", self.token_delta);
        let _ = writeln!(out, "{:<26}{:>+8}", "Sentence delta", self.sentence_delta);
        out
    }
}

/// Per-kind counts of a patch without applying it.
pub fn patch_stats(patch: &[RepairOp]) -> RepairStats {
    let mut stats = RepairStats {
        submitted: patch.len(),
        applied: patch.len(),
        ..Default::default()
    };
    for op in patch {
        *stats.counts.entry(op.kind).or_default() += 1;
        stats.token_delta += op.token_delta();
        stats.sentence_delta += op.sentence_delta();
    }
    stats
}

/// A sentence with a parallel mark per token recording whether the op set
/// changed the token or its left context.
struct Work {
    tokens: Vec<Token>,
    marks: Vec<bool>,
}

fn sentence_text(tokens: &[Token]) -> String {
    tokens.iter().map(|t| t.surface.as_str()).collect::<Vec<_>>().join(" ")
}

/// Apply `patch` to `corpus`. Any failing op rejects the whole patch.
pub fn apply_patch(corpus: &Corpus, patch: &[RepairOp]) -> Result<(Corpus, RepairStats), RepairError> {
    let mut stats = RepairStats {
        submitted: patch.len(),
        ..Default::default()
    };
    if patch.is_empty() {
        return Ok((corpus.clone(), stats));
    }

    let doc_pos: BTreeMap<usize, usize> = corpus
        .documents
        .iter()
        .enumerate()
        .map(|(i, d)| (d.doc_index, i))
        .collect();
    let mut order: Vec<usize> = (0..patch.len()).collect();
    order.sort_by_key(|&i| patch[i].order_key());

    for (i, op) in patch.iter().enumerate() {
        if let Some(&d) = doc_pos.get(&op.doc_index) {
            check_expected(i, op, &corpus.documents[d].sentences)?;
        }
    }

    let mut work: BTreeMap<usize, Vec<Work>> = BTreeMap::new();
    for &i in &order {
        let op = &patch[i];
        let bad = |message: String| RepairError::BadLocation { op: i, message };
        let d = *doc_pos
            .get(&op.doc_index)
            .ok_or_else(|| bad(format!("no document {}", op.doc_index)))?;
        let sentences = work.entry(d).or_insert_with(|| {
            corpus.documents[d]
                .sentences
                .iter()
                .map(|s| Work {
                    tokens: s.tokens.clone(),
                    marks: vec![false; s.len()],
                })
                .collect()
        });
        if let Some(reason) = apply_one(i, op, sentences)? {
            stats.skipped.push(SkippedOp { op: i, reason });
        } else {
            stats.applied += 1;
            *stats.counts.entry(op.kind).or_default() += 1;
            stats.token_delta += op.token_delta();
            stats.sentence_delta += op.sentence_delta();
        }
    }
    stats.skipped.sort_by_key(|s| s.op);

    let mut out = corpus.clone();
    let mut created = Vec::new();
    for (d, sentences) in work {
        let doc = &mut out.documents[d];
        doc.sentences.clear();
        for (si, w) in sentences.into_iter().enumerate() {
            let sentence = Sentence::new(w.tokens);
            let touched = |p: usize| w.marks[p] || (p > 0 && w.marks[p - 1]);
            created.extend(
                sentence_violations(&sentence, corpus.encoding, doc.doc_index, si)
                    .into_iter()
                    .filter(|v| touched(v.location.token_index)),
            );
            doc.sentences.push(sentence);
        }
    }
    if !created.is_empty() {
        return Err(RepairError::WouldCreateInvalidTransition(created));
    }
    Ok((out, stats))
}

/// Compare the op's guard with the input corpus, before any op runs.
fn check_expected(i: usize, op: &RepairOp, sentences: &[Sentence]) -> Result<(), RepairError> {
    let Some(expected) = &op.expected_surface else {
        return Ok(());
    };
    let Some(sentence) = sentences.get(op.sentence_index) else {
        return Ok(());
    };
    let found = match op.kind {
        OpKind::SentenceMerge | OpKind::SentenceSplit => sentence_text(&sentence.tokens),
        _ => match op.token_index.and_then(|t| sentence.tokens.get(t)) {
            Some(token) => token.surface.clone(),
            None => return Ok(()),
        },
    };
    if *expected != found {
        return Err(RepairError::SurfaceMismatch {
            op: i,
            expected: expected.clone(),
            found,
        });
    }
    Ok(())
}

/// Returns a skip reason when the op is a no-op.
fn apply_one(i: usize, op: &RepairOp, sentences: &mut Vec<Work>) -> Result<Option<String>, RepairError> {
    let bad = |message: String| RepairError::BadLocation { op: i, message };
    let payload = |message: &str| RepairError::BadPayload {
        op: i,
        message: message.to_string(),
    };
    let s = op.sentence_index;
    if s >= sentences.len() {
        return Err(bad(format!("no sentence {s} in document {}", op.doc_index)));
    }

    match op.kind {
        OpKind::SentenceMerge => {
            if s + 1 >= sentences.len() {
                return Err(bad(format!("sentence {s} has no successor")));
            }
            let next = sentences.remove(s + 1);
            let w = &mut sentences[s];
            let join = w.tokens.len();
            w.tokens.extend(next.tokens);
            w.marks.extend(next.marks);
            if join < w.marks.len() {
                w.marks[join] = true;
            }
        }
        OpKind::SentenceSplit => {
            let k = op.split_at.ok_or_else(|| payload("sentence_split needs split_at"))?;
            let len = sentences[s].tokens.len();
            if k == 0 || k >= len {
                return Err(bad(format!("split_at {k} outside 1..{len}")));
            }
            let w = &mut sentences[s];
            let tokens = w.tokens.split_off(k);
            let mut marks = w.marks.split_off(k);
            marks[0] = true;
            sentences.insert(s + 1, Work { tokens, marks });
        }
        OpKind::TokenSplit | OpKind::HyphenSplit | OpKind::LabelFix => {
            let t = op.token_index.ok_or_else(|| payload("token op needs token_index"))?;
            let w = &mut sentences[s];
            let token = w
                .tokens
                .get(t)
                .ok_or_else(|| bad(format!("no token {t} in sentence {s}")))?
                .clone();
            let mismatch = |expected: String| RepairError::SurfaceMismatch {
                op: i,
                expected,
                found: token.surface.clone(),
            };
            let replacement: Vec<(String, Label)> = match op.kind {
                OpKind::LabelFix => {
                    let label = op.new_label.clone().ok_or_else(|| payload("label_fix needs new_label"))?;
                    if label == token.label {
                        return Ok(Some(format!("label already {label}")));
                    }
                    w.tokens[t].label = label;
                    w.marks[t] = true;
                    return Ok(None);
                }
                OpKind::TokenSplit => {
                    let surfaces = op.surfaces.clone().ok_or_else(|| payload("token_split needs surfaces"))?;
                    let labels = op.labels.clone().ok_or_else(|| payload("token_split needs labels"))?;
                    if surfaces.len() < 2 || labels.len() != surfaces.len() {
                        return Err(payload("token_split needs at least two surfaces and one label per surface"));
                    }
                    if surfaces.iter().any(|p| p.is_empty() || p.chars().any(char::is_whitespace)) {
                        return Err(payload("token_split surfaces must be non-empty and whitespace-free"));
                    }
                    let joined = surfaces.concat();
                    if joined != token.surface {
                        return Err(mismatch(joined));
                    }
                    surfaces.into_iter().zip(labels).collect()
                }
                _ => {
                    let labels = op.labels.clone().ok_or_else(|| payload("hyphen_split needs labels"))?;
                    if labels.len() != 3 {
                        return Err(payload("hyphen_split needs three labels"));
                    }
                    let (left, right) = split_hyphen(&token.surface).ok_or_else(|| {
                        mismatch("a token with one interior hyphen".to_string())
                    })?;
                    if let Some(at) = op.split_at {
                        let offset = left.chars().count();
                        if at != offset {
                            return Err(mismatch(format!("hyphen at offset {at}")));
                        }
                    }
                    let parts = [left.to_string(), "-".to_string(), right.to_string()];
                    parts.into_iter().zip(labels).collect()
                }
            };
            let n = replacement.len();
            let new_tokens = replacement.into_iter().map(|(surface, label)| Token {
                surface,
                label,
                ..token.clone()
            });
            w.tokens.splice(t..=t, new_tokens);
            w.marks.splice(t..=t, std::iter::repeat(true).take(n));
        }
    }
    Ok(None)
}

/// `A-B` with exactly one hyphen, neither side empty.
fn split_hyphen(surface: &str) -> Option<(&str, &str)> {
    if surface.matches('-').count() != 1 {
        return None;
    }
    let (left, right) = surface.split_once('-')?;
    (!left.is_empty() && !right.is_empty()).then_some((left, right))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CandidateKind {
    HeadlineBoundary,
    Hyphen,
}

/// A location worth human review.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Candidate {
    pub kind: CandidateKind,
    pub doc_index: usize,
    pub sentence_index: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub token_index: Option<usize>,
    /// The flagged token, or the first sentence for a boundary candidate.
    pub text: String,
    /// Rendered characters of the first sentence, for boundary candidates.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub offset: Option<usize>,
    pub suggested: RepairOp,
}

fn all_caps(s: &str) -> bool {
    s.chars().any(char::is_alphabetic) && !s.chars().any(char::is_lowercase)
}

/// Sports data reports whose first sentence ends inside `window` (rendered
/// characters, inclusive) and whose second sentence starts in capitals.
pub fn detect_headline_boundary_candidates(
    corpus: &Corpus,
    metadata: &MetadataTable,
    window: (usize, usize),
) -> Vec<Candidate> {
    corpus
        .documents
        .iter()
        .filter(|doc| {
            let m = metadata.get(doc.doc_index);
            m.domain == Domain::Sports && m.format == Format::DataReport
        })
        .filter_map(|doc| {
            let first = doc.sentences.first()?;
            let second = doc.sentences.get(1)?;
            let chars = first.rendered_chars();
            if chars < window.0 || chars > window.1 || !all_caps(&second.tokens.first()?.surface) {
                return None;
            }
            let text = sentence_text(&first.tokens);
            Some(Candidate {
                kind: CandidateKind::HeadlineBoundary,
                doc_index: doc.doc_index,
                sentence_index: 0,
                token_index: None,
                suggested: RepairOp::sentence_merge(doc.doc_index, 0).expecting(text.clone()),
                text,
                offset: Some(chars),
            })
        })
        .collect()
}

/// Capitalized `A-B` tokens in a document's first sentence, both sides
/// alphabetic and at least two characters long.
pub fn detect_hyphen_candidates(corpus: &Corpus) -> Vec<Candidate> {
    let mut out = Vec::new();
    for doc in &corpus.documents {
        let Some(first) = doc.sentences.first() else {
            continue;
        };
        for (ti, token) in first.tokens.iter().enumerate() {
            let Some((left, right)) = split_hyphen(&token.surface) else {
                continue;
            };
            let shape = |side: &str| side.chars().count() >= 2 && side.chars().all(char::is_alphabetic);
            if !shape(left) || !shape(right) || !all_caps(&token.surface) {
                continue;
            }
            let labels = vec![token.label.clone(), Label::Outside, token.label.clone()];
            out.push(Candidate {
                kind: CandidateKind::Hyphen,
                doc_index: doc.doc_index,
                sentence_index: 0,
                token_index: Some(ti),
                text: token.surface.clone(),
                offset: None,
                suggested: RepairOp {
                    split_at: Some(left.chars().count()),
                    ..RepairOp::hyphen_split(doc.doc_index, 0, ti, labels).expecting(token.surface.clone())
                },
            });
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::conll::{parse_str, write_corpus, ParseOptions};
    use crate::metadata::DocMetadata;

    fn parse(text: &str) -> Corpus {
        parse_str(text, ParseOptions::default()).unwrap().0
    }

    fn l(s: &str) -> Label {
        s.parse().unwrap()
    }

    const HEADLINE: &str = "-DOCSTART- O\n\nSKIING-WORLD O\nCUP B-MISC\n\nThe O\nrace O\n\n";

    #[test]
    fn hyphen_split_skiing_world() {
        let c = parse(HEADLINE);
        // the split piece keeps the left label, the remainder joins the mention
        let op = RepairOp::hyphen_split(0, 0, 0, vec![l("O"), l("O"), l("B-MISC")]).expecting("SKIING-WORLD");
        let fixed_cup = RepairOp::label_fix(0, 0, 1, l("I-MISC")).expecting("CUP");
        let (out, stats) = apply_patch(&c, &[op, fixed_cup]).unwrap();
        assert_eq!(
            write_corpus(&out),
            "-DOCSTART- O\n\nSKIING O\n- O\nWORLD B-MISC\nCUP I-MISC\n\nThe O\nrace O\n\n"
        );
        assert_eq!(stats.applied, 2);
        assert_eq!(stats.token_delta, 2);
        assert_eq!(out.token_count(), c.token_count() + 2);
    }

    #[test]
    fn token_split_josep_guardiola() {
        let c = parse("-DOCSTART- O\n\ncoach O\nJosepGuardiola B-PER\nsaid O\n\n");
        let op = RepairOp::token_split(
            0,
            0,
            1,
            vec!["Josep".into(), "Guardiola".into()],
            vec![l("B-PER"), l("I-PER")],
        );
        let (out, stats) = apply_patch(&c, &[op.clone()]).unwrap();
        assert_eq!(
            write_corpus(&out),
            "-DOCSTART- O\n\ncoach O\nJosep B-PER\nGuardiola I-PER\nsaid O\n\n"
        );
        assert_eq!(stats.count(OpKind::TokenSplit), 1);
        // stale on second application
        assert!(matches!(
            apply_patch(&out, &[op]),
            Err(RepairError::SurfaceMismatch { .. })
        ));
    }

    #[test]
    fn token_split_keeps_extra_columns() {
        let c = parse("-DOCSTART- -X- -X- O\n\nJosepGuardiola NNP B-NP B-PER\n\n");
        let op = RepairOp::token_split(0, 0, 0, vec!["Josep".into(), "Guardiola".into()], vec![l("B-PER"), l("I-PER")]);
        let (out, _) = apply_patch(&c, &[op]).unwrap();
        assert_eq!(
            write_corpus(&out),
            "-DOCSTART- -X- -X- O\n\nJosep NNP B-NP B-PER\nGuardiola NNP B-NP I-PER\n\n"
        );
    }

    #[test]
    fn merge_lets_a_mention_cross_the_old_boundary() {
        let c = parse(
            "-DOCSTART- O\n\nResults O\nof O\nNational B-ORG\nBasketball I-ORG\n\nAssociation B-ORG\ngames O\non O\nFriday O\n\n",
        );
        let merge = RepairOp::sentence_merge(0, 0).expecting("Results of National Basketball");
        let fix = RepairOp::label_fix(0, 1, 0, l("I-ORG")).expecting("Association");
        let (out, stats) = apply_patch(&c, &[merge.clone(), fix.clone()]).unwrap();
        assert_eq!(out.sentence_count(), 1);
        assert_eq!(stats.sentence_delta, -1);
        let m = out.mentions().unwrap();
        assert_eq!(m.len(), 1);
        assert_eq!(m[0].surface, "National Basketball Association");
        assert!(matches!(
            apply_patch(&out, &[merge]),
            Err(RepairError::SurfaceMismatch { .. }) | Err(RepairError::BadLocation { .. })
        ));
    }

    #[test]
    fn merge_alone_would_leave_dangling_inside_invalid() {
        let c = parse("-DOCSTART- O\n\nA O\n\nB O\n\n");
        let fix = RepairOp::label_fix(0, 1, 0, l("I-ORG"));
        match apply_patch(&c, &[fix]) {
            Err(RepairError::WouldCreateInvalidTransition(v)) => {
                assert_eq!(v[0].location.sentence_index, 1);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn existing_violations_elsewhere_do_not_block() {
        let opts = ParseOptions {
            encoding: Some(crate::EncodingScheme::Bio),
            ..Default::default()
        };
        let c = parse_str("-DOCSTART- O\n\nA O\nB I-PER\n\nC O\n\n", opts).unwrap().0;
        let (out, _) = apply_patch(&c, &[RepairOp::label_fix(0, 1, 0, l("B-LOC"))]).unwrap();
        assert_eq!(out.documents[0].sentences[1].tokens[0].label, l("B-LOC"));
    }

    #[test]
    fn sentence_split_and_atomicity() {
        let c = parse("-DOCSTART- O\n\nA O\nB O\nC O\n\n");
        let (out, stats) = apply_patch(&c, &[RepairOp::sentence_split(0, 0, 2).expecting("A B C")]).unwrap();
        assert_eq!(write_corpus(&out), "-DOCSTART- O\n\nA O\nB O\n\nC O\n\n");
        assert_eq!(stats.sentence_delta, 1);

        let good = RepairOp::label_fix(0, 0, 0, l("B-PER"));
        let bad = RepairOp::label_fix(0, 0, 9, l("B-PER"));
        assert!(matches!(apply_patch(&c, &[good, bad]), Err(RepairError::BadLocation { op: 1, .. })));
    }

    #[test]
    fn ops_use_input_coordinates() {
        let c = parse("-DOCSTART- O\n\nA O\nXY O\nB O\n\nC O\nD O\n\n");
        let patch = vec![
            RepairOp::sentence_merge(0, 0).expecting("A XY B"),
            RepairOp::token_split(0, 0, 1, vec!["X".into(), "Y".into()], vec![l("O"), l("O")]),
            RepairOp::label_fix(0, 0, 2, l("B-LOC")).expecting("B"),
            RepairOp::label_fix(0, 1, 1, l("B-PER")).expecting("D"),
        ];
        let (out, stats) = apply_patch(&c, &patch).unwrap();
        assert_eq!(write_corpus(&out), "-DOCSTART- O\n\nA O\nX O\nY O\nB B-LOC\nC O\nD B-PER\n\n");
        assert_eq!(stats.applied, 4);
    }

    #[test]
    fn empty_patch_is_identity() {
        let c = parse(HEADLINE);
        let (out, stats) = apply_patch(&c, &[]).unwrap();
        assert_eq!(out, c);
        assert_eq!(stats, RepairStats::default());
        assert_eq!(patch_stats(&[]), RepairStats::default());
    }

    #[test]
    fn unchanged_label_fix_is_skipped() {
        let c = parse(HEADLINE);
        let (_, stats) = apply_patch(&c, &[RepairOp::label_fix(0, 0, 1, l("B-MISC"))]).unwrap();
        assert_eq!(stats.applied, 0);
        assert_eq!(stats.skipped.len(), 1);
        assert_eq!(stats.applied + stats.skipped.len(), stats.submitted);
    }

    #[test]
    fn patch_stats_counts_kinds() {
        let patch = vec![
            RepairOp::sentence_merge(0, 0),
            RepairOp::label_fix(0, 0, 0, l("B-PER")),
            RepairOp::label_fix(1, 0, 0, l("B-PER")),
        ];
        let s = patch_stats(&patch);
        assert_eq!(s.count(OpKind::SentenceMerge), 1);
        assert_eq!(s.count(OpKind::LabelFix), 2);
        assert_eq!(s.count(OpKind::TokenSplit), 0);
        assert_eq!(s.sentence_boundary_fixes(), 1);
    }

    #[test]
    fn patch_lines_round_trip() {
        let line = r#"{"kind":"hyphen_split","doc_index":3,"sentence_index":0,"token_index":1,"expected_surface":"SKIING-WORLD","labels":["O","O","B-MISC"],"split_at":6}"#;
        let op: RepairOp = serde_json::from_str(line).unwrap();
        assert_eq!(op.kind, OpKind::HyphenSplit);
        assert_eq!(serde_json::to_string(&op).unwrap(), line);
        let legacy: RepairOp =
            serde_json::from_str(r#"{"kind":"LabelFix","doc_index":0,"sentence_index":0,"token_index":0,"new_label":"B-PER"}"#).unwrap();
        assert_eq!(legacy.kind, OpKind::LabelFix);
    }

    #[test]
    fn hyphen_offset_is_checked() {
        let c = parse(HEADLINE);
        let mut op = RepairOp::hyphen_split(0, 0, 0, vec![l("O"), l("O"), l("O")]);
        op.split_at = Some(3);
        assert!(matches!(apply_patch(&c, &[op]), Err(RepairError::SurfaceMismatch { .. })));
    }

    fn sports_data(doc: usize) -> MetadataTable {
        let mut m = MetadataTable::new();
        m.insert(doc, DocMetadata::new(Domain::Sports, Format::DataReport));
        m
    }

    #[test]
    fn headline_split_is_detected() {
        let c = parse("-DOCSTART- O\n\nALPINE B-MISC\nSKIING-GOE I-MISC\n\nTCHL O\nWINS O\n\nResult O\n\n");
        let hits = detect_headline_boundary_candidates(&c, &sports_data(0), (16, 20));
        assert_eq!(hits.len(), 1);
        assert_eq!(hits[0].offset, Some(17));
        assert_eq!(hits[0].suggested.kind, OpKind::SentenceMerge);

        // other strata are ignored
        let mut m = MetadataTable::new();
        m.insert(0, DocMetadata::new(Domain::Sports, Format::TextArticle));
        assert!(detect_headline_boundary_candidates(&c, &m, (16, 20)).is_empty());
    }

    #[test]
    fn intact_headline_is_not_flagged() {
        let c = parse("-DOCSTART- O\n\nALPINE O\nSKIING-GOETSCHL O\nWINS O\n\nResult O\n\n");
        assert!(detect_headline_boundary_candidates(&c, &sports_data(0), (16, 20)).is_empty());
    }

    #[test]
    fn hyphen_candidates() {
        let c = parse(
            "-DOCSTART- O\n\nALPINE O\nSKIING-GOETSCHL B-PER\nB-2 O\nUS-born O\n\nUK-US B-MISC\nopen O\n\n",
        );
        let hits = detect_hyphen_candidates(&c);
        assert_eq!(hits.len(), 1);
        assert_eq!(hits[0].text, "SKIING-GOETSCHL");
        assert_eq!(hits[0].token_index, Some(1));
        assert_eq!(hits[0].suggested.split_at, Some(6));
    }
}
