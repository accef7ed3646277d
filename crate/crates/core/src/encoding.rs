//! IOB1 and BIO (IOB2) chunk encodings.
//!
//! Both schemes share the `O`/`B-X`/`I-X` alphabet and differ only in which
//! adjacent pairs are legal:
//!
//! - BIO: every mention starts with `B-X`; `I-X` must follow `B-X` or `I-X`.
//! - IOB1: mentions start with `I-X`; `B-X` is only legal right after a
//!   token of the same type, where it separates two adjacent mentions.
//!
//! Sentence-initial tokens are checked against a virtual preceding `O`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{EntityType, Label};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub enum EncodingScheme {
    #[serde(rename = "IOB1")]
    Iob1,
    #[default]
    #[serde(rename = "BIO")]
    Bio,
}

impl fmt::Display for EncodingScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EncodingScheme::Iob1 => f.write_str("IOB1"),
            EncodingScheme::Bio => f.write_str("BIO"),
        }
    }
}

impl FromStr for EncodingScheme {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_uppercase().as_str() {
            "IOB1" | "IOB" => Ok(EncodingScheme::Iob1),
            "BIO" | "IOB2" => Ok(EncodingScheme::Bio),
            _ => Err(format!("unknown encoding {s:?} (expected IOB1 or BIO)")),
        }
    }
}

/// An illegal adjacent pair found while decoding a label sequence.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("invalid {scheme} transition {prev} -> {cur} at token {position}")]
pub struct InvalidSequence {
    pub scheme: EncodingScheme,
    pub position: usize,
    pub prev: Label,
    pub cur: Label,
}

/// A typed token range `[start, end)` within one sentence.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Span {
    pub start: usize,
    pub end: usize,
    pub entity_type: EntityType,
}

/// Whether `cur` may follow `prev` under `scheme`.
pub fn is_legal(prev: &Label, cur: &Label, scheme: EncodingScheme) -> bool {
    match (scheme, cur) {
        (EncodingScheme::Bio, Label::Inside(t)) | (EncodingScheme::Iob1, Label::Begin(t)) => {
            prev.entity_type() == Some(t)
        }
        _ => true,
    }
}

/// Positions `i` where `labels[i]` may not follow its predecessor.
pub fn illegal_positions(labels: &[Label], scheme: EncodingScheme) -> Vec<usize> {
    let outside = Label::Outside;
    (0..labels.len())
        .filter(|&i| {
            let prev = if i == 0 { &outside } else { &labels[i - 1] };
            !is_legal(prev, &labels[i], scheme)
        })
        .collect()
}

/// Decode `labels` into maximal typed spans.
pub fn spans(labels: &[Label], scheme: EncodingScheme) -> Result<Vec<Span>, InvalidSequence> {
    let mut out = Vec::new();
    let mut open: Option<(usize, EntityType)> = None;
    let outside = Label::Outside;

    for (i, label) in labels.iter().enumerate() {
        let prev = if i == 0 { &outside } else { &labels[i - 1] };
        if !is_legal(prev, label, scheme) {
            return Err(InvalidSequence {
                scheme,
                position: i,
                prev: prev.clone(),
                cur: label.clone(),
            });
        }
        let starts_new = match (scheme, label) {
            (_, Label::Outside) => None,
            (_, Label::Begin(t)) => Some(t),
            (EncodingScheme::Bio, Label::Inside(_)) => None,
            (EncodingScheme::Iob1, Label::Inside(t)) => match &open {
                Some((_, cur)) if cur == t => None,
                _ => Some(t),
            },
        };
        if label.is_outside() || starts_new.is_some() {
            if let Some((start, ty)) = open.take() {
                out.push(Span {
                    start,
                    end: i,
                    entity_type: ty,
                });
            }
        }
        if let Some(t) = starts_new {
            open = Some((i, t.clone()));
        }
    }
    if let Some((start, ty)) = open {
        out.push(Span {
            start,
            end: labels.len(),
            entity_type: ty,
        });
    }
    Ok(out)
}

/// Encode sorted, disjoint spans as a label sequence of length `len`.
pub fn encode(len: usize, spans: &[Span], scheme: EncodingScheme) -> Vec<Label> {
    let mut labels = vec![Label::Outside; len];
    let mut prev_end: Option<(usize, &EntityType)> = None;
    for span in spans {
        let adjacent_same =
            matches!(prev_end, Some((end, ty)) if end == span.start && ty == &span.entity_type);
        let first = match scheme {
            EncodingScheme::Bio => Label::Begin(span.entity_type.clone()),
            EncodingScheme::Iob1 if adjacent_same => Label::Begin(span.entity_type.clone()),
            EncodingScheme::Iob1 => Label::Inside(span.entity_type.clone()),
        };
        labels[span.start] = first;
        for slot in &mut labels[span.start + 1..span.end] {
            *slot = Label::Inside(span.entity_type.clone());
        }
        prev_end = Some((span.end, &span.entity_type));
    }
    labels
}

/// Re-encode one sentence's labels from `from` to `to`, preserving its spans.
pub fn convert_labels(
    labels: &[Label],
    from: EncodingScheme,
    to: EncodingScheme,
) -> Result<Vec<Label>, InvalidSequence> {
    if from == to {
        spans(labels, from)?;
        return Ok(labels.to_vec());
    }
    Ok(encode(labels.len(), &spans(labels, from)?, to))
}

/// Rewrite illegal tokens the way conlleval reads them: under BIO a stray
/// `I-X` becomes `B-X`; under IOB1 a stray `B-X` becomes `I-X`. The result is
/// always valid under `scheme`.
pub fn repair_conlleval(labels: &[Label], scheme: EncodingScheme) -> Vec<Label> {
    let mut out = labels.to_vec();
    for i in illegal_positions(labels, scheme) {
        out[i] = match (&out[i], scheme) {
            (Label::Inside(t), EncodingScheme::Bio) => Label::Begin(t.clone()),
            (Label::Begin(t), EncodingScheme::Iob1) => Label::Inside(t.clone()),
            (other, _) => other.clone(),
        };
    }
    out
}

/// How clear-cut an encoding detection was.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Detection {
    /// Only one scheme is consistent with the file.
    Clear,
    /// Both schemes are consistent (e.g. all-O); BIO chosen.
    Ambiguous,
    /// Neither scheme is consistent; BIO chosen and violations reported.
    Conflicting,
}

/// File-global encoding detection over the sentences of a corpus.
///
/// A mention-initial `I-X` (after `O`, another type, or the sentence start) is
/// evidence for IOB1; a `B-X` in the same position is evidence against it.
pub fn detect<'a, I>(sentences: I) -> (EncodingScheme, Detection)
where
    I: IntoIterator<Item = &'a [Label]>,
{
    let mut iob1_evidence = false;
    let mut bio_evidence = false;
    for labels in sentences {
        let mut prev = &Label::Outside;
        for label in labels {
            match label {
                Label::Inside(t) if prev.entity_type() != Some(t) => iob1_evidence = true,
                Label::Begin(t) if prev.entity_type() != Some(t) => bio_evidence = true,
                _ => {}
            }
            prev = label;
        }
    }
    match (iob1_evidence, bio_evidence) {
        (true, false) => (EncodingScheme::Iob1, Detection::Clear),
        (false, true) => (EncodingScheme::Bio, Detection::Clear),
        (false, false) => (EncodingScheme::Bio, Detection::Ambiguous),
        (true, true) => (EncodingScheme::Bio, Detection::Conflicting),
    }
}
