//! Value types shared by every other module.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::encoding::{self, EncodingScheme, InvalidSequence, Span};
use crate::metadata::DocMetadata;

/// The sentinel surface that starts every document in CoNLL-03 files.
pub const DOCSTART: &str = "-DOCSTART-";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LabelError {
    #[error("empty entity type")]
    EmptyType,
    #[error("entity type {0:?} contains whitespace or a hyphen")]
    BadTypeChar(String),
    #[error("malformed label {0:?}")]
    Malformed(String),
}

/// Entity type such as `PER`, `ORG`, `LOC` or `MISC`.
///
/// Any tag inventory is accepted as long as the name is non-empty and carries
/// no whitespace or hyphen (the hyphen separates the chunk prefix from the type).
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct EntityType(Arc<str>);

impl EntityType {
    pub fn new(name: &str) -> Result<Self, LabelError> {
        if name.is_empty() {
            return Err(LabelError::EmptyType);
        }
        if name.chars().any(|c| c.is_whitespace() || c == '-') {
            return Err(LabelError::BadTypeChar(name.to_string()));
        }
        Ok(EntityType(Arc::from(name)))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Debug for EntityType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl fmt::Display for EntityType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl FromStr for EntityType {
    type Err = LabelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        EntityType::new(s)
    }
}

impl Serialize for EntityType {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.0)
    }
}

impl<'de> Deserialize<'de> for EntityType {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        EntityType::new(&s).map_err(serde::de::Error::custom)
    }
}

/// A chunk label: `O`, `B-TYPE` or `I-TYPE`.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Label {
    Outside,
    Begin(EntityType),
    Inside(EntityType),
}

impl Label {
    pub fn entity_type(&self) -> Option<&EntityType> {
        match self {
            Label::Outside => None,
            Label::Begin(t) | Label::Inside(t) => Some(t),
        }
    }

    pub fn is_outside(&self) -> bool {
        matches!(self, Label::Outside)
    }

    pub fn begin(ty: &str) -> Result<Self, LabelError> {
        Ok(Label::Begin(EntityType::new(ty)?))
    }

    pub fn inside(ty: &str) -> Result<Self, LabelError> {
        Ok(Label::Inside(EntityType::new(ty)?))
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Label::Outside => f.write_str("O"),
            Label::Begin(t) => write!(f, "B-{t}"),
            Label::Inside(t) => write!(f, "I-{t}"),
        }
    }
}

impl fmt::Debug for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl FromStr for Label {
    type Err = LabelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s == "O" {
            return Ok(Label::Outside);
        }
        match s.split_once('-') {
            Some(("B", ty)) => Ok(Label::Begin(EntityType::new(ty)?)),
            Some(("I", ty)) => Ok(Label::Inside(EntityType::new(ty)?)),
            _ => Err(LabelError::Malformed(s.to_string())),
        }
    }
}

impl Serialize for Label {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Label {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// One row of the column format.
///
/// `extra_columns` holds every column except the surface and the NER tag, in
/// file order. `source_line` is provenance only and is ignored by equality.
#[derive(Debug, Clone)]
pub struct Token {
    pub surface: String,
    pub extra_columns: Vec<String>,
    pub label: Label,
    pub source_line: usize,
}

impl Token {
    pub fn new(surface: impl Into<String>, label: Label) -> Self {
        Token {
            surface: surface.into(),
            extra_columns: Vec::new(),
            label,
            source_line: 1,
        }
    }

    pub fn with_columns(mut self, columns: Vec<String>) -> Self {
        self.extra_columns = columns;
        self
    }
}

impl PartialEq for Token {
    fn eq(&self, other: &Self) -> bool {
        self.surface == other.surface
            && self.extra_columns == other.extra_columns
            && self.label == other.label
    }
}

impl Eq for Token {}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Sentence {
    pub tokens: Vec<Token>,
}

impl Sentence {
    pub fn new(tokens: Vec<Token>) -> Self {
        Sentence { tokens }
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn labels(&self) -> Vec<Label> {
        self.tokens.iter().map(|t| t.label.clone()).collect()
    }

    /// Number of characters of the sentence rendered with single spaces.
    pub fn rendered_chars(&self) -> usize {
        let chars: usize = self.tokens.iter().map(|t| t.surface.chars().count()).sum();
        chars + self.tokens.len().saturating_sub(1)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Document {
    pub doc_index: usize,
    pub sentences: Vec<Sentence>,
    pub metadata: DocMetadata,
    /// Columns after the sentinel on the `-DOCSTART-` row, when they are not
    /// the default all-`O` filling.
    pub docstart_columns: Option<Vec<String>>,
}

impl Document {
    pub fn new(doc_index: usize, sentences: Vec<Sentence>) -> Self {
        Document {
            doc_index,
            sentences,
            ..Default::default()
        }
    }

    pub fn token_count(&self) -> usize {
        self.sentences.iter().map(Sentence::len).sum()
    }

    pub fn tokens(&self) -> impl Iterator<Item = &Token> {
        self.sentences.iter().flat_map(|s| s.tokens.iter())
    }
}

/// Column layout of a corpus: total column count and the NER column position.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ColumnLayout {
    pub columns: usize,
    pub ner_column: usize,
}

impl Default for ColumnLayout {
    fn default() -> Self {
        ColumnLayout {
            columns: 2,
            ner_column: 1,
        }
    }
}

impl ColumnLayout {
    /// Number of opaque columns carried by each token.
    pub fn extra_count(&self) -> usize {
        self.columns - 2
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Corpus {
    pub documents: Vec<Document>,
    pub layout: ColumnLayout,
    pub encoding: EncodingScheme,
}

impl Corpus {
    pub fn new(documents: Vec<Document>, encoding: EncodingScheme) -> Self {
        Corpus {
            documents,
            layout: ColumnLayout::default(),
            encoding,
        }
    }

    pub fn token_count(&self) -> usize {
        self.documents.iter().map(Document::token_count).sum()
    }

    pub fn sentence_count(&self) -> usize {
        self.documents.iter().map(|d| d.sentences.len()).sum()
    }

    /// Every mention of the corpus in (document, sentence, start) order.
    pub fn mentions(&self) -> Result<Vec<Mention>, InvalidSequence> {
        let mut out = Vec::new();
        for doc in &self.documents {
            for (si, sentence) in doc.sentences.iter().enumerate() {
                out.extend(extract_mentions(sentence, self.encoding, doc.doc_index, si)?);
            }
        }
        Ok(out)
    }

    /// Renumber `doc_index` consecutively from zero.
    pub fn reindex(&mut self) {
        for (i, doc) in self.documents.iter_mut().enumerate() {
            doc.doc_index = i;
        }
    }
}

/// A typed contiguous token span inside one sentence. `end` is exclusive.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Mention {
    pub doc_index: usize,
    pub sentence_index: usize,
    pub start_token: usize,
    pub end_token: usize,
    pub entity_type: EntityType,
    pub surface: String,
}

impl Mention {
    pub fn len(&self) -> usize {
        self.end_token - self.start_token
    }

    pub fn is_empty(&self) -> bool {
        self.end_token == self.start_token
    }

    pub fn same_span(&self, other: &Mention) -> bool {
        self.doc_index == other.doc_index
            && self.sentence_index == other.sentence_index
            && self.start_token == other.start_token
            && self.end_token == other.end_token
    }

    /// Number of tokens shared with `other` (zero across sentences).
    pub fn overlap(&self, other: &Mention) -> usize {
        if self.doc_index != other.doc_index || self.sentence_index != other.sentence_index {
            return 0;
        }
        let lo = self.start_token.max(other.start_token);
        let hi = self.end_token.min(other.end_token);
        hi.saturating_sub(lo)
    }
}

/// Maximal typed spans of `sentence` under `encoding`, left to right.
pub fn extract_mentions(
    sentence: &Sentence,
    encoding: EncodingScheme,
    doc_index: usize,
    sentence_index: usize,
) -> Result<Vec<Mention>, InvalidSequence> {
    let labels = sentence.labels();
    let spans = encoding::spans(&labels, encoding)?;
    Ok(spans
        .into_iter()
        .map(|span| mention_from_span(sentence, span, doc_index, sentence_index))
        .collect())
}

pub(crate) fn mention_from_span(
    sentence: &Sentence,
    span: Span,
    doc_index: usize,
    sentence_index: usize,
) -> Mention {
    let surface = sentence.tokens[span.start..span.end]
        .iter()
        .map(|t| t.surface.as_str())
        .collect::<Vec<_>>()
        .join(" ");
    Mention {
        doc_index,
        sentence_index,
        start_token: span.start,
        end_token: span.end,
        entity_type: span.entity_type,
        surface,
    }
}
