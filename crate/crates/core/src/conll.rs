//! Reading and writing the CoNLL-03 column format.
//!
//! Files are sequences of lines. A line is blank (sentence separator), a
//! `-DOCSTART-` row (document separator), or a token row of N columns. The
//! first column is the surface form; the NER column defaults to the last one;
//! all other columns are carried verbatim.
//!
//! Output is canonical: single-space separators, LF endings, one blank line
//! after every `-DOCSTART-` row and after every sentence. Parsing a canonical
//! file and serializing it again reproduces it byte for byte.

use std::fmt::Write as _;

use serde::Serialize;
use thiserror::Error;

use crate::encoding::{self, Detection, EncodingScheme, InvalidSequence};
use crate::model::{ColumnLayout, Corpus, Document, Label, LabelError, Sentence, Token, DOCSTART};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error("input is not valid UTF-8: {0}")]
    Utf8(String),
    #[error("line {line}: expected {expected} columns, found {found}")]
    RaggedRow {
        line: usize,
        expected: usize,
        found: usize,
    },
    #[error("line {line}: need at least a surface and a label column")]
    TooFewColumns { line: usize },
    #[error("NER column {ner_column} is out of range for {columns} columns")]
    BadNerColumn { ner_column: usize, columns: usize },
    #[error("line {line}: {source}")]
    BadLabel {
        line: usize,
        #[source]
        source: LabelError,
    },
}

/// How to read the columns of a file. `None` fields are inferred.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ParseOptions {
    /// Zero-based NER column; defaults to the last column.
    pub ner_column: Option<usize>,
    /// Expected column count; defaults to the first token row's count.
    pub expected_columns: Option<usize>,
    /// Declared encoding; defaults to auto-detection.
    pub encoding: Option<EncodingScheme>,
}

/// Position of a token in a corpus, with its source line.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct Location {
    pub doc_index: usize,
    pub sentence_index: usize,
    pub token_index: usize,
    pub source_line: usize,
}

/// An illegal adjacent label pair.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TransitionViolation {
    #[serde(flatten)]
    pub location: Location,
    pub prev_label: Label,
    pub cur_label: Label,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ParseReport {
    pub token_count: usize,
    pub sentence_count: usize,
    pub document_count: usize,
    pub detected_encoding: EncodingScheme,
    pub detection: Detection,
    /// Whether the encoding was declared rather than detected.
    pub declared: bool,
    pub violations: Vec<TransitionViolation>,
    pub notices: Vec<String>,
}

fn split_columns(line: &str) -> Vec<&str> {
    line.split([' ', '\t']).filter(|f| !f.is_empty()).collect()
}

/// Parse a CoNLL byte stream into a corpus and a report.
pub fn parse_corpus(input: &[u8], options: ParseOptions) -> Result<(Corpus, ParseReport), ParseError> {
    let text = std::str::from_utf8(input).map_err(|e| ParseError::Utf8(e.to_string()))?;
    parse_str(text, options)
}

pub fn parse_str(text: &str, options: ParseOptions) -> Result<(Corpus, ParseReport), ParseError> {
    let mut layout: Option<ColumnLayout> = None;
    let mut documents: Vec<Document> = Vec::new();
    let mut raw_docstarts: Vec<Option<Vec<String>>> = Vec::new();
    let mut sentence: Vec<Token> = Vec::new();
    let mut notices = Vec::new();

    fn flush(sentence: &mut Vec<Token>, documents: &mut Vec<Document>, raw: &mut Vec<Option<Vec<String>>>) {
        if sentence.is_empty() {
            return;
        }
        if documents.is_empty() {
            documents.push(Document::new(0, Vec::new()));
            raw.push(None);
        }
        let doc = documents.last_mut().expect("document exists");
        doc.sentences.push(Sentence::new(std::mem::take(sentence)));
    }

    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let fields = split_columns(raw.trim_end_matches('\r'));
        if fields.is_empty() {
            flush(&mut sentence, &mut documents, &mut raw_docstarts);
            continue;
        }
        if fields[0] == DOCSTART {
            flush(&mut sentence, &mut documents, &mut raw_docstarts);
            documents.push(Document::new(documents.len(), Vec::new()));
            raw_docstarts.push(Some(fields[1..].iter().map(|s| s.to_string()).collect()));
            continue;
        }

        let lay = match layout {
            Some(l) => l,
            None => {
                let columns = options.expected_columns.unwrap_or(fields.len());
                if columns < 2 {
                    return Err(ParseError::TooFewColumns { line });
                }
                let ner_column = options.ner_column.unwrap_or(columns - 1);
                if ner_column == 0 || ner_column >= columns {
                    return Err(ParseError::BadNerColumn {
                        ner_column,
                        columns,
                    });
                }
                let l = ColumnLayout {
                    columns,
                    ner_column,
                };
                layout = Some(l);
                l
            }
        };
        if fields.len() != lay.columns {
            return Err(ParseError::RaggedRow {
                line,
                expected: lay.columns,
                found: fields.len(),
            });
        }
        let label: Label = fields[lay.ner_column]
            .parse()
            .map_err(|source| ParseError::BadLabel { line, source })?;
        let extra_columns = fields
            .iter()
            .enumerate()
            .filter(|(c, _)| *c != 0 && *c != lay.ner_column)
            .map(|(_, f)| f.to_string())
            .collect();
        sentence.push(Token {
            surface: fields[0].to_string(),
            extra_columns,
            label,
            source_line: line,
        });
    }
    flush(&mut sentence, &mut documents, &mut raw_docstarts);

    // without token rows, the first -DOCSTART- row gives the width
    let fallback = raw_docstarts
        .iter()
        .flatten()
        .next()
        .map(|cols| cols.len() + 1)
        .filter(|&c| c >= 2);
    let layout = layout.unwrap_or_else(|| match options.expected_columns.or(fallback) {
        Some(columns) if columns >= 2 => ColumnLayout {
            columns,
            ner_column: options.ner_column.filter(|&n| n > 0 && n < columns).unwrap_or(columns - 1),
        },
        _ => ColumnLayout::default(),
    });
    for (doc, raw) in documents.iter_mut().zip(raw_docstarts) {
        doc.docstart_columns = raw.filter(|cols| !is_default_docstart(cols, layout));
    }
    if documents.first().is_some_and(|_| !text.trim_start().starts_with(DOCSTART)) {
        notices.push("file does not start with -DOCSTART-; leading rows form document 0".into());
    }

    let label_rows: Vec<Vec<Label>> = documents
        .iter()
        .flat_map(|d| &d.sentences)
        .map(Sentence::labels)
        .collect();
    let (detected, detection) = encoding::detect(label_rows.iter().map(Vec::as_slice));
    let declared = options.encoding.is_some();
    let scheme = options.encoding.unwrap_or(detected);
    if !declared {
        match detection {
            Detection::Ambiguous => notices.push(
                "encoding is ambiguous (both IOB1 and BIO are consistent); assuming BIO".into(),
            ),
            Detection::Conflicting => notices.push(
                "neither IOB1 nor BIO is consistent with every sentence; assuming BIO".into(),
            ),
            Detection::Clear => {}
        }
    }

    let corpus = Corpus {
        documents,
        layout,
        encoding: scheme,
    };
    let violations = validate_transitions(&corpus, scheme);
    let report = ParseReport {
        token_count: corpus.token_count(),
        sentence_count: corpus.sentence_count(),
        document_count: corpus.documents.len(),
        detected_encoding: scheme,
        detection,
        declared,
        violations,
        notices,
    };
    Ok((corpus, report))
}

fn is_default_docstart(cols: &[String], layout: ColumnLayout) -> bool {
    cols.len() == layout.columns - 1 && cols.iter().all(|c| c == "O")
}

/// Render one token row with the corpus column layout.
pub fn render_row(token: &Token, layout: ColumnLayout) -> String {
    let mut extra = token.extra_columns.iter();
    let mut fields: Vec<String> = Vec::with_capacity(layout.columns);
    fields.push(token.surface.clone());
    for c in 1..layout.columns {
        if c == layout.ner_column {
            fields.push(token.label.to_string());
        } else {
            fields.push(extra.next().cloned().unwrap_or_else(|| "_".to_string()));
        }
    }
    fields.join(" ")
}

fn render_docstart(doc: &Document, layout: ColumnLayout) -> String {
    let mut line = String::from(DOCSTART);
    match &doc.docstart_columns {
        Some(cols) => {
            for c in cols {
                line.push(' ');
                line.push_str(c);
            }
        }
        None => {
            for _ in 1..layout.columns {
                line.push_str(" O");
            }
        }
    }
    line
}

/// Write `corpus` in canonical form, labels as stored.
pub fn write_corpus(corpus: &Corpus) -> String {
    let mut out = String::new();
    for doc in &corpus.documents {
        out.push_str(&render_docstart(doc, corpus.layout));
        out.push_str("\n\n");
        for sentence in &doc.sentences {
            for token in &sentence.tokens {
                let _ = writeln!(out, "{}", render_row(token, corpus.layout));
            }
            out.push('\n');
        }
    }
    out
}

/// Serialize `corpus` with labels in `encoding`, converting if needed.
pub fn serialize_corpus(corpus: &Corpus, encoding: EncodingScheme) -> Result<Vec<u8>, ConvertError> {
    if encoding == corpus.encoding {
        return Ok(write_corpus(corpus).into_bytes());
    }
    let converted = convert_encoding(corpus, corpus.encoding, encoding)?;
    Ok(write_corpus(&converted).into_bytes())
}

/// Every illegal adjacent label pair under `encoding`, in corpus order.
pub fn validate_transitions(corpus: &Corpus, encoding: EncodingScheme) -> Vec<TransitionViolation> {
    let mut out = Vec::new();
    for doc in &corpus.documents {
        for (si, sentence) in doc.sentences.iter().enumerate() {
            out.extend(sentence_violations(sentence, encoding, doc.doc_index, si));
        }
    }
    out
}

pub(crate) fn sentence_violations(
    sentence: &Sentence,
    encoding: EncodingScheme,
    doc_index: usize,
    sentence_index: usize,
) -> Vec<TransitionViolation> {
    let labels = sentence.labels();
    encoding::illegal_positions(&labels, encoding)
        .into_iter()
        .map(|ti| TransitionViolation {
            location: Location {
                doc_index,
                sentence_index,
                token_index: ti,
                source_line: sentence.tokens[ti].source_line,
            },
            prev_label: if ti == 0 {
                Label::Outside
            } else {
                labels[ti - 1].clone()
            },
            cur_label: labels[ti].clone(),
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("document {doc_index}, sentence {sentence_index}: {source}")]
pub struct ConvertError {
    pub doc_index: usize,
    pub sentence_index: usize,
    #[source]
    pub source: InvalidSequence,
}

/// Re-encode every label from `from` to `to`; mention sets are unchanged.
pub fn convert_encoding(
    corpus: &Corpus,
    from: EncodingScheme,
    to: EncodingScheme,
) -> Result<Corpus, ConvertError> {
    let mut out = corpus.clone();
    for doc in &mut out.documents {
        for (si, sentence) in doc.sentences.iter_mut().enumerate() {
            let labels = encoding::convert_labels(&sentence.labels(), from, to).map_err(|source| {
                ConvertError {
                    doc_index: doc.doc_index,
                    sentence_index: si,
                    source,
                }
            })?;
            for (token, label) in sentence.tokens.iter_mut().zip(labels) {
                token.label = label;
            }
        }
    }
    out.encoding = to;
    Ok(out)
}

/// Apply conlleval-style repair to every sentence; returns the number of
/// labels changed.
pub fn repair_conlleval(corpus: &Corpus) -> (Corpus, usize) {
    let mut out = corpus.clone();
    let mut changed = 0;
    for doc in &mut out.documents {
        for sentence in &mut doc.sentences {
            let fixed = encoding::repair_conlleval(&sentence.labels(), corpus.encoding);
            for (token, label) in sentence.tokens.iter_mut().zip(fixed) {
                if token.label != label {
                    token.label = label;
                    changed += 1;
                }
            }
        }
    }
    (out, changed)
}

/// Labels of every sentence converted to BIO. Invalid sentences are first
/// read the way conlleval reads them, so this never fails.
pub fn normalized_bio(corpus: &Corpus) -> Corpus {
    let (repaired, _) = repair_conlleval(corpus);
    convert_encoding(&repaired, repaired.encoding, EncodingScheme::Bio)
        .expect("repaired labels are valid")
}
