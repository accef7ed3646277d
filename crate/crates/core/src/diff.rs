//! Token-label comparison across versions of one corpus.
//!
//! Versions may be retokenized, so tokens are first aligned per document by
//! a longest common subsequence over surface forms. With more than two
//! versions, every version is aligned against the first one and only pivot
//! tokens aligned in all versions form a tuple. Labels are compared on the
//! aligned tuples; unaligned tokens are reported separately.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt::Write as _;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::conll::{self, sentence_violations, ConvertError, TransitionViolation};
use crate::encoding::EncodingScheme;
use crate::metadata::{Domain, Format, MetadataTable};
use crate::model::{Corpus, Label};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DiffError {
    #[error("at least two versions are required, got {0}")]
    TooFewVersions(usize),
    #[error("version {version} has {found} documents, expected {expected}")]
    DocumentCountMismatch {
        version: usize,
        expected: usize,
        found: usize,
    },
}

/// Alignment of one document across versions. Indices are token positions
/// in the document flattened over its sentences.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize)]
pub struct DocAlignment {
    /// One index per version; strictly increasing down the list in every
    /// version.
    pub tuples: Vec<Vec<usize>>,
    /// Per version, the tokens that belong to no tuple.
    pub unaligned: Vec<Vec<usize>>,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize)]
pub struct TokenAlignment {
    pub documents: Vec<DocAlignment>,
}

impl TokenAlignment {
    pub fn tuple_count(&self) -> usize {
        self.documents.iter().map(|d| d.tuples.len()).sum()
    }

    pub fn unaligned_counts(&self) -> Vec<usize> {
        let n = self.documents.first().map_or(0, |d| d.unaligned.len());
        (0..n)
            .map(|v| self.documents.iter().map(|d| d.unaligned[v].len()).sum())
            .collect()
    }
}

/// Longest common subsequence of two token sequences as index pairs.
///
/// Common prefixes and suffixes are matched directly; the remaining middle
/// is solved by dynamic programming, preferring the earliest match.
pub fn lcs_pairs<T: PartialEq>(a: &[T], b: &[T]) -> Vec<(usize, usize)> {
    let prefix = a.iter().zip(b).take_while(|(x, y)| x == y).count();
    let suffix = a[prefix..]
        .iter()
        .rev()
        .zip(b[prefix..].iter().rev())
        .take_while(|(x, y)| x == y)
        .count();
    let (ma, mb) = (&a[prefix..a.len() - suffix], &b[prefix..b.len() - suffix]);

    let mut pairs: Vec<(usize, usize)> = (0..prefix).map(|i| (i, i)).collect();
    if !ma.is_empty() && !mb.is_empty() {
        let (n, m) = (ma.len(), mb.len());
        let w = m + 1;
        // table[i * w + j] = LCS length of ma[i..] and mb[j..]
        let mut table = vec![0u32; (n + 1) * w];
        for i in (0..n).rev() {
            for j in (0..m).rev() {
                table[i * w + j] = if ma[i] == mb[j] {
                    table[(i + 1) * w + j + 1] + 1
                } else {
                    table[(i + 1) * w + j].max(table[i * w + j + 1])
                };
            }
        }
        let (mut i, mut j) = (0, 0);
        while i < n && j < m {
            if ma[i] == mb[j] {
                pairs.push((prefix + i, prefix + j));
                i += 1;
                j += 1;
            } else if table[(i + 1) * w + j] >= table[i * w + j + 1] {
                i += 1;
            } else {
                j += 1;
            }
        }
    }
    let (sa, sb) = (a.len() - suffix, b.len() - suffix);
    pairs.extend((0..suffix).map(|k| (sa + k, sb + k)));
    pairs
}

fn flat_surfaces(corpus: &Corpus, doc: usize) -> Vec<&str> {
    corpus.documents[doc].tokens().map(|t| t.surface.as_str()).collect()
}

/// Order-preserving alignment of all versions, pivoting on the first.
pub fn align(versions: &[&Corpus]) -> Result<TokenAlignment, DiffError> {
    if versions.len() < 2 {
        return Err(DiffError::TooFewVersions(versions.len()));
    }
    let expected = versions[0].documents.len();
    for (v, c) in versions.iter().enumerate().skip(1) {
        if c.documents.len() != expected {
            return Err(DiffError::DocumentCountMismatch {
                version: v,
                expected,
                found: c.documents.len(),
            });
        }
    }

    let mut documents = Vec::with_capacity(expected);
    for d in 0..expected {
        let pivot = flat_surfaces(versions[0], d);
        // pivot index -> index in version v
        let mut maps: Vec<HashMap<usize, usize>> = Vec::new();
        for other in &versions[1..] {
            let surfaces = flat_surfaces(other, d);
            maps.push(lcs_pairs(&pivot, &surfaces).into_iter().collect());
        }
        let mut tuples = Vec::new();
        for p in 0..pivot.len() {
            if maps.iter().all(|m| m.contains_key(&p)) {
                let mut t = vec![p];
                t.extend(maps.iter().map(|m| m[&p]));
                tuples.push(t);
            }
        }
        let unaligned = (0..versions.len())
            .map(|v| {
                let used: HashSet<usize> = tuples.iter().map(|t| t[v]).collect();
                let len = versions[v].documents[d].token_count();
                (0..len).filter(|i| !used.contains(i)).collect()
            })
            .collect();
        documents.push(DocAlignment { tuples, unaligned });
    }
    Ok(TokenAlignment { documents })
}

/// Whether labels are compared as written or after normalizing to BIO.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LabelMode {
    #[default]
    Normalized,
    Raw,
}

/// A position where at least two versions disagree.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DiffRecord {
    /// Location in the first version.
    pub doc_index: usize,
    pub sentence_index: usize,
    pub token_index: usize,
    pub surfaces: Vec<String>,
    pub labels: Vec<Label>,
}

/// Versions prepared for comparison: aligned, with comparable labels.
#[derive(Debug, Clone)]
pub struct Comparison<'a> {
    pub names: Vec<String>,
    versions: Vec<&'a Corpus>,
    /// [version][doc] flat labels used for comparison
    labels: Vec<Vec<Vec<Label>>>,
    /// [version][doc] flat index -> (sentence, token)
    positions: Vec<Vec<Vec<(usize, usize)>>>,
    pub alignment: TokenAlignment,
}

impl<'a> Comparison<'a> {
    pub fn new(versions: &[(&str, &'a Corpus)], mode: LabelMode) -> Result<Self, DiffError> {
        let corpora: Vec<&Corpus> = versions.iter().map(|(_, c)| *c).collect();
        let alignment = align(&corpora)?;
        let labels = corpora
            .iter()
            .map(|c| {
                let normalized;
                let source = match mode {
                    LabelMode::Raw => *c,
                    LabelMode::Normalized => {
                        normalized = conll::normalized_bio(c);
                        &normalized
                    }
                };
                source
                    .documents
                    .iter()
                    .map(|d| d.tokens().map(|t| t.label.clone()).collect())
                    .collect()
            })
            .collect();
        let positions = corpora
            .iter()
            .map(|c| {
                c.documents
                    .iter()
                    .map(|d| {
                        d.sentences
                            .iter()
                            .enumerate()
                            .flat_map(|(si, s)| (0..s.len()).map(move |ti| (si, ti)))
                            .collect()
                    })
                    .collect()
            })
            .collect();
        Ok(Comparison {
            names: versions.iter().map(|(n, _)| n.to_string()).collect(),
            versions: corpora,
            labels,
            positions,
            alignment,
        })
    }

    fn tuple_labels(&self, doc: usize, tuple: &[usize]) -> Vec<&Label> {
        tuple
            .iter()
            .enumerate()
            .map(|(v, &i)| &self.labels[v][doc][i])
            .collect()
    }

    /// Aligned positions where not all versions carry the same label.
    pub fn records(&self) -> Vec<DiffRecord> {
        let mut out = Vec::new();
        for (d, doc) in self.alignment.documents.iter().enumerate() {
            for tuple in &doc.tuples {
                let labels = self.tuple_labels(d, tuple);
                if labels.iter().all(|l| *l == labels[0]) {
                    continue;
                }
                let (si, ti) = self.positions[0][d][tuple[0]];
                let surfaces = tuple
                    .iter()
                    .enumerate()
                    .map(|(v, &i)| {
                        let (s, t) = self.positions[v][d][i];
                        self.versions[v].documents[d].sentences[s].tokens[t].surface.clone()
                    })
                    .collect();
                out.push(DiffRecord {
                    doc_index: self.versions[0].documents[d].doc_index,
                    sentence_index: si,
                    token_index: ti,
                    surfaces,
                    labels: labels.into_iter().cloned().collect(),
                });
            }
        }
        out
    }

    /// Aligned positions where versions `i` and `j` disagree.
    pub fn pair_count(&self, i: usize, j: usize) -> usize {
        self.alignment
            .documents
            .iter()
            .enumerate()
            .map(|(d, doc)| {
                doc.tuples
                    .iter()
                    .filter(|t| self.labels[i][d][t[i]] != self.labels[j][d][t[j]])
                    .count()
            })
            .sum()
    }

    /// Partition of every aligned tuple by its label-equality pattern.
    pub fn agreement(&self) -> AgreementPartition {
        let mut buckets: BTreeMap<Vec<u8>, u64> = BTreeMap::new();
        for (d, doc) in self.alignment.documents.iter().enumerate() {
            for tuple in &doc.tuples {
                let labels = self.tuple_labels(d, tuple);
                *buckets.entry(restricted_growth(&labels)).or_default() += 1;
            }
        }
        AgreementPartition {
            versions: self.names.clone(),
            aligned_tuples: self.alignment.tuple_count() as u64,
            buckets,
        }
    }

    /// Disagreement objects for the review queue, with `window` tokens of
    /// context on each side of the disputed token.
    pub fn disagreements(
        &self,
        records: &[DiffRecord],
        window: usize,
        metadata: Option<&MetadataTable>,
    ) -> Vec<Disagreement> {
        let doc_of: HashMap<usize, usize> = self.versions[0]
            .documents
            .iter()
            .enumerate()
            .map(|(d, doc)| (doc.doc_index, d))
            .collect();
        records
            .iter()
            .map(|r| {
                let d = doc_of[&r.doc_index];
                let pivot_doc = &self.versions[0].documents[d];
                let tuple_of: HashMap<usize, &Vec<usize>> = self.alignment.documents[d]
                    .tuples
                    .iter()
                    .map(|t| (t[0], t))
                    .collect();
                let sentence_start = self.positions[0][d]
                    .iter()
                    .position(|&(s, _)| s == r.sentence_index)
                    .expect("record sentence exists");
                let sentence = &pivot_doc.sentences[r.sentence_index];
                let lo = r.token_index.saturating_sub(window);
                let hi = (r.token_index + window + 1).min(sentence.len());
                let context = (lo..hi)
                    .map(|t| {
                        let flat = sentence_start + t;
                        let mut labels = IndexMap::new();
                        if let Some(tuple) = tuple_of.get(&flat) {
                            for (v, name) in self.names.iter().enumerate() {
                                labels.insert(name.clone(), self.labels[v][d][tuple[v]].to_string());
                            }
                        }
                        ContextToken {
                            surface: sentence.tokens[t].surface.clone(),
                            labels,
                            focus: t == r.token_index,
                        }
                    })
                    .collect();
                let meta = metadata.map(|m| m.get(r.doc_index));
                Disagreement {
                    diff_id: diff_id(r),
                    doc_index: r.doc_index,
                    sentence_index: r.sentence_index,
                    token_index: r.token_index,
                    surface: r.surfaces[0].clone(),
                    labels: self
                        .names
                        .iter()
                        .cloned()
                        .zip(r.labels.iter().map(Label::to_string))
                        .collect(),
                    context,
                    domain: meta.map(|m| m.domain),
                    format: meta.map(|m| m.format),
                }
            })
            .collect()
    }
}

/// Block ids in first-occurrence order, e.g. labels `[x, x, y]` -> `[0, 0, 1]`.
fn restricted_growth<T: PartialEq>(items: &[T]) -> Vec<u8> {
    let mut seen: Vec<&T> = Vec::new();
    items
        .iter()
        .map(|x| match seen.iter().position(|s| *s == x) {
            Some(i) => i as u8,
            None => {
                seen.push(x);
                (seen.len() - 1) as u8
            }
        })
        .collect()
}

/// Result of comparing two versions.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PairDiff {
    pub count: usize,
    pub records: Vec<DiffRecord>,
    /// Unaligned token counts for the two versions.
    pub unaligned: Vec<usize>,
}

/// Number of aligned tokens whose labels differ between `a` and `b`.
pub fn diff_pair(a: &Corpus, b: &Corpus, mode: LabelMode) -> Result<PairDiff, DiffError> {
    let cmp = Comparison::new(&[("a", a), ("b", b)], mode)?;
    let records = cmp.records();
    Ok(PairDiff {
        count: records.len(),
        records,
        unaligned: cmp.alignment.unaligned_counts(),
    })
}

/// Pairwise difference counts; entry `[i][j]` for `i < j`, each pair aligned
/// on its own.
pub fn diff_matrix(versions: &[&Corpus], mode: LabelMode) -> Result<Vec<Vec<Option<usize>>>, DiffError> {
    let n = versions.len();
    let mut out = vec![vec![None; n]; n];
    for i in 0..n {
        for j in i + 1..n {
            out[i][j] = Some(diff_pair(versions[i], versions[j], mode)?.count);
        }
    }
    Ok(out)
}

/// Counts of aligned tuples per label-equality pattern.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AgreementPartition {
    pub versions: Vec<String>,
    pub aligned_tuples: u64,
    /// Keyed by restricted growth string: equal ids mean equal labels.
    pub buckets: BTreeMap<Vec<u8>, u64>,
}

impl AgreementPartition {
    pub fn count(&self, pattern: &[u8]) -> u64 {
        self.buckets.get(pattern).copied().unwrap_or(0)
    }

    pub fn all_agree(&self) -> u64 {
        self.count(&vec![0; self.versions.len()])
    }

    pub fn all_disagree(&self) -> u64 {
        let p: Vec<u8> = (0..self.versions.len() as u8).collect();
        self.count(&p)
    }

    /// Every pattern over the versions, fewest blocks first.
    pub fn patterns(&self) -> Vec<Vec<u8>> {
        let n = self.versions.len();
        let mut all = Vec::new();
        let mut cur = Vec::with_capacity(n);
        fn rec(n: usize, cur: &mut Vec<u8>, all: &mut Vec<Vec<u8>>) {
            if cur.len() == n {
                all.push(cur.clone());
                return;
            }
            let max = cur.iter().copied().max().map_or(0, |m| m + 1);
            for b in 0..=max {
                cur.push(b);
                rec(n, cur, all);
                cur.pop();
            }
        }
        rec(n, &mut cur, &mut all);
        let blocks = |p: &Vec<u8>| p.iter().copied().max().unwrap_or(0);
        // stable: fewest blocks, then the pairs in (A,B), (B,C), (A,C) order
        all.sort_by_key(|p| (blocks(p), pair_rank(p)));
        all
    }

    /// Human-readable pattern, e.g. `A+B | C`.
    pub fn describe(&self, pattern: &[u8]) -> String {
        let blocks = pattern.iter().copied().max().map_or(0, |m| m as usize + 1);
        (0..blocks)
            .map(|b| {
                pattern
                    .iter()
                    .enumerate()
                    .filter(|(_, x)| **x as usize == b)
                    .map(|(v, _)| self.versions[v].as_str())
                    .collect::<Vec<_>>()
                    .join("+")
            })
            .collect::<Vec<_>>()
            .join(" | ")
    }

    pub fn render_text(&self) -> String {
        let mut out = String::new();
        for p in self.patterns() {
            let _ = writeln!(out, "{:<60} {:>8}", self.describe(&p), self.count(&p));
        }
        let _ = writeln!(out, "{:<60} {:>8}", "aligned tokens", self.aligned_tuples);
        out
    }
}

fn pair_rank(p: &[u8]) -> Vec<u8> {
    // for three versions, order {A,B}|C, {B,C}|A, {A,C}|B
    match p {
        [0, 0, 1] => vec![0],
        [0, 1, 1] => vec![1],
        [0, 1, 0] => vec![2],
        other => other.to_vec(),
    }
}

#[derive(Serialize)]
struct BucketView<'a> {
    pattern: String,
    agreeing: Vec<Vec<&'a str>>,
    count: u64,
}

impl Serialize for AgreementPartition {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        #[derive(Serialize)]
        struct View<'a> {
            versions: &'a [String],
            aligned_tuples: u64,
            buckets: Vec<BucketView<'a>>,
        }
        let buckets = self
            .patterns()
            .into_iter()
            .map(|p| {
                let blocks = p.iter().copied().max().map_or(0, |m| m as usize + 1);
                BucketView {
                    pattern: self.describe(&p),
                    agreeing: (0..blocks)
                        .map(|b| {
                            p.iter()
                                .enumerate()
                                .filter(|(_, x)| **x as usize == b)
                                .map(|(v, _)| self.versions[v].as_str())
                                .collect()
                        })
                        .collect(),
                    count: self.count(&p),
                }
            })
            .collect();
        View {
            versions: &self.versions,
            aligned_tuples: self.aligned_tuples,
            buckets,
        }
        .serialize(serializer)
    }
}

/// Label partition of aligned tuples across versions.
pub fn agreement(versions: &[(&str, &Corpus)], mode: LabelMode) -> Result<AgreementPartition, DiffError> {
    Ok(Comparison::new(versions, mode)?.agreement())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContextToken {
    pub surface: String,
    /// Version name -> label, for versions where the token is aligned.
    pub labels: IndexMap<String, String>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub focus: bool,
}

/// One line of the disagreement file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Disagreement {
    pub diff_id: String,
    pub doc_index: usize,
    pub sentence_index: usize,
    pub token_index: usize,
    pub surface: String,
    pub labels: IndexMap<String, String>,
    pub context: Vec<ContextToken>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub domain: Option<Domain>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub format: Option<Format>,
}

/// Content-addressed id: stable across re-exports of the same comparison.
pub fn diff_id(record: &DiffRecord) -> String {
    let mut h = Sha256::new();
    h.update(format!(
        "{}\t{}\t{}\t{}",
        record.doc_index,
        record.sentence_index,
        record.token_index,
        record.surfaces.join("\u{1f}")
    ));
    h.finalize()[..8].iter().map(|b| format!("{b:02x}")).collect()
}

/// JSON lines, one object per item.
pub fn to_jsonl<T: Serialize>(items: &[T]) -> String {
    let mut out = String::new();
    for item in items {
        out.push_str(&serde_json::to_string(item).expect("serializable"));
        out.push('\n');
    }
    out
}

#[derive(Debug, Error)]
#[error("line {line}: {source}")]
pub struct JsonlError {
    pub line: usize,
    #[source]
    pub source: serde_json::Error,
}

pub fn from_jsonl<T: for<'de> Deserialize<'de>>(text: &str) -> Result<Vec<T>, JsonlError> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| serde_json::from_str(l).map_err(|source| JsonlError { line: i + 1, source }))
        .collect()
}

/// A human adjudication of one disagreement.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Decision {
    pub diff_id: String,
    pub chosen_label: Label,
    pub chooser: String,
    /// RFC 3339.
    #[serde(deserialize_with = "rfc3339")]
    pub timestamp: String,
    pub note: Option<String>,
}

fn rfc3339<'de, D: serde::Deserializer<'de>>(d: D) -> Result<String, D::Error> {
    let s = String::deserialize(d)?;
    chrono::DateTime::parse_from_rfc3339(&s).map_err(serde::de::Error::custom)?;
    Ok(s)
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ApplyError {
    #[error("unknown diff_id {0}")]
    UnknownDiffId(String),
    #[error("diff_id {diff_id} points outside the base corpus")]
    BadLocation { diff_id: String },
    #[error("diff_id {diff_id}: expected surface {expected:?}, found {found:?}")]
    SurfaceMismatch {
        diff_id: String,
        expected: String,
        found: String,
    },
    #[error("decisions would create {} invalid transition(s), first at document {}, sentence {}, token {}",
        .0.len(), .0[0].location.doc_index, .0[0].location.sentence_index, .0[0].location.token_index)]
    WouldCreateInvalidTransition(Vec<TransitionViolation>),
    #[error(transparent)]
    Encoding(#[from] ConvertError),
}

/// Replace the decided labels in `base`, the corpus the disagreements were
/// located in. Later decisions for the same id win. Decided labels are BIO.
pub fn apply_decisions(
    base: &Corpus,
    decisions: &[Decision],
    disagreements: &[Disagreement],
) -> Result<Corpus, ApplyError> {
    let by_id: HashMap<&str, &Disagreement> =
        disagreements.iter().map(|d| (d.diff_id.as_str(), d)).collect();
    let mut latest: IndexMap<&str, &Decision> = IndexMap::new();
    for dec in decisions {
        if !by_id.contains_key(dec.diff_id.as_str()) {
            return Err(ApplyError::UnknownDiffId(dec.diff_id.clone()));
        }
        latest.insert(dec.diff_id.as_str(), dec);
    }
    if latest.is_empty() {
        return Ok(base.clone());
    }

    let mut work = if base.encoding == EncodingScheme::Bio {
        base.clone()
    } else {
        conll::convert_encoding(base, base.encoding, EncodingScheme::Bio)?
    };
    let doc_of: HashMap<usize, usize> = work
        .documents
        .iter()
        .enumerate()
        .map(|(i, d)| (d.doc_index, i))
        .collect();

    let mut touched: BTreeMap<(usize, usize), Vec<TransitionViolation>> = BTreeMap::new();
    for (id, dec) in &latest {
        let dis = by_id[id];
        let bad = || ApplyError::BadLocation {
            diff_id: id.to_string(),
        };
        let d = *doc_of.get(&dis.doc_index).ok_or_else(bad)?;
        let doc = &mut work.documents[d];
        let sentence = doc.sentences.get_mut(dis.sentence_index).ok_or_else(bad)?;
        if !touched.contains_key(&(d, dis.sentence_index)) {
            let before = sentence_violations(sentence, EncodingScheme::Bio, dis.doc_index, dis.sentence_index);
            touched.insert((d, dis.sentence_index), before);
        }
        let token = sentence.tokens.get_mut(dis.token_index).ok_or_else(bad)?;
        if token.surface != dis.surface {
            return Err(ApplyError::SurfaceMismatch {
                diff_id: id.to_string(),
                expected: dis.surface.clone(),
                found: token.surface.clone(),
            });
        }
        token.label = dec.chosen_label.clone();
    }

    let mut created = Vec::new();
    for ((d, s), before) in &touched {
        let doc = &work.documents[*d];
        let after = sentence_violations(&doc.sentences[*s], EncodingScheme::Bio, doc.doc_index, *s);
        created.extend(after.into_iter().filter(|v| !before.contains(v)));
    }
    if !created.is_empty() {
        return Err(ApplyError::WouldCreateInvalidTransition(created));
    }

    if base.encoding != EncodingScheme::Bio {
        work = conll::convert_encoding(&work, EncodingScheme::Bio, base.encoding)?;
    }
    Ok(work)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::conll::{parse_str, write_corpus, ParseOptions};
    use crate::model::{Document, Sentence, Token};

    fn corpus(sentences: &[&[(&str, &str)]]) -> Corpus {
        Corpus::new(
            vec![Document::new(
                0,
                sentences
                    .iter()
                    .map(|rows| {
                        Sentence::new(
                            rows.iter()
                                .map(|(s, l)| Token::new(*s, l.parse::<Label>().unwrap()))
                                .collect(),
                        )
                    })
                    .collect(),
            )],
            EncodingScheme::Bio,
        )
    }

    #[test]
    fn lcs_basic() {
        assert_eq!(lcs_pairs(&["a", "b", "c"], &["a", "b", "c"]), vec![(0, 0), (1, 1), (2, 2)]);
        assert_eq!(lcs_pairs(&["a", "x", "c"], &["a", "y", "c"]), vec![(0, 0), (2, 2)]);
        assert_eq!(lcs_pairs::<&str>(&[], &["a"]), vec![]);
        assert_eq!(
            lcs_pairs(&["x", "JosepGuardiola", "y"], &["x", "Josep", "Guardiola", "y"]),
            vec![(0, 0), (2, 3)]
        );
        assert_eq!(lcs_pairs(&["b", "a", "c"], &["a", "b", "c"]).len(), 2);
    }

    #[test]
    fn identical_versions_align_one_for_one() {
        let a = corpus(&[&[("a", "O"), ("b", "B-PER")], &[("c", "O")]]);
        let al = align(&[&a, &a]).unwrap();
        assert_eq!(al.tuple_count(), 3);
        assert_eq!(al.unaligned_counts(), vec![0, 0]);
        assert_eq!(diff_pair(&a, &a, LabelMode::Normalized).unwrap().count, 0);
    }

    #[test]
    fn split_token_is_unaligned_on_both_sides() {
        let a = corpus(&[&[("coach", "O"), ("JosepGuardiola", "B-PER"), ("said", "O")]]);
        let b = corpus(&[&[("coach", "O"), ("Josep", "B-PER"), ("Guardiola", "I-PER"), ("said", "O")]]);
        let al = align(&[&a, &b]).unwrap();
        assert_eq!(al.documents[0].tuples, vec![vec![0, 0], vec![2, 3]]);
        assert_eq!(al.documents[0].unaligned, vec![vec![1], vec![1, 2]]);
    }

    #[test]
    fn document_counts_must_match() {
        let a = corpus(&[&[("a", "O")]]);
        let mut b = a.clone();
        b.documents.push(Document::new(1, vec![]));
        assert_eq!(
            align(&[&a, &b]).unwrap_err(),
            DiffError::DocumentCountMismatch {
                version: 1,
                expected: 1,
                found: 2
            }
        );
        assert_eq!(align(&[&a]).unwrap_err(), DiffError::TooFewVersions(1));
    }

    #[test]
    fn three_changed_labels() {
        let a = corpus(&[&[("Tasmania", "B-LOC"), ("beat", "O"), ("Victoria", "B-LOC"), ("in", "O"), ("Hobart", "B-LOC")]]);
        let b = corpus(&[&[("Tasmania", "B-ORG"), ("beat", "O"), ("Victoria", "B-ORG"), ("in", "B-MISC"), ("Hobart", "B-LOC")]]);
        let d = diff_pair(&a, &b, LabelMode::Normalized).unwrap();
        assert_eq!(d.count, 3);
        assert_eq!(diff_pair(&b, &a, LabelMode::Normalized).unwrap().count, 3);
        assert_eq!(d.records[0].surfaces, vec!["Tasmania", "Tasmania"]);
        assert_eq!(d.records[0].labels[1].to_string(), "B-ORG");
    }

    #[test]
    fn encoding_differences_are_not_disagreements() {
        let (iob1, _) = parse_str("U.N. I-ORG\nofficial O\n", ParseOptions::default()).unwrap();
        let (bio, _) = parse_str("U.N. B-ORG\nofficial O\n", ParseOptions::default()).unwrap();
        assert_eq!(iob1.encoding, EncodingScheme::Iob1);
        assert_eq!(diff_pair(&iob1, &bio, LabelMode::Normalized).unwrap().count, 0);
        assert_eq!(diff_pair(&iob1, &bio, LabelMode::Raw).unwrap().count, 1);
    }

    #[test]
    fn agreement_buckets_hand_computed() {
        // 10 tokens; patterns chosen per position
        let words = ["t0", "t1", "t2", "t3", "t4", "t5", "t6", "t7", "t8", "t9"];
        let a = ["O", "B-LOC", "B-ORG", "B-PER", "O", "O", "B-LOC", "O", "B-MISC", "O"];
        let b = ["O", "B-LOC", "B-ORG", "B-LOC", "O", "B-ORG", "B-ORG", "O", "B-MISC", "O"];
        let c = ["O", "B-LOC", "B-LOC", "B-ORG", "O", "B-ORG", "B-LOC", "O", "O", "O"];
        let mk = |labels: &[&str; 10]| {
            let rows: Vec<(&str, &str)> = words.iter().copied().zip(labels.iter().copied()).collect();
            corpus(&[&rows])
        };
        let (ca, cb, cc) = (mk(&a), mk(&b), mk(&c));
        let p = agreement(&[("A", &ca), ("B", &cb), ("C", &cc)], LabelMode::Normalized).unwrap();
        // position-by-position:
        // 0 agree, 1 agree, 2 AB|C, 3 all differ, 4 agree, 5 BC|A, 6 AC|B, 7 agree, 8 AB|C, 9 agree
        assert_eq!(p.all_agree(), 5);
        assert_eq!(p.all_disagree(), 1);
        assert_eq!(p.count(&[0, 0, 1]), 2);
        assert_eq!(p.count(&[0, 1, 1]), 1);
        assert_eq!(p.count(&[0, 1, 0]), 1);
        assert_eq!(p.buckets.values().sum::<u64>(), p.aligned_tuples);
        assert_eq!(p.describe(&[0, 0, 1]), "A+B | C");
        let order: Vec<String> = p.patterns().iter().map(|x| p.describe(x)).collect();
        assert_eq!(order, vec!["A+B+C", "A+B | C", "A | B+C", "A+C | B", "A | B | C"]);
    }

    #[test]
    fn identical_triple_all_agree() {
        let a = corpus(&[&[("a", "B-PER"), ("b", "O")]]);
        let p = agreement(&[("A", &a), ("B", &a), ("C", &a)], LabelMode::Normalized).unwrap();
        assert_eq!(p.all_agree(), 2);
        assert_eq!(p.aligned_tuples, 2);
        assert_eq!(p.buckets.len(), 1);
    }

    fn tasmania() -> (Corpus, Corpus) {
        let a = corpus(&[&[
            ("Tasmania", "B-LOC"),
            ("beat", "O"),
            ("Victoria", "B-ORG"),
            ("by", "O"),
            ("five", "O"),
            ("wickets", "O"),
        ]]);
        let b = corpus(&[&[
            ("Tasmania", "B-ORG"),
            ("beat", "O"),
            ("Victoria", "B-ORG"),
            ("by", "O"),
            ("five", "O"),
            ("wickets", "O"),
        ]]);
        (a, b)
    }

    #[test]
    fn export_shows_both_candidates() {
        let (a, b) = tasmania();
        let cmp = Comparison::new(&[("reconll", &a), ("conllpp", &b)], LabelMode::Normalized).unwrap();
        let recs = cmp.records();
        let items = cmp.disagreements(&recs, 2, None);
        assert_eq!(items.len(), 1);
        let item = &items[0];
        assert_eq!(item.surface, "Tasmania");
        assert_eq!(item.labels["reconll"], "B-LOC");
        assert_eq!(item.labels["conllpp"], "B-ORG");
        assert_eq!(item.context.len(), 3);
        assert!(item.context[0].focus);
        assert!(item.context.len() <= 5);
        assert_eq!(item.diff_id.len(), 16);

        let line = to_jsonl(&items);
        assert!(line.starts_with("{\"diff_id\":"));
        assert_eq!(from_jsonl::<Disagreement>(&line).unwrap(), items);
        assert_eq!(to_jsonl::<Disagreement>(&[]), "");
        // ids are stable across regeneration
        assert_eq!(cmp.disagreements(&cmp.records(), 2, None)[0].diff_id, item.diff_id);
    }

    #[test]
    fn window_is_bounded() {
        let (a, mut b) = tasmania();
        b.documents[0].sentences[0].tokens[4].label = Label::begin("MISC").unwrap();
        let cmp = Comparison::new(&[("a", &a), ("b", &b)], LabelMode::Normalized).unwrap();
        let items = cmp.disagreements(&cmp.records(), 2, None);
        // clipped at the sentence end
        assert_eq!(items[1].context.len(), 4);
        assert_eq!(items[1].context[2].surface, "five");
        let wide = cmp.disagreements(&cmp.records(), 1, None);
        assert_eq!(wide[1].context.len(), 3);
        assert!(items[1].context[2].focus);
    }

    fn decision(id: &str, label: &str) -> Decision {
        Decision {
            diff_id: id.to_string(),
            chosen_label: label.parse().unwrap(),
            chooser: "adjudicator".into(),
            timestamp: "2024-01-01T00:00:00Z".into(),
            note: None,
        }
    }

    #[test]
    fn apply_single_decision() {
        let (a, b) = tasmania();
        let cmp = Comparison::new(&[("a", &a), ("b", &b)], LabelMode::Normalized).unwrap();
        let items = cmp.disagreements(&cmp.records(), 2, None);

        assert_eq!(apply_decisions(&a, &[], &items).unwrap(), a);

        let out = apply_decisions(&a, &[decision(&items[0].diff_id, "B-ORG")], &items).unwrap();
        let before = write_corpus(&a);
        let after = write_corpus(&out);
        let changed: Vec<_> = before.lines().zip(after.lines()).filter(|(x, y)| x != y).collect();
        assert_eq!(changed, vec![("Tasmania B-LOC", "Tasmania B-ORG")]);

        // idempotent
        let twice = apply_decisions(&out, &[decision(&items[0].diff_id, "B-ORG")], &items).unwrap();
        assert_eq!(twice, out);
    }

    #[test]
    fn apply_rejects_bad_decisions() {
        let (a, b) = tasmania();
        let cmp = Comparison::new(&[("a", &a), ("b", &b)], LabelMode::Normalized).unwrap();
        let items = cmp.disagreements(&cmp.records(), 2, None);
        assert_eq!(
            apply_decisions(&a, &[decision("nope", "O")], &items).unwrap_err(),
            ApplyError::UnknownDiffId("nope".into())
        );
        match apply_decisions(&a, &[decision(&items[0].diff_id, "I-PER")], &items) {
            Err(ApplyError::WouldCreateInvalidTransition(v)) => {
                assert_eq!(v.len(), 1);
                assert_eq!(v[0].prev_label, Label::Outside);
                assert_eq!(v[0].cur_label.to_string(), "I-PER");
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn decision_timestamps_are_validated() {
        let ok = r#"{"diff_id":"x","chosen_label":"B-ORG","chooser":"me","timestamp":"2024-05-01T10:00:00+02:00","note":null}"#;
        let bad = r#"{"diff_id":"x","chosen_label":"B-ORG","chooser":"me","timestamp":"yesterday","note":null}"#;
        assert!(from_jsonl::<Decision>(ok).is_ok());
        assert!(from_jsonl::<Decision>(bad).is_err());
        let d: Vec<Decision> = from_jsonl(ok).unwrap();
        assert_eq!(to_jsonl(&d).trim_end(), ok);
    }
}
