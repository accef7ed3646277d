use std::collections::{BTreeSet, HashSet};

use ner_audit::conll::{self, parse_str, write_corpus, ParseOptions};
use ner_audit::diff::{align, diff_pair, lcs_pairs, LabelMode};
use ner_audit::model::ColumnLayout;
use ner_audit::repair::{apply_patch, RepairOp};
use ner_audit::scoring::{score, score_stratified, seen_unseen_recall, SeenOptions};
use ner_audit::taxonomy::{classify_errors, Category};
use ner_audit::{
    validate_transitions, Corpus, DocMetadata, Document, Domain, EncodingScheme, Format, Label, MetadataTable,
    Sentence, Token,
};
use proptest::prelude::*;

const TYPES: [&str; 4] = ["PER", "ORG", "LOC", "MISC"];
const WORDS: [&str; 8] = ["Chelsea", "2", "Zürich", "U.N.", "the", "said", "Paris", "FC"];

/// A sentence as token count plus non-overlapping spans `(start, end, type)`.
#[derive(Debug, Clone)]
struct SpanSentence {
    len: usize,
    spans: Vec<(usize, usize, usize)>,
}

fn span_sentence(max_len: usize) -> impl Strategy<Value = SpanSentence> {
    (1..=max_len, prop::collection::vec((0..3usize, 1..4usize, 0..4usize), 0..6)).prop_map(|(len, segs)| {
        let mut spans = Vec::new();
        let mut pos = 0;
        for (gap, width, ty) in segs {
            let start = pos + gap;
            let end = (start + width).min(len);
            if start >= end {
                break;
            }
            spans.push((start, end, ty));
            pos = end;
        }
        SpanSentence { len, spans }
    })
}

/// Reference BIO encoder: B on the first token of a span, I on the rest.
fn bio(s: &SpanSentence) -> Vec<String> {
    let mut out = vec!["O".to_string(); s.len];
    for &(a, b, t) in &s.spans {
        out[a] = format!("B-{}", TYPES[t]);
        for x in out.iter_mut().take(b).skip(a + 1) {
            *x = format!("I-{}", TYPES[t]);
        }
    }
    out
}

/// Reference IOB1 encoder: I everywhere, B only to separate touching
/// same-type spans.
fn iob1(s: &SpanSentence) -> Vec<String> {
    let mut out = vec!["O".to_string(); s.len];
    let mut prev: Option<(usize, usize)> = None;
    for &(a, b, t) in &s.spans {
        for x in out.iter_mut().take(b).skip(a) {
            *x = format!("I-{}", TYPES[t]);
        }
        if prev == Some((a, t)) {
            out[a] = format!("B-{}", TYPES[t]);
        }
        prev = Some((b, t));
    }
    out
}

fn build(docs: &[Vec<SpanSentence>], words: &[Vec<Vec<usize>>], encode: fn(&SpanSentence) -> Vec<String>, scheme: EncodingScheme) -> Corpus {
    let documents = docs
        .iter()
        .enumerate()
        .map(|(d, sentences)| {
            let sentences = sentences
                .iter()
                .enumerate()
                .map(|(s, ss)| {
                    let labels = encode(ss);
                    Sentence::new(
                        labels
                            .iter()
                            .enumerate()
                            .map(|(t, l)| {
                                let w = words
                                    .get(d)
                                    .and_then(|x| x.get(s))
                                    .and_then(|x| x.get(t))
                                    .map_or("tok", |&i| WORDS[i % WORDS.len()]);
                                Token::new(w, l.parse::<Label>().unwrap())
                            })
                            .collect(),
                    )
                })
                .collect();
            Document::new(d, sentences)
        })
        .collect();
    Corpus::new(documents, scheme)
}

fn corpus_shape() -> impl Strategy<Value = Vec<Vec<SpanSentence>>> {
    prop::collection::vec(prop::collection::vec(span_sentence(10), 0..4), 1..4)
}

fn word_ids() -> impl Strategy<Value = Vec<Vec<Vec<usize>>>> {
    prop::collection::vec(prop::collection::vec(prop::collection::vec(0..8usize, 10), 4), 4)
}

/// Mention keys `(doc, sentence, start, end, type)` straight from the spans.
fn span_set(docs: &[Vec<SpanSentence>]) -> BTreeSet<(usize, usize, usize, usize, &'static str)> {
    let mut out = BTreeSet::new();
    for (d, sentences) in docs.iter().enumerate() {
        for (s, ss) in sentences.iter().enumerate() {
            for &(a, b, t) in &ss.spans {
                out.insert((d, s, a, b, TYPES[t]));
            }
        }
    }
    out
}

fn mention_set(c: &Corpus) -> BTreeSet<(usize, usize, usize, usize, String)> {
    c.mentions()
        .unwrap()
        .into_iter()
        .map(|m| (m.doc_index, m.sentence_index, m.start_token, m.end_token, m.entity_type.to_string()))
        .collect()
}

/// Pred shape paired to a gold shape: same token counts, independent spans.
fn paired_shapes() -> impl Strategy<Value = (Vec<Vec<SpanSentence>>, Vec<Vec<SpanSentence>>)> {
    corpus_shape().prop_flat_map(|gold| {
        let pred = gold
            .iter()
            .map(|doc| {
                doc.iter()
                    .map(|s| {
                        let len = s.len;
                        span_sentence(len).prop_map(move |mut p| {
                            p.len = len;
                            p.spans.retain(|&(_, e, _)| e <= len);
                            p
                        })
                    })
                    .collect::<Vec<_>>()
            })
            .collect::<Vec<_>>();
        (Just(gold), pred)
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn write_then_parse_is_identity(shape in corpus_shape(), words in word_ids(), extra in 0..3usize) {
        let mut c = build(&shape, &words, bio, EncodingScheme::Bio);
        c.layout = ColumnLayout { columns: extra + 2, ner_column: extra + 1 };
        for doc in &mut c.documents {
            for s in &mut doc.sentences {
                for (i, t) in s.tokens.iter_mut().enumerate() {
                    t.extra_columns = (0..extra).map(|k| format!("C{k}{i}")).collect();
                }
            }
        }
        let text = write_corpus(&c);
        let (back, report) = parse_str(&text, ParseOptions::default()).unwrap();
        prop_assert_eq!(report.detected_encoding, EncodingScheme::Bio);
        prop_assert_eq!(&back, &c);
        prop_assert_eq!(write_corpus(&back), text);
    }

    #[test]
    fn conversion_preserves_mentions(shape in corpus_shape(), words in word_ids()) {
        let b = build(&shape, &words, bio, EncodingScheme::Bio);
        let i = build(&shape, &words, iob1, EncodingScheme::Iob1);
        let expected: BTreeSet<_> = span_set(&shape).into_iter().map(|(d, s, a, e, t)| (d, s, a, e, t.to_string())).collect();
        prop_assert_eq!(mention_set(&b), expected.clone());
        prop_assert_eq!(mention_set(&i), expected.clone());

        let to_iob1 = conll::convert_encoding(&b, EncodingScheme::Bio, EncodingScheme::Iob1).unwrap();
        let to_bio = conll::convert_encoding(&i, EncodingScheme::Iob1, EncodingScheme::Bio).unwrap();
        prop_assert_eq!(&to_iob1, &i);
        prop_assert_eq!(&to_bio, &b);
        prop_assert!(validate_transitions(&to_iob1, EncodingScheme::Iob1).is_empty());
        prop_assert!(validate_transitions(&to_bio, EncodingScheme::Bio).is_empty());
    }

    #[test]
    fn score_matches_set_oracle((gold, pred) in paired_shapes(), words in word_ids()) {
        let g = build(&gold, &words, bio, EncodingScheme::Bio);
        let p = build(&pred, &words, bio, EncodingScheme::Bio);
        let gs = span_set(&gold);
        let ps = span_set(&pred);
        let tp = gs.intersection(&ps).count() as u64;
        let r = score(&g, &p).unwrap();
        prop_assert_eq!(r.counts.tp, tp);
        prop_assert_eq!(r.counts.fp, ps.len() as u64 - tp);
        prop_assert_eq!(r.counts.fn_, gs.len() as u64 - tp);
    }

    #[test]
    fn taxonomy_partitions_non_exact_mentions((gold, pred) in paired_shapes(), words in word_ids()) {
        let g = build(&gold, &words, bio, EncodingScheme::Bio);
        let p = build(&pred, &words, bio, EncodingScheme::Bio);
        let r = score(&g, &p).unwrap();
        let records = classify_errors(&g, &p).unwrap();
        let count = |c: Category| records.iter().filter(|x| x.category == c).count() as u64;
        let (missed, spurious, be, te) = (count(Category::Missed), count(Category::Spurious), count(Category::BoundaryError), count(Category::TypeError));
        prop_assert_eq!(missed + be + te, r.counts.fn_);
        prop_assert_eq!(spurious + be + te, r.counts.fp);

        let gs = span_set(&gold);
        let ps = span_set(&pred);
        let mut seen_gold = HashSet::new();
        let mut seen_pred = HashSet::new();
        for rec in &records {
            if let Some(m) = &rec.gold {
                let key = (m.doc_index, m.sentence_index, m.start_token, m.end_token, m.entity_type.to_string());
                prop_assert!(!ps.iter().any(|x| (x.0, x.1, x.2, x.3, x.4.to_string()) == key));
                prop_assert!(seen_gold.insert(key));
            }
            if let Some(m) = &rec.pred {
                let key = (m.doc_index, m.sentence_index, m.start_token, m.end_token, m.entity_type.to_string());
                prop_assert!(!gs.iter().any(|x| (x.0, x.1, x.2, x.3, x.4.to_string()) == key));
                prop_assert!(seen_pred.insert(key));
            }
            match rec.category {
                Category::Missed => prop_assert!(rec.gold.is_some() && rec.pred.is_none()),
                Category::Spurious => prop_assert!(rec.gold.is_none() && rec.pred.is_some()),
                Category::TypeError => {
                    let (a, b) = (rec.gold.as_ref().unwrap(), rec.pred.as_ref().unwrap());
                    prop_assert!(a.same_span(b) && a.entity_type != b.entity_type);
                    prop_assert!(rec.confusion.is_some());
                }
                Category::BoundaryError => {
                    let (a, b) = (rec.gold.as_ref().unwrap(), rec.pred.as_ref().unwrap());
                    prop_assert!(!a.same_span(b) && a.overlap(b) > 0);
                }
            }
        }
        prop_assert_eq!(seen_gold.len() as u64, r.counts.fn_);
        prop_assert_eq!(seen_pred.len() as u64, r.counts.fp);
    }

    #[test]
    fn strata_decompose_the_global_score((gold, pred) in paired_shapes(), words in word_ids(), cells in prop::collection::vec((0..4usize, 0..4usize), 4)) {
        let g = build(&gold, &words, bio, EncodingScheme::Bio);
        let p = build(&pred, &words, bio, EncodingScheme::Bio);
        let mut meta = MetadataTable::new();
        // the last document is left without metadata on purpose
        for d in 0..g.documents.len().saturating_sub(1) {
            let (di, fi) = cells[d];
            meta.insert(d, DocMetadata::new(Domain::ALL[di], Format::ALL[fi]));
        }
        let strat = score_stratified(&g, &p, &meta).unwrap();
        let plain = score(&g, &p).unwrap();
        prop_assert_eq!(strat.global().counts, plain.counts);

        let mut total = ner_audit::scoring::Counts::default();
        for cell in strat.cells() {
            total.add(&cell.counts);
        }
        prop_assert_eq!(total, plain.counts);

        // each domain marginal equals scoring only that domain's documents
        for domain in Domain::ALL {
            let keep = |c: &Corpus| {
                let mut c = c.clone();
                c.documents.retain(|d| meta.get(d.doc_index).domain == domain);
                c
            };
            let expected = score(&keep(&g), &keep(&p)).unwrap().counts;
            let got = strat.get(Some(domain), None).map(|r| r.counts).unwrap_or_default();
            prop_assert_eq!(got, expected);
        }
    }

    #[test]
    fn seen_and_unseen_partition_recall((gold, pred) in paired_shapes(), words in word_ids(), train_shape in corpus_shape(), train_words in word_ids()) {
        let g = build(&gold, &words, bio, EncodingScheme::Bio);
        let p = build(&pred, &words, bio, EncodingScheme::Bio);
        let t = build(&train_shape, &train_words, bio, EncodingScheme::Bio);
        let plain = score(&g, &p).unwrap().counts;
        for options in [SeenOptions::default(), SeenOptions { case_sensitive: false, type_aware: true }] {
            let split = seen_unseen_recall(&g, &p, &t, options).unwrap();
            prop_assert_eq!(split.seen_gold_count + split.unseen_gold_count, plain.gold());
            prop_assert_eq!(split.seen_tp + split.unseen_tp, plain.tp);
            prop_assert_eq!(split.overall_recall, plain.recall());
        }
        // training on the test gold makes every mention seen
        let all_seen = seen_unseen_recall(&g, &p, &g, SeenOptions::default()).unwrap();
        prop_assert_eq!(all_seen.unseen_gold_count, 0);
    }

    #[test]
    fn diff_is_symmetric_and_counts_changed_labels((a, b) in paired_shapes(), words in word_ids()) {
        let ca = build(&a, &words, bio, EncodingScheme::Bio);
        let cb = build(&b, &words, bio, EncodingScheme::Bio);
        let expected: usize = ca.documents.iter().zip(&cb.documents)
            .map(|(x, y)| x.tokens().zip(y.tokens()).filter(|(s, t)| s.label != t.label).count())
            .sum();
        let ab = diff_pair(&ca, &cb, LabelMode::Normalized).unwrap();
        prop_assert_eq!(ab.count, expected);
        prop_assert_eq!(diff_pair(&cb, &ca, LabelMode::Normalized).unwrap().count, expected);
        prop_assert_eq!(diff_pair(&ca, &ca, LabelMode::Normalized).unwrap().count, 0);
        prop_assert_eq!(ab.unaligned.clone(), vec![0, 0]);

        // encoding of either side does not matter
        let ia = build(&a, &words, iob1, EncodingScheme::Iob1);
        prop_assert_eq!(diff_pair(&ia, &cb, LabelMode::Normalized).unwrap().count, expected);
    }

    #[test]
    fn lcs_matches_reference_length(a in prop::collection::vec(0..4u8, 0..30), b in prop::collection::vec(0..4u8, 0..30)) {
        let pairs = lcs_pairs(&a, &b);
        // reference: textbook O(nm) table
        let mut t = vec![vec![0usize; b.len() + 1]; a.len() + 1];
        for i in 0..a.len() {
            for j in 0..b.len() {
                t[i + 1][j + 1] = if a[i] == b[j] { t[i][j] + 1 } else { t[i][j + 1].max(t[i + 1][j]) };
            }
        }
        prop_assert_eq!(pairs.len(), t[a.len()][b.len()]);
        for w in pairs.windows(2) {
            prop_assert!(w[0].0 < w[1].0 && w[0].1 < w[1].1);
        }
        for &(i, j) in &pairs {
            prop_assert_eq!(a[i], b[j]);
        }
    }

    #[test]
    fn alignment_covers_every_token_once(shape in corpus_shape(), words in word_ids(), edit in any::<prop::sample::Index>(), drop_tok in any::<prop::sample::Index>()) {
        let a = build(&shape, &words, bio, EncodingScheme::Bio);
        let mut b = a.clone();
        let mut c = a.clone();
        let n = a.token_count();
        if n > 0 {
            // one surface edit in b, one dropped token in c
            let target = edit.index(n);
            let mut k = 0;
            for doc in &mut b.documents {
                for s in &mut doc.sentences {
                    for t in &mut s.tokens {
                        if k == target {
                            t.surface = "EDITED".into();
                        }
                        k += 1;
                    }
                }
            }
            let target = drop_tok.index(n);
            let mut k = 0;
            for doc in &mut c.documents {
                for s in &mut doc.sentences {
                    s.tokens.retain(|_| { let keep = k != target; k += 1; keep });
                }
            }
        }
        let one = align(&[&a, &b]).unwrap();
        prop_assert_eq!(one.unaligned_counts(), if n > 0 { vec![1, 1] } else { vec![0, 0] });

        let al = align(&[&a, &b, &c]).unwrap();
        for (d, doc) in al.documents.iter().enumerate() {
            let sizes = [a.documents[d].token_count(), b.documents[d].token_count(), c.documents[d].token_count()];
            for w in doc.tuples.windows(2) {
                for v in 0..3 {
                    prop_assert!(w[0][v] < w[1][v]);
                }
            }
            for v in 0..3 {
                let mut all: Vec<usize> = doc.tuples.iter().map(|t| t[v]).chain(doc.unaligned[v].iter().copied()).collect();
                all.sort_unstable();
                prop_assert_eq!(all, (0..sizes[v]).collect::<Vec<_>>());
            }
        }
    }

    #[test]
    fn patch_changes_counts_by_the_analytic_delta(shape in corpus_shape(), words in word_ids(), picks in prop::collection::vec((any::<prop::sample::Index>(), 0..4u8), 0..8)) {
        let c = build(&shape, &words, bio, EncodingScheme::Bio);
        let locations: Vec<(usize, usize, usize)> = c.documents.iter().enumerate()
            .flat_map(|(d, doc)| doc.sentences.iter().enumerate()
                .flat_map(move |(s, sen)| (0..sen.len()).map(move |t| (d, s, t))))
            .collect();
        prop_assume!(!locations.is_empty());

        let mut used = HashSet::new();
        let mut patch = Vec::new();
        let mut tokens = 0i64;
        let mut sentences = 0i64;
        for (idx, kind) in picks {
            let (d, s, t) = locations[idx.index(locations.len())];
            let sentence = &c.documents[d].sentences[s];
            let token = &sentence.tokens[t];
            let text = sentence.tokens.iter().map(|x| x.surface.as_str()).collect::<Vec<_>>().join(" ");
            match kind {
                // token split into one piece per character
                0 if token.surface.chars().count() >= 2 && used.insert((d, s, Some(t))) => {
                    let parts: Vec<String> = token.surface.chars().map(String::from).collect();
                    let labels = (0..parts.len()).map(|i| match (&token.label, i) {
                        (Label::Begin(x), i) if i > 0 => Label::Inside(x.clone()),
                        (l, _) => l.clone(),
                    }).collect();
                    tokens += parts.len() as i64 - 1;
                    patch.push(RepairOp::token_split(d, s, t, parts, labels).expecting(token.surface.clone()));
                }
                // split before a token that can start a sentence
                1 if t > 0 && !matches!(token.label, Label::Inside(_)) && used.insert((d, s, None)) => {
                    sentences += 1;
                    patch.push(RepairOp::sentence_split(d, s, t).expecting(text));
                }
                2 if s + 1 < c.documents[d].sentences.len() && used.insert((d, s, None)) && used.insert((d, s + 1, None)) => {
                    sentences -= 1;
                    patch.push(RepairOp::sentence_merge(d, s).expecting(text));
                }
                3 if token.label.is_outside()
                    && !matches!(sentence.tokens.get(t + 1).map(|x| &x.label), Some(Label::Inside(_)))
                    && used.insert((d, s, Some(t))) => {
                    patch.push(RepairOp::label_fix(d, s, t, Label::begin("MISC").unwrap()));
                }
                _ => {}
            }
        }
        let (out, stats) = apply_patch(&c, &patch).unwrap_or_else(|e| panic!("{e:?} {patch:#?}"));
        prop_assert_eq!(out.token_count() as i64, c.token_count() as i64 + tokens);
        prop_assert_eq!(out.sentence_count() as i64, c.sentence_count() as i64 + sentences);
        prop_assert_eq!(stats.token_delta, tokens);
        prop_assert_eq!(stats.applied + stats.skipped.len(), patch.len());
        prop_assert!(validate_transitions(&out, EncodingScheme::Bio).is_empty());

        // untouched documents serialize identically
        let touched: HashSet<usize> = patch.iter().map(|op| op.doc_index).collect();
        for (d, doc) in c.documents.iter().enumerate() {
            if !touched.contains(&d) {
                prop_assert_eq!(&out.documents[d], doc);
            }
        }
        // a second application is stale whenever the patch changes structure
        if tokens != 0 || sentences != 0 {
            prop_assert!(apply_patch(&out, &patch).is_err());
        }
    }
}
