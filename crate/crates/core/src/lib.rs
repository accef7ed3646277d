//! Auditing toolkit for named entity corpora in CoNLL-03 column format.
//!
//! The crate is organised around an immutable in-memory [`Corpus`] model.
//! Everything else is a pure function over corpora:
//!
//! - [`conll`] reads and writes the column format byte-exactly and reports
//!   invalid label transitions.
//! - [`encoding`] defines the IOB1 and BIO chunk encodings: span extraction,
//!   re-encoding, conversion and auto-detection.
//! - [`scoring`] computes exact-match span precision/recall/F1, stratified by
//!   document domain and format, and seen/unseen recall.
//! - [`taxonomy`] splits mismatches into missed, spurious, boundary and type
//!   errors and aggregates the most frequent mention errors.
//! - [`diff`] aligns several versions of one corpus, counts label
//!   disagreements and applies adjudication decisions.
//! - [`repair`] applies declarative patches (token splits, hyphen splits,
//!   sentence merges/splits, label fixes) and detects headline defects.
//! - [`adjudication`] keeps the durable decision log behind the review service.

pub mod adjudication;
pub mod conll;
pub mod diff;
pub mod encoding;
pub mod metadata;
pub mod model;
pub mod percent;
pub mod repair;
pub mod scoring;
pub mod taxonomy;

pub use conll::{parse_corpus, serialize_corpus, validate_transitions, ParseOptions, ParseReport};
pub use encoding::EncodingScheme;
pub use metadata::{Census, DocMetadata, Domain, Format, MetadataTable};
pub use model::{Corpus, Document, EntityType, Label, Mention, Sentence, Token};
pub use percent::Percent;
