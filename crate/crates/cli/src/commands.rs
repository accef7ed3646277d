//! One function per subcommand. Each returns the exit status on success.

use std::fmt::Write as _;
use std::io::Write as _;
use std::net::SocketAddr;
use std::path::Path;

use ner_audit::adjudication::{Session, SessionError};
use ner_audit::conll::write_corpus;
use ner_audit::diff::{
    agreement, diff_matrix, from_jsonl, to_jsonl, Comparison, Decision, Disagreement, LabelMode,
};
use ner_audit::repair::{
    apply_patch, detect_headline_boundary_candidates, detect_hyphen_candidates, patch_stats as count_ops,
    Candidate, RepairOp, RepairStats,
};
use ner_audit::scoring::{score as score_pair, score_stratified, seen_unseen_recall, ScoreError, ScoreReport, SeenOptions};
use ner_audit::taxonomy::{classify_errors, count_mention_errors, error_counts_tsv, error_summary, DocFilter, GroupBy};
use ner_audit::encoding::Detection;
use ner_audit::{Census, Corpus};
use ner_audit_server::{ServeConfig, ServeError};
use serde::Serialize;
use serde_json::json;

use crate::io::{
    load_corpus, load_metadata, notice, read_text, to_json, version_names, write_output, CliError, OutputFormat,
    ReadArgs, EXIT_FINDINGS,
};
use crate::{
    AdjudicationStatsArgs, AgreeArgs, ApplyDecisionsArgs, DetectArgs, DetectKind, DiffArgs, ErrorsArgs, ExportArgs,
    GroupByArg, PatchStatsArgs, RecallSplitArgs, RepairArgs, ScoreArgs, ServeArgs, StatsArgs, ValidateArgs,
    VersionArgs,
};

fn score_error(e: ScoreError) -> CliError {
    match e {
        ScoreError::EncodingInvalid { .. } => {
            CliError::Data(format!("{e} (use --repair conlleval to read it the way conlleval does)"))
        }
        other => CliError::Data(other.to_string()),
    }
}

fn parse_jsonl<T: for<'de> serde::Deserialize<'de>>(path: &Path) -> Result<Vec<T>, CliError> {
    from_jsonl(&read_text(path)?).map_err(|e| CliError::data(path, e))
}

fn write_corrected(path: &Path, corpus: &Corpus) -> Result<(), CliError> {
    write_output(Some(path), write_corpus(corpus).as_bytes())
}

pub fn validate(a: ValidateArgs) -> Result<u8, CliError> {
    let loaded = load_corpus(&a.corpus, &a.read)?;
    let r = &loaded.report;
    let text = || {
        let how = if r.declared {
            "declared".to_string()
        } else {
            let d = match r.detection {
                Detection::Clear => "clear",
                Detection::Ambiguous => "ambiguous",
                Detection::Conflicting => "conflicting",
            };
            format!("detected, {d}")
        };
        let mut out = String::new();
        let _ = writeln!(out, "documents   {}", r.document_count);
        let _ = writeln!(out, "sentences   {}", r.sentence_count);
        let _ = writeln!(out, "tokens      {}", r.token_count);
        let _ = writeln!(out, "encoding    {} ({how})", r.detected_encoding);
        let _ = writeln!(out, "violations  {}", r.violations.len());
        for v in &r.violations {
            let l = &v.location;
            let _ = writeln!(
                out,
                "  line {}: document {}, sentence {}, token {}: {} -> {}",
                l.source_line, l.doc_index, l.sentence_index, l.token_index, v.prev_label, v.cur_label
            );
        }
        if loaded.repaired > 0 {
            let _ = writeln!(out, "repaired    {}", loaded.repaired);
        }
        out
    };
    let tsv = || {
        let mut out = String::from("source_line\tdoc_index\tsentence_index\ttoken_index\tprev_label\tcur_label\n");
        for v in &r.violations {
            let l = &v.location;
            let _ = writeln!(
                out,
                "{}\t{}\t{}\t{}\t{}\t{}",
                l.source_line, l.doc_index, l.sentence_index, l.token_index, v.prev_label, v.cur_label
            );
        }
        out
    };
    a.out.emit(&json!({ "report": r, "repaired": loaded.repaired }), text, tsv)?;
    Ok(if a.strict && !r.violations.is_empty() {
        EXIT_FINDINGS
    } else {
        0
    })
}

#[derive(Serialize)]
struct ScoreView<'a> {
    overall: &'a ScoreReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    strata: Option<&'a [ScoreReport]>,
}

fn score_tsv(reports: &[&ScoreReport]) -> String {
    let mut out = String::from("domain\tformat\ttype\ttp\tfp\tfn\tprecision\trecall\tf1\n");
    for r in reports {
        let (d, f) = match r.stratum {
            Some(s) => (
                s.domain.map_or("all".to_string(), |d| d.to_string()),
                s.format.map_or("all".to_string(), |f| f.to_string()),
            ),
            None => ("all".to_string(), "all".to_string()),
        };
        let rows = r.per_type.iter().map(|(t, c)| (t.as_str(), c)).chain([("overall", &r.counts)]);
        for (ty, c) in rows {
            let _ = writeln!(
                out,
                "{d}\t{f}\t{ty}\t{}\t{}\t{}\t{}\t{}\t{}",
                c.tp,
                c.fp,
                c.fn_,
                c.precision(),
                c.recall(),
                c.f1()
            );
        }
    }
    out
}

pub fn score(a: ScoreArgs) -> Result<u8, CliError> {
    let gold = load_corpus(&a.gold, &a.read)?.corpus;
    let pred = load_corpus(&a.pred, &a.read)?.corpus;
    let strat = match &a.metadata {
        Some(path) => {
            let meta = load_metadata(Some(path))?;
            Some(score_stratified(&gold, &pred, &meta).map_err(score_error)?)
        }
        None => None,
    };
    let plain;
    let overall = match &strat {
        Some(s) => s.global(),
        None => {
            plain = score_pair(&gold, &pred).map_err(score_error)?;
            &plain
        }
    };
    let view = ScoreView {
        overall,
        strata: strat.as_ref().map(|s| s.reports.as_slice()),
    };
    let text = || {
        let c = &overall.counts;
        let mut out = overall.render_text();
        let _ = writeln!(out, "\nprecision {}  recall {}  F1 {}", c.precision(), c.recall(), c.f1());
        if let Some(s) = &strat {
            out.push_str("\nF1 by format and domain\n");
            out.push_str(&s.render_f1_table());
        }
        out
    };
    let tsv = || match &strat {
        Some(s) => score_tsv(&s.reports.iter().collect::<Vec<_>>()),
        None => score_tsv(&[overall]),
    };
    a.out.emit(&view, text, tsv)?;
    Ok(0)
}

pub fn errors(a: ErrorsArgs) -> Result<u8, CliError> {
    let gold = load_corpus(&a.gold, &a.read)?.corpus;
    let pred = load_corpus(&a.pred, &a.read)?.corpus;
    let meta = load_metadata(a.metadata.as_deref())?;
    let filter = DocFilter {
        domain: a.domain,
        format: a.doc_format,
    };
    let mut records = classify_errors(&gold, &pred).map_err(score_error)?;
    records.retain(|r| filter.matches(&meta, r.doc_index));
    let group_by = match a.group_by {
        GroupByArg::Domain => GroupBy::Domain,
        GroupByArg::Format => GroupBy::Format,
        GroupByArg::Category => GroupBy::Category,
    };
    let table = error_summary(&records, &meta, group_by);
    let mut counts = count_mention_errors(&gold, &pred, &meta, filter).map_err(score_error)?;
    counts.truncate(a.top);
    let text = || {
        let mut out = table.render_text();
        out.push_str("\nmost frequent errors\n");
        for r in &counts {
            let _ = writeln!(out, "{:>6}  {}  {:<5} {}", r.count, r.polarity, r.entity_type, r.surface);
        }
        out
    };
    let tsv = || format!("{}\n{}", table.render_tsv(), error_counts_tsv(&counts));
    a.out.emit(&json!({ "table": table, "top_errors": counts }), text, tsv)?;
    Ok(0)
}

pub fn recall_split(a: RecallSplitArgs) -> Result<u8, CliError> {
    let gold = load_corpus(&a.gold, &a.read)?.corpus;
    let pred = load_corpus(&a.pred, &a.read)?.corpus;
    let train = load_corpus(&a.train, &a.read)?.corpus;
    let options = SeenOptions {
        case_sensitive: !a.ignore_case,
        type_aware: a.type_aware,
    };
    let s = seen_unseen_recall(&gold, &pred, &train, options).map_err(score_error)?;
    let rows = [
        ("seen", s.seen_recall, s.seen_gold_count, s.seen_tp),
        ("unseen", s.unseen_recall, s.unseen_gold_count, s.unseen_tp),
        ("overall", s.overall_recall, s.seen_gold_count + s.unseen_gold_count, s.seen_tp + s.unseen_tp),
    ];
    let text = || {
        let mut out = format!("{:<8} {:>9} {:>8} {:>8}\n", "", "recall", "gold", "tp");
        for (name, r, g, tp) in rows {
            let _ = writeln!(out, "{name:<8} {r:>9} {g:>8} {tp:>8}");
        }
        out
    };
    let tsv = || {
        let mut out = String::from("split\trecall\tgold\ttp\n");
        for (name, r, g, tp) in rows {
            let _ = writeln!(out, "{name}\t{r}\t{g}\t{tp}");
        }
        out
    };
    a.out.emit(&s, text, tsv)?;
    Ok(0)
}

struct Versions {
    names: Vec<String>,
    corpora: Vec<Corpus>,
    mode: LabelMode,
}

impl Versions {
    fn load(files: &[std::path::PathBuf], v: &VersionArgs, read: &ReadArgs) -> Result<Self, CliError> {
        let names = version_names(files, v.names.as_deref())?;
        let corpora = files
            .iter()
            .map(|f| load_corpus(f, read).map(|l| l.corpus))
            .collect::<Result<Vec<_>, _>>()?;
        let mode = if v.raw { LabelMode::Raw } else { LabelMode::Normalized };
        Ok(Versions { names, corpora, mode })
    }

    fn pairs(&self) -> Vec<(&str, &Corpus)> {
        self.names.iter().map(String::as_str).zip(&self.corpora).collect()
    }
}

fn diff_error(e: ner_audit::diff::DiffError) -> CliError {
    CliError::Data(e.to_string())
}

pub fn diff(a: DiffArgs) -> Result<u8, CliError> {
    let v = Versions::load(&a.files, &a.versions, &a.read)?;
    if v.corpora.len() > 2 {
        return diff_all_pairs(&v, &a.out);
    }
    let cmp = Comparison::new(&v.pairs(), v.mode).map_err(diff_error)?;
    let records = cmp.records();
    let unaligned = cmp.alignment.unaligned_counts();
    let view = json!({
        "versions": v.names,
        "count": records.len(),
        "unaligned": v.names.iter().zip(&unaligned).map(|(n, u)| (n.clone(), json!(u))).collect::<serde_json::Map<_, _>>(),
        "records": records,
    });
    let text = || {
        let mut out = format!("{}\n", records.len());
        if unaligned.iter().any(|&u| u > 0) {
            let parts: Vec<String> = v.names.iter().zip(&unaligned).map(|(n, u)| format!("{n} {u}")).collect();
            let _ = writeln!(out, "unaligned tokens: {}", parts.join(", "));
        }
        for r in &records {
            let labels: Vec<String> = v.names.iter().zip(&r.labels).map(|(n, l)| format!("{n}={l}")).collect();
            let _ = writeln!(
                out,
                "document {}, sentence {}, token {}: {}  {}",
                r.doc_index,
                r.sentence_index,
                r.token_index,
                r.surfaces[0],
                labels.join(" ")
            );
        }
        out
    };
    let tsv = || {
        let mut out = format!("doc_index\tsentence_index\ttoken_index\tsurface\t{}\n", v.names.join("\t"));
        for r in &records {
            let labels: Vec<String> = r.labels.iter().map(|l| l.to_string()).collect();
            let _ = writeln!(
                out,
                "{}\t{}\t{}\t{}\t{}",
                r.doc_index,
                r.sentence_index,
                r.token_index,
                r.surfaces[0],
                labels.join("\t")
            );
        }
        out
    };
    a.out.emit(&view, text, tsv)?;
    Ok(0)
}

fn diff_all_pairs(v: &Versions, out: &crate::io::OutputArgs) -> Result<u8, CliError> {
    let refs: Vec<&Corpus> = v.corpora.iter().collect();
    let matrix = diff_matrix(&refs, v.mode).map_err(diff_error)?;
    let mut pairs = Vec::new();
    for (i, row) in matrix.iter().enumerate() {
        for (j, cell) in row.iter().enumerate() {
            if let Some(n) = cell {
                pairs.push((i, j, *n));
            }
        }
    }
    let view = json!({
        "versions": v.names,
        "pairs": pairs.iter().map(|&(i, j, n)| json!({"a": v.names[i], "b": v.names[j], "count": n})).collect::<Vec<_>>(),
    });
    let width = v.names.iter().map(String::len).max().unwrap_or(0);
    let text = || {
        let mut s = String::new();
        for &(i, j, n) in &pairs {
            let _ = writeln!(s, "{:<width$}  {:<width$}  {n:>8}", v.names[i], v.names[j]);
        }
        s
    };
    let tsv = || {
        let mut s = String::from("a\tb\tcount\n");
        for &(i, j, n) in &pairs {
            let _ = writeln!(s, "{}\t{}\t{n}", v.names[i], v.names[j]);
        }
        s
    };
    out.emit(&view, text, tsv)?;
    Ok(0)
}

pub fn agree(a: AgreeArgs) -> Result<u8, CliError> {
    let v = Versions::load(&a.files, &a.versions, &a.read)?;
    let partition = agreement(&v.pairs(), v.mode).map_err(diff_error)?;
    let tsv = || {
        let mut s = String::from("pattern\tcount\n");
        for p in partition.patterns() {
            let _ = writeln!(s, "{}\t{}", partition.describe(&p), partition.count(&p));
        }
        let _ = writeln!(s, "aligned\t{}", partition.aligned_tuples);
        s
    };
    a.out.emit(&partition, || partition.render_text(), tsv)?;
    Ok(0)
}

pub fn export_disagreements(a: ExportArgs) -> Result<u8, CliError> {
    let v = Versions::load(&a.files, &a.versions, &a.read)?;
    let meta = match &a.metadata {
        Some(p) => Some(load_metadata(Some(p))?),
        None => None,
    };
    let cmp = Comparison::new(&v.pairs(), v.mode).map_err(diff_error)?;
    let items = cmp.disagreements(&cmp.records(), a.window, meta.as_ref());
    // the disagreement file itself is JSON lines; `json` gives one array
    let body = match a.out.format {
        OutputFormat::Text => to_jsonl(&items),
        OutputFormat::Json => to_json(&items)?,
        OutputFormat::Tsv => {
            let mut s = format!("diff_id\tdoc_index\tsentence_index\ttoken_index\tsurface\t{}\n", v.names.join("\t"));
            for it in &items {
                let labels: Vec<&str> = v
                    .names
                    .iter()
                    .map(|n| it.labels.get(n).map_or("", String::as_str))
                    .collect();
                let _ = writeln!(
                    s,
                    "{}\t{}\t{}\t{}\t{}\t{}",
                    it.diff_id,
                    it.doc_index,
                    it.sentence_index,
                    it.token_index,
                    it.surface,
                    labels.join("\t")
                );
            }
            s
        }
    };
    write_output(a.out.output.as_deref(), body.as_bytes())?;
    Ok(0)
}

pub fn apply_decisions(a: ApplyDecisionsArgs) -> Result<u8, CliError> {
    let base = load_corpus(&a.base, &a.read)?.corpus;
    let decisions: Vec<Decision> = parse_jsonl(&a.decisions)?;
    let items: Vec<Disagreement> = parse_jsonl(&a.disagreements)?;
    let fixed = ner_audit::diff::apply_decisions(&base, &decisions, &items).map_err(|e| CliError::Data(e.to_string()))?;
    let changed = base
        .documents
        .iter()
        .zip(&fixed.documents)
        .flat_map(|(x, y)| x.tokens().zip(y.tokens()))
        .filter(|(s, t)| s.label != t.label)
        .count();
    write_corrected(&a.corrected, &fixed)?;
    let view = json!({ "decisions": decisions.len(), "labels_changed": changed });
    let text = || format!("decisions       {}\nlabels changed  {changed}\n", decisions.len());
    let tsv = || format!("decisions\tlabels_changed\n{}\t{changed}\n", decisions.len());
    a.out.emit(&view, text, tsv)?;
    Ok(0)
}

fn session_error(path: &Path, e: SessionError) -> CliError {
    match e {
        SessionError::Io(io) => CliError::io(path, io),
        other => CliError::data(path, other),
    }
}

pub fn adjudication_stats(a: AdjudicationStatsArgs) -> Result<u8, CliError> {
    let items: Vec<Disagreement> = parse_jsonl(&a.disagreements)?;
    let decisions: Vec<Decision> = parse_jsonl(&a.decisions)?;
    let session = Session::replay(items, decisions).map_err(|e| session_error(&a.decisions, e))?;
    let stats = session.stats();
    let progress = session.progress();
    let view = json!({ "progress": progress, "stats": stats });
    let tsv = || {
        let mut s = String::from("version\twins\tpercent\n");
        for (name, w) in &stats.per_version {
            let _ = writeln!(s, "{name}\t{}\t{}", w.count, w.percent);
        }
        let _ = writeln!(s, "neither\t{}\t{}", stats.neither.count, stats.neither.percent);
        s
    };
    let text = || format!("{}{:<24}{:>8}\n", stats.render_text(), "remaining", progress.remaining);
    a.out.emit(&view, text, tsv)?;
    Ok(0)
}

fn stats_tsv(stats: &RepairStats) -> String {
    let mut s = String::from("kind\tcount\n");
    for kind in ner_audit::repair::OpKind::ALL {
        let _ = writeln!(s, "{}\t{}", kind.key(), stats.count(kind));
    }
    let _ = writeln!(s, "sentence_boundary\t{}", stats.sentence_boundary_fixes());
    s
}

pub fn repair(a: RepairArgs) -> Result<u8, CliError> {
    let corpus = load_corpus(&a.corpus, &a.read)?.corpus;
    let patch: Vec<RepairOp> = parse_jsonl(&a.patch)?;
    let (fixed, stats) = apply_patch(&corpus, &patch).map_err(|e| CliError::data(&a.patch, e))?;
    write_corrected(&a.corrected, &fixed)?;
    a.out.emit(&stats, || stats.render_text(), || stats_tsv(&stats))?;
    Ok(0)
}

pub fn patch_stats(a: PatchStatsArgs) -> Result<u8, CliError> {
    let patch: Vec<RepairOp> = parse_jsonl(&a.patch)?;
    let stats = count_ops(&patch);
    a.out.emit(&stats, || stats.render_text(), || stats_tsv(&stats))?;
    Ok(0)
}

pub fn detect(a: DetectArgs) -> Result<u8, CliError> {
    if a.min_chars > a.max_chars {
        return Err(CliError::Usage(format!(
            "--min-chars {} is greater than --max-chars {}",
            a.min_chars, a.max_chars
        )));
    }
    let corpus = load_corpus(&a.corpus, &a.read)?.corpus;
    let meta = load_metadata(a.metadata.as_deref())?;
    let mut found: Vec<Candidate> = Vec::new();
    if a.kind != DetectKind::Hyphen {
        if a.metadata.is_none() {
            notice("boundary candidates need --metadata (they only apply to sports data reports)");
        }
        found.extend(detect_headline_boundary_candidates(&corpus, &meta, (a.min_chars, a.max_chars)));
    }
    if a.kind != DetectKind::Boundary {
        found.extend(detect_hyphen_candidates(&corpus));
    }
    found.sort_by_key(|c| (c.doc_index, c.sentence_index, c.token_index));
    if let Some(path) = &a.patch {
        let ops: Vec<&RepairOp> = found.iter().map(|c| &c.suggested).collect();
        write_output(Some(path), to_jsonl(&ops).as_bytes())?;
    }
    let kind = |c: &Candidate| match c.kind {
        ner_audit::repair::CandidateKind::HeadlineBoundary => "boundary",
        ner_audit::repair::CandidateKind::Hyphen => "hyphen",
    };
    let text = || {
        let mut s = String::new();
        for c in &found {
            let at = match (c.token_index, c.offset) {
                (Some(t), _) => format!("token {t}"),
                (None, Some(n)) => format!("{n} chars"),
                (None, None) => String::new(),
            };
            let _ = writeln!(
                s,
                "{:<9} document {}, sentence {}, {at}: {}",
                kind(c),
                c.doc_index,
                c.sentence_index,
                c.text
            );
        }
        let _ = writeln!(s, "{} candidates", found.len());
        s
    };
    let tsv = || {
        let mut s = String::from("kind\tdoc_index\tsentence_index\ttoken_index\tchars\ttext\n");
        for c in &found {
            let opt = |x: Option<usize>| x.map_or(String::new(), |v| v.to_string());
            let _ = writeln!(
                s,
                "{}\t{}\t{}\t{}\t{}\t{}",
                kind(c),
                c.doc_index,
                c.sentence_index,
                opt(c.token_index),
                opt(c.offset),
                c.text
            );
        }
        s
    };
    a.out.emit(&found, text, tsv)?;
    Ok(0)
}

fn serve_error(e: ServeError) -> CliError {
    match e {
        ServeError::Read { path, source } => CliError::io(&path, source),
        ServeError::Disagreements { path, source } => CliError::data(&path, source),
        ServeError::Session(SessionError::Io(io)) => CliError::io(Path::new("decision log"), io),
        ServeError::Session(other) => CliError::Data(other.to_string()),
        ServeError::Bind { addr, source } => CliError::io(Path::new(&addr.to_string()), source),
        ServeError::Serve(io) => CliError::io(Path::new("server"), io),
    }
}

pub fn serve(a: ServeArgs) -> Result<u8, CliError> {
    let config = ServeConfig {
        disagreements: a.disagreements,
        log: a.log,
        addr: SocketAddr::new(a.host, a.port),
        static_dir: a.static_dir,
    };
    let runtime = tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()
        .map_err(|e| CliError::Internal(e.to_string()))?;
    runtime.block_on(async {
        let (addr, app, listener) = ner_audit_server::bind(&config).await.map_err(serve_error)?;
        let mut stdout = std::io::stdout();
        let _ = writeln!(stdout, "listening on http://{addr}");
        let _ = stdout.flush();
        ner_audit_server::serve(listener, app).await.map_err(serve_error)
    })?;
    Ok(0)
}

pub fn stats(a: StatsArgs) -> Result<u8, CliError> {
    let loaded = load_corpus(&a.corpus, &a.read)?;
    let meta = load_metadata(a.metadata.as_deref())?;
    let c = &loaded.corpus;
    let census = Census::of(c, &meta);
    let view = json!({
        "documents": c.documents.len(),
        "sentences": c.sentence_count(),
        "tokens": c.token_count(),
        "encoding": c.encoding,
        "census": census,
    });
    let text = || {
        format!(
            "documents  {}\nsentences  {}\ntokens     {}\nencoding   {}\n\n{}",
            c.documents.len(),
            c.sentence_count(),
            c.token_count(),
            c.encoding,
            census.render_text()
        )
    };
    a.out.emit(&view, text, || census.render_tsv())?;
    Ok(0)
}
