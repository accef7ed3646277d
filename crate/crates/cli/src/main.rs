//! `ner-audit`: validate, score, compare, adjudicate and repair CoNLL-03
//! NER corpora.

mod commands;
mod io;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use io::{notice, CliError, OutputArgs, ReadArgs};

#[derive(Debug, Parser)]
#[command(name = "ner-audit", version, about = "Audit, compare and repair CoNLL-03 NER corpora")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Parse a corpus and report its shape, encoding and invalid transitions.
    Validate(ValidateArgs),
    /// Exact-match span precision, recall and F1 of predictions against gold.
    Score(ScoreArgs),
    /// Classify non-exact mentions and list the most frequent errors.
    Errors(ErrorsArgs),
    /// Recall over test mentions seen and unseen in a training corpus.
    RecallSplit(RecallSplitArgs),
    /// Count label differences between two versions (or every pair of more).
    Diff(DiffArgs),
    /// Partition aligned tokens of three or more versions by label agreement.
    Agree(AgreeArgs),
    /// Write the review queue of disagreements as JSON lines.
    ExportDisagreements(ExportArgs),
    /// Apply adjudication decisions to a corpus version.
    ApplyDecisions(ApplyDecisionsArgs),
    /// Summarize adjudication decisions per version.
    AdjudicationStats(AdjudicationStatsArgs),
    /// Apply a repair patch to a corpus.
    Repair(RepairArgs),
    /// Count the ops of a repair patch by kind.
    PatchStats(PatchStatsArgs),
    /// Find likely headline boundary and hyphenation defects.
    Detect(DetectArgs),
    /// Run the adjudication HTTP service.
    Serve(ServeArgs),
    /// Document, sentence and token counts with a domain and format census.
    Stats(StatsArgs),
}

#[derive(Debug, Args)]
struct ValidateArgs {
    /// Corpus file.
    #[arg(long, value_name = "FILE")]
    corpus: PathBuf,
    /// Exit with status 1 when invalid transitions are found.
    #[arg(long)]
    strict: bool,
    #[command(flatten)]
    read: ReadArgs,
    #[command(flatten)]
    out: OutputArgs,
}

#[derive(Debug, Args)]
struct ScoreArgs {
    #[arg(long, value_name = "FILE")]
    gold: PathBuf,
    #[arg(long, value_name = "FILE")]
    pred: PathBuf,
    /// Domain and format sidecar (`doc_index<TAB>domain<TAB>format`).
    #[arg(long, value_name = "FILE")]
    metadata: Option<PathBuf>,
    #[command(flatten)]
    read: ReadArgs,
    #[command(flatten)]
    out: OutputArgs,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum GroupByArg {
    Domain,
    Format,
    Category,
}

#[derive(Debug, Args)]
struct ErrorsArgs {
    #[arg(long, value_name = "FILE")]
    gold: PathBuf,
    #[arg(long, value_name = "FILE")]
    pred: PathBuf,
    #[arg(long, value_name = "FILE")]
    metadata: Option<PathBuf>,
    /// Columns of the category table.
    #[arg(long, value_enum, default_value_t = GroupByArg::Domain)]
    group_by: GroupByArg,
    /// Only documents of this domain.
    #[arg(long)]
    domain: Option<ner_audit::Domain>,
    /// Only documents of this format.
    #[arg(long = "doc-format", value_name = "FORMAT")]
    doc_format: Option<ner_audit::Format>,
    /// Number of most frequent errors to list.
    #[arg(long, default_value_t = 20)]
    top: usize,
    #[command(flatten)]
    read: ReadArgs,
    #[command(flatten)]
    out: OutputArgs,
}

#[derive(Debug, Args)]
struct RecallSplitArgs {
    #[arg(long, value_name = "FILE")]
    gold: PathBuf,
    #[arg(long, value_name = "FILE")]
    pred: PathBuf,
    /// Gold training corpus.
    #[arg(long, value_name = "FILE")]
    train: PathBuf,
    /// Match surfaces ignoring case.
    #[arg(long)]
    ignore_case: bool,
    /// Require the training mention to have the same type.
    #[arg(long)]
    type_aware: bool,
    #[command(flatten)]
    read: ReadArgs,
    #[command(flatten)]
    out: OutputArgs,
}

#[derive(Debug, Args)]
struct VersionArgs {
    /// Comma separated version names; defaults to the file stems.
    #[arg(long, value_delimiter = ',')]
    names: Option<Vec<String>>,
    /// Compare labels as written instead of normalized to BIO.
    #[arg(long)]
    raw: bool,
}

#[derive(Debug, Args)]
struct DiffArgs {
    /// Corpus versions, first one is the reference for locations.
    #[arg(required = true, num_args = 2.., value_name = "FILE")]
    files: Vec<PathBuf>,
    #[command(flatten)]
    versions: VersionArgs,
    #[command(flatten)]
    read: ReadArgs,
    #[command(flatten)]
    out: OutputArgs,
}

#[derive(Debug, Args)]
struct AgreeArgs {
    #[arg(required = true, num_args = 3.., value_name = "FILE")]
    files: Vec<PathBuf>,
    #[command(flatten)]
    versions: VersionArgs,
    #[command(flatten)]
    read: ReadArgs,
    #[command(flatten)]
    out: OutputArgs,
}

#[derive(Debug, Args)]
struct ExportArgs {
    #[arg(required = true, num_args = 2.., value_name = "FILE")]
    files: Vec<PathBuf>,
    #[command(flatten)]
    versions: VersionArgs,
    /// Context tokens on each side of the disputed token.
    #[arg(long, default_value_t = 2)]
    window: usize,
    #[arg(long, value_name = "FILE")]
    metadata: Option<PathBuf>,
    #[command(flatten)]
    read: ReadArgs,
    #[command(flatten)]
    out: OutputArgs,
}

#[derive(Debug, Args)]
struct ApplyDecisionsArgs {
    /// Corpus version the decisions are applied to.
    #[arg(long, value_name = "FILE")]
    base: PathBuf,
    /// Decision file (JSON lines).
    #[arg(long, value_name = "FILE")]
    decisions: PathBuf,
    /// Disagreement file the decisions refer to.
    #[arg(long, value_name = "FILE")]
    disagreements: PathBuf,
    /// Where to write the corrected corpus.
    #[arg(long, value_name = "FILE")]
    corrected: PathBuf,
    #[command(flatten)]
    read: ReadArgs,
    #[command(flatten)]
    out: OutputArgs,
}

#[derive(Debug, Args)]
struct AdjudicationStatsArgs {
    #[arg(long, value_name = "FILE")]
    disagreements: PathBuf,
    /// Decision log or exported decision file.
    #[arg(long, value_name = "FILE")]
    decisions: PathBuf,
    #[command(flatten)]
    out: OutputArgs,
}

#[derive(Debug, Args)]
struct RepairArgs {
    #[arg(long, value_name = "FILE")]
    corpus: PathBuf,
    /// Patch file (JSON lines of repair ops).
    #[arg(long, value_name = "FILE")]
    patch: PathBuf,
    /// Where to write the corrected corpus.
    #[arg(long, value_name = "FILE")]
    corrected: PathBuf,
    #[command(flatten)]
    read: ReadArgs,
    #[command(flatten)]
    out: OutputArgs,
}

#[derive(Debug, Args)]
struct PatchStatsArgs {
    #[arg(long, value_name = "FILE")]
    patch: PathBuf,
    #[command(flatten)]
    out: OutputArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum DetectKind {
    All,
    Boundary,
    Hyphen,
}

#[derive(Debug, Args)]
struct DetectArgs {
    #[arg(long, value_name = "FILE")]
    corpus: PathBuf,
    /// Needed for boundary candidates, which only apply to sports data reports.
    #[arg(long, value_name = "FILE")]
    metadata: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = DetectKind::All)]
    kind: DetectKind,
    /// Shortest first sentence, in rendered characters, for a boundary candidate.
    #[arg(long, default_value_t = 16)]
    min_chars: usize,
    /// Longest first sentence, in rendered characters, for a boundary candidate.
    #[arg(long, default_value_t = 20)]
    max_chars: usize,
    /// Also write the suggested ops as a patch file for review.
    #[arg(long, value_name = "FILE")]
    patch: Option<PathBuf>,
    #[command(flatten)]
    read: ReadArgs,
    #[command(flatten)]
    out: OutputArgs,
}

#[derive(Debug, Args)]
struct ServeArgs {
    #[arg(long, value_name = "FILE")]
    disagreements: PathBuf,
    /// Append-only decision log; created when missing.
    #[arg(long, value_name = "FILE")]
    log: PathBuf,
    /// Port to listen on; 0 picks a free one.
    #[arg(long, default_value_t = 8080)]
    port: u16,
    #[arg(long, default_value = "127.0.0.1")]
    host: std::net::IpAddr,
    /// Directory of built UI assets served at `/`.
    #[arg(long, value_name = "DIR")]
    static_dir: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct StatsArgs {
    #[arg(long, value_name = "FILE")]
    corpus: PathBuf,
    #[arg(long, value_name = "FILE")]
    metadata: Option<PathBuf>,
    #[command(flatten)]
    read: ReadArgs,
    #[command(flatten)]
    out: OutputArgs,
}

fn run(cli: Cli) -> Result<u8, CliError> {
    use commands as c;
    match cli.command {
        Command::Validate(a) => c::validate(a),
        Command::Score(a) => c::score(a),
        Command::Errors(a) => c::errors(a),
        Command::RecallSplit(a) => c::recall_split(a),
        Command::Diff(a) => c::diff(a),
        Command::Agree(a) => c::agree(a),
        Command::ExportDisagreements(a) => c::export_disagreements(a),
        Command::ApplyDecisions(a) => c::apply_decisions(a),
        Command::AdjudicationStats(a) => c::adjudication_stats(a),
        Command::Repair(a) => c::repair(a),
        Command::PatchStats(a) => c::patch_stats(a),
        Command::Detect(a) => c::detect(a),
        Command::Serve(a) => c::serve(a),
        Command::Stats(a) => c::stats(a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match std::panic::catch_unwind(|| run(cli)) {
        Ok(Ok(code)) => ExitCode::from(code),
        Ok(Err(e)) => {
            notice(format_args!("error: {}", e.to_string().replace('\n', " ")));
            ExitCode::from(e.exit_code())
        }
        // the panic hook has already printed the message
        Err(_) => ExitCode::from(4),
    }
}
