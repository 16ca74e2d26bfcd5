use std::path::PathBuf;

use clap::Parser;
use sketchml::ingest::Format;
use sketchml::{FeatureSelection, LabelColumn};

/// Search classifier sketches for the best model of a labeled CSV table.
#[derive(Debug, Clone, Parser)]
#[command(name = "sketchml", version, about)]
pub struct Args {
    /// Labeled training table (path or http(s) URL).
    #[arg(long)]
    pub source: String,

    /// Unlabeled rows to predict once a winner is chosen.
    #[arg(long)]
    pub test_source: Option<String>,

    /// Input format; inferred from the source extension when omitted.
    #[arg(long)]
    pub format: Option<Format>,

    /// The first row holds column names.
    #[arg(long, conflicts_with = "no_header")]
    pub has_header: bool,

    /// The first row is data.
    #[arg(long)]
    pub no_header: bool,

    /// Label column: zero-based index or `last`.
    #[arg(long, default_value = "last")]
    pub label_col: LabelColumn,

    /// Number of cross-validation folds.
    #[arg(long, default_value_t = 5, value_parser = clap::value_parser!(u32).range(2..))]
    pub k: u32,

    #[arg(long, env = "SKETCHML_SEED", default_value_t = 0)]
    pub seed: u64,

    /// Wall-clock budget for the search.
    #[arg(long, default_value_t = 600)]
    pub budget_seconds: u64,

    /// Stop after this many evaluations.
    #[arg(long)]
    pub max_evals: Option<usize>,

    #[arg(long, default_value = "all", value_parser = parse_selection)]
    pub feature_select: FeatureSelection,

    /// Predictions CSV (written only with --test-source).
    #[arg(long, default_value = "predictions.csv")]
    pub out: PathBuf,

    /// Search trace, one JSON object per line.
    #[arg(long, default_value = "trace.jsonl")]
    pub trace: PathBuf,

    #[arg(long, default_value = "report.txt")]
    pub report: PathBuf,

    /// Write the refitted winner as JSON.
    #[arg(long)]
    pub model: Option<PathBuf>,

    /// Replace the built-in sketches with a JSON sketch file.
    #[arg(long)]
    pub sketches: Option<PathBuf>,

    /// Disable static and dynamic pruning (exhaustive grid).
    #[arg(long)]
    pub no_prune: bool,

    /// Record per-evaluation wall time in the trace (breaks byte-identical reruns).
    #[arg(long)]
    pub trace_timing: bool,

    /// Print one progress line per trace entry.
    #[arg(long)]
    pub verbose: bool,
}

fn parse_selection(s: &str) -> Result<FeatureSelection, String> {
    s.parse()
}

impl Args {
    pub fn header(&self) -> Option<bool> {
        match (self.has_header, self.no_header) {
            (true, _) => Some(true),
            (_, true) => Some(false),
            _ => None,
        }
    }
}
