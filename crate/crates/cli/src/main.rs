//! `sketchml`: search classifier sketches for a labeled table.
//!
//! Exit codes: 0 success, 2 usage, 3 bad input, 4 search failure,
//! 5 an output file could not be written.

mod args;
mod report;

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::process::ExitCode;
use std::time::Duration;

use clap::Parser;
use sketchml::engine::{write_trace, LedgerEntry, TraceLine, TraceSummary};
use sketchml::ingest::{split_test, Source};
use sketchml::{acquire, split_label, Budget, Format, PipelineConfig, SearchSpace};

use args::Args;

const EXIT_USAGE: u8 = 2;
const EXIT_INPUT: u8 = 3;
const EXIT_SEARCH: u8 = 4;
const EXIT_OUTPUT: u8 = 5;

enum Failure {
    Usage(String),
    Pipeline(sketchml::Error),
    Output(String, std::io::Error),
}

impl Failure {
    fn report(&self) -> u8 {
        match self {
            Failure::Usage(msg) => {
                eprintln!("error: {msg}");
                EXIT_USAGE
            }
            Failure::Pipeline(e) => {
                eprintln!("error [{}]: {e}", e.module());
                eprintln!("hint: {}", e.hint());
                if e.is_input_error() {
                    EXIT_INPUT
                } else {
                    EXIT_SEARCH
                }
            }
            Failure::Output(path, e) => {
                eprintln!("error: cannot write {path}: {e}");
                EXIT_OUTPUT
            }
        }
    }
}

impl<E: Into<sketchml::Error>> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure::Pipeline(e.into())
    }
}

fn output(path: &Path) -> impl Fn(std::io::Error) -> Failure + '_ {
    move |e| Failure::Output(path.display().to_string(), e)
}

fn format_for(args: &Args, source: &str) -> Result<Format, Failure> {
    args.format
        .or_else(|| Format::infer(source))
        .ok_or_else(|| Failure::Usage(format!("cannot infer the format of {source}; pass --format")))
}

fn progress(entry: &LedgerEntry) {
    let line = TraceLine::from_entry(entry, true);
    let params = report::hyperparameters(&line);
    match entry {
        LedgerEntry::Eval { record, .. } => eprintln!(
            "[{:>4}] eval {}({}) acc={:.4} std={:.4} {:.0}ms{}",
            line.seq,
            line.classifier,
            params,
            record.mean_accuracy,
            record.std_accuracy,
            line.wall_ms.unwrap_or(0.0),
            record.error.as_ref().map(|e| format!(" error: {e}")).unwrap_or_default()
        ),
        LedgerEntry::Skip { rule, .. } => {
            eprintln!("[{:>4}] skip {}({}) by {rule}", line.seq, line.classifier, params)
        }
    }
}

fn run(args: &Args) -> Result<(), Failure> {
    let train_table = acquire(&Source::parse(&args.source), format_for(args, &args.source)?, args.header())?;
    let train = split_label(&train_table, args.label_col)?;
    let test = match &args.test_source {
        Some(src) => {
            let table = acquire(&Source::parse(src), format_for(args, src)?, args.header())?;
            Some(split_test(&table, &train, args.label_col)?)
        }
        None => None,
    };

    let space = match &args.sketches {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| Failure::Usage(format!("cannot read {}: {e}", path.display())))?;
            Some(SearchSpace::from_json(&text)?)
        }
        None => None,
    };
    let mut config = PipelineConfig {
        k: args.k as usize,
        seed: args.seed,
        budget: Budget {
            wall: Some(Duration::from_secs(args.budget_seconds)),
            max_evals: args.max_evals,
        },
        feature_selection: args.feature_select,
        space,
        ..PipelineConfig::default()
    };
    if args.no_prune {
        config = config.exhaustive();
    }

    let verbose = args.verbose;
    let mut on_entry = |e: &LedgerEntry| {
        if verbose {
            progress(e)
        }
    };
    let outcome = sketchml::run_pipeline(&train, test.as_ref(), &config, &mut on_entry)?;
    if !outcome.exhausted {
        log::warn!("budget ran out before the space was covered");
    }

    let mut trace = Vec::new();
    write_trace(&mut trace, &outcome.ledger, args.trace_timing).expect("writing to memory");
    std::fs::write(&args.trace, &trace).map_err(output(&args.trace))?;

    // The report reads the trace back rather than the ledger.
    let text = String::from_utf8(trace).expect("trace is utf-8");
    let summary = TraceSummary::parse(&text)?;
    let rendered = report::render(&outcome.profile, &summary, outcome.elapsed);
    std::fs::write(&args.report, &rendered).map_err(output(&args.report))?;
    print!("{rendered}");

    if let Some(predictions) = &outcome.predictions {
        let file = File::create(&args.out).map_err(output(&args.out))?;
        let mut w = csv::Writer::from_writer(BufWriter::new(file));
        let csv_err = |e: csv::Error| Failure::Output(args.out.display().to_string(), e.into());
        w.write_record(["label"]).map_err(csv_err)?;
        for p in predictions {
            w.write_record([p]).map_err(csv_err)?;
        }
        w.flush().map_err(output(&args.out))?;
    }

    if let Some(path) = &args.model {
        let mut f = BufWriter::new(File::create(path).map_err(output(path))?);
        let doc = serde_json::to_string_pretty(&outcome.model.to_json()).expect("model serializes");
        writeln!(f, "{doc}").and_then(|_| f.flush()).map_err(output(path))?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let args = match Args::try_parse() {
        Ok(a) => a,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let level = if args.verbose { "info" } else { "warn" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .init();

    match run(&args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => ExitCode::from(f.report()),
    }
}
