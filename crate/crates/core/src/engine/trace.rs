//! JSON-lines search trace and the summary recomputed from it.
//!
//! Lines carry no timing unless asked for, so two runs with the same inputs
//! write byte-identical files.

use std::collections::BTreeMap;
use std::io::Write;

use serde::{Deserialize, Serialize};

use super::{LedgerEntry, ResultsLedger, SearchError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceLine {
    pub seq: usize,
    pub kind: String,
    pub classifier: String,
    pub assignment: serde_json::Value,
    pub mean_acc: Option<f64>,
    pub std: Option<f64>,
    pub per_fold: Option<Vec<f64>>,
    pub rule: Option<String>,
    pub wall_ms: Option<f64>,
}

impl TraceLine {
    pub fn from_entry(entry: &LedgerEntry, timing: bool) -> TraceLine {
        match entry {
            LedgerEntry::Eval { seq, record } => TraceLine {
                seq: *seq,
                kind: "eval".into(),
                classifier: record.classifier.to_string(),
                assignment: serde_json::to_value(&record.assignment).expect("assignment serializes"),
                mean_acc: Some(record.mean_accuracy),
                std: Some(record.std_accuracy),
                per_fold: Some(record.per_fold.clone()),
                rule: record.error.as_ref().map(|e| format!("error: {e}")),
                wall_ms: timing.then_some(record.wall_time.as_secs_f64() * 1e3),
            },
            LedgerEntry::Skip { seq, assignment, rule } => TraceLine {
                seq: *seq,
                kind: "skip".into(),
                classifier: assignment.sketch.to_string(),
                assignment: serde_json::to_value(assignment).expect("assignment serializes"),
                mean_acc: None,
                std: None,
                per_fold: None,
                rule: Some(rule.clone()),
                wall_ms: None,
            },
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("trace line serializes")
    }

    pub fn is_eval(&self) -> bool {
        self.kind == "eval"
    }

    fn failed(&self) -> bool {
        self.rule.as_deref().is_some_and(|r| r.starts_with("error"))
    }
}

pub fn write_trace(out: &mut dyn Write, ledger: &ResultsLedger, timing: bool) -> std::io::Result<()> {
    for entry in ledger.entries() {
        writeln!(out, "{}", TraceLine::from_entry(entry, timing).to_json())?;
    }
    Ok(())
}

/// Figures a report needs, derived from trace lines alone.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceSummary {
    pub n_evals: usize,
    pub skips_by_rule: BTreeMap<String, usize>,
    /// Every assignment the search knew about.
    pub initial_size: usize,
    /// After static rules.
    pub post_static_size: usize,
    /// After static and dynamic rules.
    pub post_dynamic_size: usize,
    pub winner: Option<TraceLine>,
    /// Best evaluations, best first.
    pub top: Vec<TraceLine>,
}

impl TraceSummary {
    pub fn from_lines(lines: &[TraceLine]) -> TraceSummary {
        let mut skips_by_rule = BTreeMap::new();
        for l in lines.iter().filter(|l| !l.is_eval()) {
            *skips_by_rule.entry(l.rule.clone().unwrap_or_default()).or_insert(0) += 1;
        }
        let count = |prefix: &str| -> usize {
            skips_by_rule
                .iter()
                .filter(|(r, _)| r.starts_with(prefix))
                .map(|(_, n)| n)
                .sum()
        };
        let initial_size = lines.len();
        let post_static_size = initial_size - count("static:");
        let post_dynamic_size = post_static_size - count("monotone:");
        let mut ranked: Vec<&TraceLine> = lines.iter().filter(|l| l.is_eval() && !l.failed()).collect();
        ranked.sort_by(|a, b| {
            let key = |l: &TraceLine| (l.mean_acc.unwrap_or(0.0), l.std.unwrap_or(0.0));
            let (ma, sa) = key(a);
            let (mb, sb) = key(b);
            mb.total_cmp(&ma).then(sa.total_cmp(&sb)).then(a.seq.cmp(&b.seq))
        });
        TraceSummary {
            n_evals: lines.iter().filter(|l| l.is_eval()).count(),
            skips_by_rule,
            initial_size,
            post_static_size,
            post_dynamic_size,
            winner: ranked.first().map(|l| (*l).clone()),
            top: ranked.iter().take(5).map(|l| (*l).clone()).collect(),
        }
    }

    pub fn parse(text: &str) -> Result<TraceSummary, SearchError> {
        let lines = text
            .lines()
            .filter(|l| !l.trim().is_empty())
            .map(|l| serde_json::from_str::<TraceLine>(l).map_err(|e| SearchError::Trace(e.to_string())))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(TraceSummary::from_lines(&lines))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::crossval::EvalRecord;
    use crate::engine::FeatureMask;
    use crate::learners::{ClassifierId, ModelParams, ModelSpec, PerceptronParams};
    use crate::sketchspace::{Assignment, Value};
    use std::time::Duration;

    fn eval(mean: f64, std: f64) -> EvalRecord {
        EvalRecord {
            classifier: ClassifierId::Perceptron,
            assignment: Some(Assignment {
                sketch: ClassifierId::Perceptron,
                values: vec![("eta0".into(), Value::Float(mean))],
            }),
            spec: ModelSpec::new(ModelParams::Perceptron(PerceptronParams::default()), 0),
            mask: FeatureMask::all(2),
            mean_accuracy: mean,
            std_accuracy: std,
            per_fold: vec![mean; 2],
            wall_time: Duration::from_millis(3),
            error: None,
        }
    }

    #[test]
    fn lines_round_trip_and_summarize() {
        let mut l = ResultsLedger::new();
        let a = Assignment {
            sketch: ClassifierId::LinearSvm,
            values: vec![("C".into(), Value::Float(1.0))],
        };
        l.push_skip(a.clone(), "static:not_separable");
        l.push_eval(eval(0.5, 0.1));
        l.push_eval(eval(0.75, 0.0));
        l.push_skip(a.clone(), "monotone:C");
        l.push_skip(a, "budget");
        let mut buf = Vec::new();
        write_trace(&mut buf, &l, false).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 5);
        assert!(text.lines().nth(1).unwrap().contains("\"wall_ms\":null"));
        assert!(text.lines().nth(1).unwrap().contains("\"assignment\":{\"eta0\":0.5}"));
        let s = TraceSummary::parse(&text).unwrap();
        assert_eq!((s.initial_size, s.post_static_size, s.post_dynamic_size), (5, 4, 3));
        assert_eq!(s.n_evals, 2);
        assert_eq!(s.winner.unwrap().seq, 2);
        assert_eq!(s.top.len(), 2);
    }

    #[test]
    fn timing_is_opt_in() {
        let mut l = ResultsLedger::new();
        l.push_eval(eval(0.5, 0.1));
        let line = TraceLine::from_entry(&l.entries()[0], true);
        assert_eq!(line.wall_ms, Some(3.0));
    }
}
