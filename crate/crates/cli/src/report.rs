use std::fmt::Write;
use std::time::Duration;

use sketchml::engine::{TraceLine, TraceSummary};
use sketchml::DatasetProfile;

/// "C=10, kernel=rbf" from a trace line's assignment object.
pub fn hyperparameters(line: &TraceLine) -> String {
    match &line.assignment {
        serde_json::Value::Object(map) => map
            .iter()
            .map(|(k, v)| match v {
                serde_json::Value::String(s) => format!("{k}={s}"),
                other => format!("{k}={other}"),
            })
            .collect::<Vec<_>>()
            .join(", "),
        serde_json::Value::Null => String::new(),
        other => other.to_string(),
    }
}

fn percent(removed: usize, of: usize) -> f64 {
    if of == 0 {
        0.0
    } else {
        100.0 * removed as f64 / of as f64
    }
}

/// Everything but the profile and the clock comes from the trace summary.
pub fn render(profile: &DatasetProfile, summary: &TraceSummary, elapsed: Duration) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "dataset");
    let _ = writeln!(s, "  instances     {}", profile.n_instances);
    let _ = writeln!(s, "  features      {}", profile.n_features);
    let _ = writeln!(s, "  classes       {}", profile.n_classes);
    let verdict = match profile.separability {
        Some(sketchml::Separability::Separable) => "separable",
        Some(sketchml::Separability::NotSeparable) => "not separable",
        None => "unknown",
    };
    let _ = write!(s, "  separability  {verdict}");
    if let Some(p) = profile.probe_accuracy {
        let _ = write!(s, " (perceptron {p:.4}");
        if let Some(c) = profile.confirm_accuracy {
            let _ = write!(s, ", linear svm {c:.4}");
        }
        s.push(')');
    }
    s.push('\n');

    let (init, post_static, post_dynamic) =
        (summary.initial_size, summary.post_static_size, summary.post_dynamic_size);
    let _ = writeln!(s, "\nsearch space");
    let _ = writeln!(s, "  initial       {init}");
    let _ = writeln!(
        s,
        "  post-static   {post_static} (-{:.1}%)",
        percent(init - post_static, init)
    );
    let _ = writeln!(
        s,
        "  post-dynamic  {post_dynamic} (-{:.1}% of post-static, -{:.1}% overall)",
        percent(post_static - post_dynamic, post_static),
        percent(init - post_dynamic, init)
    );
    let _ = writeln!(s, "  evaluated     {}", summary.n_evals);
    for (rule, n) in &summary.skips_by_rule {
        let _ = writeln!(s, "  skipped       {n} by {rule}");
    }

    let _ = writeln!(s, "\ntop {}", summary.top.len());
    for (rank, line) in summary.top.iter().enumerate() {
        let _ = writeln!(
            s,
            "  {}. {:.4} +/- {:.4}  {}({})  [#{}]",
            rank + 1,
            line.mean_acc.unwrap_or(0.0),
            line.std.unwrap_or(0.0),
            line.classifier,
            hyperparameters(line),
            line.seq
        );
    }

    let _ = writeln!(s, "\nwinner");
    match &summary.winner {
        Some(w) => {
            let _ = writeln!(s, "  classifier    {}", w.classifier);
            let _ = writeln!(s, "  params        {}", hyperparameters(w));
            let _ = writeln!(
                s,
                "  cv accuracy   {:.4} +/- {:.4}",
                w.mean_acc.unwrap_or(0.0),
                w.std.unwrap_or(0.0)
            );
        }
        None => {
            let _ = writeln!(s, "  none");
        }
    }
    let _ = writeln!(s, "\nwall time       {:.2}s", elapsed.as_secs_f64());
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line(seq: usize, acc: f64) -> TraceLine {
        TraceLine {
            seq,
            kind: "eval".into(),
            classifier: "kernel_svm".into(),
            assignment: serde_json::json!({"kernel": "rbf", "C": 10}),
            mean_acc: Some(acc),
            std: Some(0.01),
            per_fold: Some(vec![acc; 5]),
            rule: None,
            wall_ms: None,
        }
    }

    #[test]
    fn renders_sizes_and_winner() {
        let mut skip = line(0, 0.0);
        skip.kind = "skip".into();
        skip.mean_acc = None;
        skip.rule = Some("static:multiclass".into());
        let lines = vec![skip, line(1, 0.7), line(2, 0.8)];
        let summary = TraceSummary::from_lines(&lines);
        let profile = DatasetProfile {
            n_instances: 10,
            n_features: 2,
            n_classes: 3,
            is_binary: false,
            separability: None,
            probe_accuracy: None,
            confirm_accuracy: None,
        };
        let text = render(&profile, &summary, Duration::from_millis(1500));
        assert!(text.contains("initial       3"));
        assert!(text.contains("post-static   2 (-33.3%)"));
        assert!(text.contains("params        C=10, kernel=rbf"));
        assert!(text.contains("1. 0.8000"));
        assert!(text.contains("wall time       1.50s"));
    }
}
