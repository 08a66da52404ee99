//! Evaluation report rendering: aligned text tables, a parse-friendly
//! CSV schema, and JSON. The timestamp is confined to a single header
//! line in every format, so seeded runs stay byte-comparable after
//! dropping that line.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use serde_json::json;

use crate::error::{Error, Result};
use crate::eval::{BenchmarkReport, ConfusionMatrix, EvaluationReport, MetricsReport};
use crate::pipeline::config::Method;

/// Output encoding for evaluation reports.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Text,
    Csv,
    Json,
}

impl ReportFormat {
    pub fn parse(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "text" => Ok(ReportFormat::Text),
            "csv" => Ok(ReportFormat::Csv),
            "json" => Ok(ReportFormat::Json),
            other => Err(Error::Parameter(format!(
                "unknown report format '{other}' (expected text|csv|json)"
            ))),
        }
    }
}

fn timestamp() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

fn metric_table(out: &mut String, names: &[String], metrics: &MetricsReport) {
    let width = names.iter().map(|n| n.len()).max().unwrap_or(5).max(5);
    let _ = writeln!(
        out,
        "{:width$}  {:>9}  {:>11}  {:>11}",
        "class", "accuracy", "sensitivity", "specificity"
    );
    for (name, m) in names.iter().zip(&metrics.per_class) {
        let _ = writeln!(
            out,
            "{:width$}  {:>9.3}  {:>11.3}  {:>11.3}",
            name, m.accuracy, m.sensitivity, m.specificity
        );
    }
}

fn confusion_table(out: &mut String, cm: &ConfusionMatrix) {
    let names = cm.class_names();
    let width = names
        .iter()
        .map(|n| n.len())
        .max()
        .unwrap_or(5)
        .max(6);
    let _ = write!(out, "{:width$}", "");
    for n in names {
        let _ = write!(out, "  {n:>width$}");
    }
    out.push('\n');
    for (a, n) in names.iter().enumerate() {
        let _ = write!(out, "{n:width$}");
        for p in 0..names.len() {
            let _ = write!(out, "  {:>width$}", cm.get(a, p));
        }
        out.push('\n');
    }
}

/// Renders the human-readable text report.
pub fn render_text(report: &EvaluationReport) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "# generated_unix: {}", timestamp());
    let _ = writeln!(out, "method: {}", report.method);
    let _ = writeln!(out, "folds: {}", report.k_folds);
    let _ = writeln!(out, "seed: {}", report.seed);
    let _ = writeln!(out, "classes: {}", report.class_names.join(", "));
    out.push('\n');
    let _ = writeln!(out, "cumulative confusion matrix (rows actual, cols predicted)");
    confusion_table(&mut out, &report.cumulative);
    out.push('\n');
    let _ = writeln!(out, "per-class metrics (cumulative confusion matrix)");
    metric_table(&mut out, &report.class_names, &report.cumulative_metrics);
    let _ = writeln!(
        out,
        "overall accuracy (cumulative): {:.3}",
        report.cumulative_metrics.overall_accuracy
    );
    out.push('\n');
    let _ = writeln!(out, "per-class metrics (mean over folds)");
    metric_table(&mut out, &report.class_names, &report.fold_mean_metrics);
    let _ = writeln!(
        out,
        "overall accuracy (mean over folds): {:.3}",
        report.fold_mean_metrics.overall_accuracy
    );
    out.push('\n');
    let accs: Vec<String> = report
        .folds
        .iter()
        .map(|f| format!("{:.3}", f.metrics.overall_accuracy))
        .collect();
    let _ = writeln!(out, "per-fold overall accuracy: {}", accs.join(" "));
    out
}

/// Renders the CSV report. Metric rows are informational; the fold
/// confusion matrices carry everything needed to rebuild the report.
pub fn render_csv(report: &EvaluationReport) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "# generated_unix: {}", timestamp());
    let _ = writeln!(out, "record,field1,field2,field3,value");
    let _ = writeln!(out, "meta,method,,,{}", report.method);
    let _ = writeln!(out, "meta,seed,,,{}", report.seed);
    let _ = writeln!(out, "meta,k_folds,,,{}", report.k_folds);
    for (i, name) in report.class_names.iter().enumerate() {
        let _ = writeln!(out, "class,{i},,,{name}");
    }
    for fold in &report.folds {
        for a in 0..report.class_names.len() {
            for p in 0..report.class_names.len() {
                let _ = writeln!(
                    out,
                    "cm,fold{},{a},{p},{}",
                    fold.fold,
                    fold.confusion.get(a, p)
                );
            }
        }
    }
    for a in 0..report.class_names.len() {
        for p in 0..report.class_names.len() {
            let _ = writeln!(out, "cm,cumulative,{a},{p},{}", report.cumulative.get(a, p));
        }
    }
    let scopes: Vec<(String, &MetricsReport)> = std::iter::once((
        "cumulative".to_string(),
        &report.cumulative_metrics,
    ))
    .chain(std::iter::once((
        "fold_mean".to_string(),
        &report.fold_mean_metrics,
    )))
    .chain(
        report
            .folds
            .iter()
            .map(|f| (format!("fold{}", f.fold), &f.metrics)),
    )
    .collect();
    for (scope, metrics) in scopes {
        for (i, m) in metrics.per_class.iter().enumerate() {
            let _ = writeln!(out, "metric,{scope},{i},accuracy,{}", m.accuracy);
            let _ = writeln!(out, "metric,{scope},{i},sensitivity,{}", m.sensitivity);
            let _ = writeln!(out, "metric,{scope},{i},specificity,{}", m.specificity);
        }
        let _ = writeln!(out, "overall,{scope},,,{}", metrics.overall_accuracy);
    }
    out
}

/// Renders the JSON report.
pub fn render_json(report: &EvaluationReport) -> String {
    let metrics_json = |m: &MetricsReport| {
        json!({
            "overall_accuracy": m.overall_accuracy,
            "per_class": report.class_names.iter().zip(&m.per_class).map(|(name, pm)| {
                json!({
                    "class": name,
                    "accuracy": pm.accuracy,
                    "sensitivity": pm.sensitivity,
                    "specificity": pm.specificity,
                })
            }).collect::<Vec<_>>(),
        })
    };
    let cm_json = |cm: &ConfusionMatrix| {
        (0..report.class_names.len())
            .map(|a| {
                (0..report.class_names.len())
                    .map(|p| cm.get(a, p))
                    .collect::<Vec<_>>()
            })
            .collect::<Vec<_>>()
    };
    let value = json!({
        "generated_unix": timestamp(),
        "method": report.method.name(),
        "seed": report.seed,
        "k_folds": report.k_folds,
        "classes": report.class_names,
        "cumulative_confusion": cm_json(&report.cumulative),
        "cumulative_metrics": metrics_json(&report.cumulative_metrics),
        "fold_mean_metrics": metrics_json(&report.fold_mean_metrics),
        "folds": report.folds.iter().map(|f| json!({
            "fold": f.fold,
            "confusion": cm_json(&f.confusion),
            "metrics": metrics_json(&f.metrics),
        })).collect::<Vec<_>>(),
    });
    serde_json::to_string_pretty(&value).expect("report serialization cannot fail")
}

/// Renders a report in the requested format.
pub fn render_report(report: &EvaluationReport, format: ReportFormat) -> String {
    match format {
        ReportFormat::Text => render_text(report),
        ReportFormat::Csv => render_csv(report),
        ReportFormat::Json => render_json(report),
    }
}

/// Writes a report to `path`.
pub fn write_report(report: &EvaluationReport, path: &Path, format: ReportFormat) -> Result<()> {
    fs::write(path, render_report(report, format))?;
    Ok(())
}

/// Rebuilds an [`EvaluationReport`] from its CSV rendering. Metric rows
/// are recomputed from the fold confusion matrices, so a parse-back
/// compares equal to the in-memory report.
pub fn read_report_csv(path: &Path) -> Result<EvaluationReport> {
    let text = fs::read_to_string(path)?;
    parse_report_csv(&text)
}

/// [`read_report_csv`] over an in-memory string.
pub fn parse_report_csv(text: &str) -> Result<EvaluationReport> {
    let mut method: Option<Method> = None;
    let mut seed: Option<u64> = None;
    let mut k_folds: Option<usize> = None;
    let mut classes: Vec<(usize, String)> = Vec::new();
    let mut cells: Vec<(usize, usize, usize, u64)> = Vec::new();

    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') || line.starts_with("record,") {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        let bad = |what: &str| {
            Error::Parse(format!("report csv line {}: bad {what}", lineno + 1))
        };
        match fields[0] {
            "meta" => {
                if fields.len() != 5 {
                    return Err(bad("meta row"));
                }
                match fields[1] {
                    "method" => method = Some(fields[4].parse()?),
                    "seed" => seed = Some(fields[4].parse().map_err(|_| bad("seed"))?),
                    "k_folds" => {
                        k_folds = Some(fields[4].parse().map_err(|_| bad("k_folds"))?)
                    }
                    _ => return Err(bad("meta key")),
                }
            }
            "class" => {
                if fields.len() != 5 {
                    return Err(bad("class row"));
                }
                let idx: usize = fields[1].parse().map_err(|_| bad("class index"))?;
                classes.push((idx, fields[4].to_string()));
            }
            "cm" => {
                if fields.len() != 5 {
                    return Err(bad("cm row"));
                }
                let scope = fields[1];
                if scope == "cumulative" {
                    continue; // derived from the folds
                }
                let fold: usize = scope
                    .strip_prefix("fold")
                    .and_then(|s| s.parse().ok())
                    .ok_or_else(|| bad("cm scope"))?;
                let a: usize = fields[2].parse().map_err(|_| bad("actual index"))?;
                let p: usize = fields[3].parse().map_err(|_| bad("predicted index"))?;
                let v: u64 = fields[4].parse().map_err(|_| bad("count"))?;
                cells.push((fold, a, p, v));
            }
            "metric" | "overall" => {} // informational, recomputed
            other => {
                return Err(Error::Parse(format!(
                    "report csv line {}: unknown record '{other}'",
                    lineno + 1
                )))
            }
        }
    }

    let method = method.ok_or_else(|| Error::Parse("report csv: missing method".into()))?;
    let seed = seed.ok_or_else(|| Error::Parse("report csv: missing seed".into()))?;
    let k = k_folds.ok_or_else(|| Error::Parse("report csv: missing k_folds".into()))?;
    classes.sort_by_key(|(i, _)| *i);
    let class_names: Vec<String> = classes.into_iter().map(|(_, n)| n).collect();
    if class_names.is_empty() {
        return Err(Error::Parse("report csv: no classes".into()));
    }
    let c = class_names.len();
    let mut counts = vec![vec![0u64; c * c]; k];
    for (fold, a, p, v) in cells {
        if fold >= k || a >= c || p >= c {
            return Err(Error::Parse("report csv: cm index out of range".into()));
        }
        counts[fold][a * c + p] = v;
    }
    let confusions = counts
        .into_iter()
        .map(|data| ConfusionMatrix::from_counts(class_names.clone(), data))
        .collect::<Result<Vec<_>>>()?;
    EvaluationReport::from_fold_confusions(method, class_names, seed, confusions)
}

/// Renders benchmark timings as a small text table.
pub fn render_benchmark(report: &BenchmarkReport) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "# generated_unix: {}", timestamp());
    let _ = writeln!(out, "{:<10} {:>12} {:>9}", "method", "seconds", "samples");
    for e in &report.entries {
        let _ = writeln!(
            out,
            "{:<10} {:>12.4} {:>9}",
            e.method.name(),
            e.seconds,
            e.samples
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::ConfusionMatrix;

    fn toy_report() -> EvaluationReport {
        let names = vec!["alpha".into(), "beta".into()];
        let cms = vec![
            ConfusionMatrix::from_counts(names.clone(), vec![9, 1, 2, 8]).unwrap(),
            ConfusionMatrix::from_counts(names.clone(), vec![10, 0, 0, 10]).unwrap(),
        ];
        EvaluationReport::from_fold_confusions(Method::Crc, names, 7, cms).unwrap()
    }

    fn identity_report() -> EvaluationReport {
        let names = vec!["a".into(), "b".into(), "c".into()];
        let cm = ConfusionMatrix::from_counts(
            names.clone(),
            vec![4, 0, 0, 0, 4, 0, 0, 0, 4],
        )
        .unwrap();
        EvaluationReport::from_fold_confusions(Method::Knn, names, 1, vec![cm]).unwrap()
    }

    #[test]
    fn identity_matrix_renders_all_ones() {
        let text = render_text(&identity_report());
        assert!(text.contains("1.000"));
        assert!(!text.contains("0.9"));
        assert!(text.contains("overall accuracy (cumulative): 1.000"));
    }

    #[test]
    fn reference_counts_render_expected_sensitivities() {
        let names: Vec<String> = vec![
            "Bacterial".into(),
            "Viral".into(),
            "Normal".into(),
            "Covid-19".into(),
        ];
        let cm = ConfusionMatrix::from_counts(
            names.clone(),
            vec![
                1818, 636, 180, 126, 338, 959, 127, 61, 15, 71, 1428, 65, 0, 3, 4, 455,
            ],
        )
        .unwrap();
        let report =
            EvaluationReport::from_fold_confusions(Method::Csen2, names, 1, vec![cm]).unwrap();
        let text = render_text(&report);
        for expected in ["0.659", "0.646", "0.904", "0.985"] {
            assert!(text.contains(expected), "missing {expected} in:\n{text}");
        }
    }

    #[test]
    fn csv_roundtrip_is_exact() {
        let report = toy_report();
        let csv = render_csv(&report);
        let parsed = parse_report_csv(&csv).unwrap();
        assert_eq!(parsed, report);
    }

    #[test]
    fn csv_write_read_file_roundtrip() {
        let report = toy_report();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("report.csv");
        write_report(&report, &path, ReportFormat::Csv).unwrap();
        let parsed = read_report_csv(&path).unwrap();
        assert_eq!(parsed, report);
    }

    #[test]
    fn timestamp_is_one_header_line() {
        let report = toy_report();
        for format in [ReportFormat::Text, ReportFormat::Csv, ReportFormat::Json] {
            let rendered = render_report(&report, format);
            let stamped: Vec<&str> = rendered
                .lines()
                .filter(|l| l.contains("generated_unix"))
                .collect();
            assert_eq!(stamped.len(), 1, "format {format:?}");
        }
    }

    #[test]
    fn json_contains_structure() {
        let report = toy_report();
        let text = render_json(&report);
        let value: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert_eq!(value["method"], "crc");
        assert_eq!(value["folds"].as_array().unwrap().len(), 2);
        assert_eq!(value["cumulative_confusion"][0][0], 19);
    }

    #[test]
    fn format_names_parse() {
        assert_eq!(ReportFormat::parse("text").unwrap(), ReportFormat::Text);
        assert_eq!(ReportFormat::parse("CSV").unwrap(), ReportFormat::Csv);
        assert!(ReportFormat::parse("yaml").is_err());
    }
}
