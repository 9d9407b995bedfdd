//! Plain-text reports shaped like the classic summary printout.

use std::fmt::Write;

use meta4diag_core::accuracy::StudyAccuracyTable;
use meta4diag_core::inference::{Quantile, Summary};
use meta4diag_core::priors::PriorTable;

use crate::result::FitResult;

fn quantile_header(p: f64) -> String {
    format!("{p}quant")
}

/// Right-aligned table with a left-aligned row label column.
pub fn format_table(headers: &[String], rows: &[(String, Vec<String>)]) -> String {
    let label_width = rows.iter().map(|(l, _)| l.chars().count()).max().unwrap_or(0);
    let widths: Vec<usize> = headers
        .iter()
        .enumerate()
        .map(|(k, h)| {
            rows.iter()
                .map(|(_, v)| v[k].chars().count())
                .chain([h.chars().count()])
                .max()
                .unwrap_or(0)
        })
        .collect();
    let mut out = String::new();
    let _ = write!(out, "{:label_width$}", "");
    for (h, w) in headers.iter().zip(&widths) {
        let _ = write!(out, " {h:>w$}");
    }
    out.push('\n');
    for (label, values) in rows {
        let _ = write!(out, "{label:<label_width$}");
        for (v, w) in values.iter().zip(&widths) {
            let _ = write!(out, " {v:>w$}");
        }
        out.push('\n');
    }
    out
}

fn summary_table(items: &[Summary], decimals: usize) -> String {
    let probs: Vec<f64> = items
        .first()
        .map(|s| s.quantiles.iter().map(|q| q.p).collect())
        .unwrap_or_default();
    let mut headers = vec!["mean".to_owned(), "sd".to_owned()];
    headers.extend(probs.iter().map(|&p| quantile_header(p)));
    let rows: Vec<(String, Vec<String>)> = items
        .iter()
        .map(|s| {
            let mut v = vec![format!("{:.decimals$}", s.mean), format!("{:.decimals$}", s.sd)];
            v.extend(s.quantiles.iter().map(|q: &Quantile| format!("{:.decimals$}", q.value)));
            (s.name.clone(), v)
        })
        .collect();
    format_table(&headers, &rows)
}

/// Summary block: timings, fixed effects, hyperparameters, summary
/// operating points, intercept correlations and marginal likelihood.
pub fn format_summary(fit: &FitResult) -> String {
    let mut out = String::new();
    let t = fit.timings;
    out.push_str("Time used: \n");
    out.push_str(&format_table(
        &["Pre-processing", "Running", "Post-processing", "Total"].map(String::from),
        &[(
            String::new(),
            [t.pre, t.run, t.post, t.total].iter().map(|v| format!("{v:.7}")).collect(),
        )],
    ));
    out.push_str("\nFixed effects: \n");
    out.push_str(&summary_table(&fit.fixed, 3));
    out.push_str("\nModel hyperpar: \n");
    out.push_str(&summary_table(&fit.hyper, 3));
    if !fit.summary_points.is_empty() {
        out.push_str("\n-------------------\n");
        let mut ordered: Vec<Summary> = fit.summary_points.iter().filter(|s| s.name.starts_with("mean(Se")).cloned().collect();
        ordered.extend(fit.summary_points.iter().filter(|s| s.name.starts_with("mean(Sp")).cloned());
        out.push_str(&summary_table(&ordered, 3));
    }
    out.push_str("\n-------------------\n");
    let names = &fit.marginal_names;
    let levels = fit.mu_nu_correlation.len();
    for (k, c) in fit.mu_nu_correlation.iter().enumerate() {
        let (mu, nu) = (&names[k], &names[k + levels]);
        let _ = writeln!(out, "Correlation between {mu} and {nu} is {:.4}.", c.correlation);
    }
    let _ = writeln!(out, "Marginal log-likelihood: {:.4}", fit.mlik);
    out.push_str("Variable names for marginal plotting: \n");
    let _ = writeln!(out, "      {}", names.join(", "));
    for w in &fit.warnings {
        let _ = writeln!(out, "Warning: {w}");
    }
    out
}

/// Per-study accuracy table with a descriptive heading.
pub fn format_fitted(table: &StudyAccuracyTable) -> String {
    let probs: Vec<f64> = table
        .rows
        .first()
        .map(|r| r.quantiles.iter().map(|q| q.p).collect())
        .unwrap_or_default();
    let mut headers = vec!["mean".to_owned(), "sd".to_owned()];
    headers.extend(probs.iter().map(|&p| quantile_header(p)));
    let rows: Vec<(String, Vec<String>)> = table
        .rows
        .iter()
        .map(|r| {
            let mut v = vec![format!("{:.3}", r.mean), format!("{:.3}", r.sd)];
            v.extend(r.quantiles.iter().map(|q| format!("{:.3}", q.value)));
            (r.study.clone(), v)
        })
        .collect();
    format!(
        "Diagnostic accuracies {}: \n{}",
        table.measure.describe(),
        format_table(&headers, &rows)
    )
}

/// Per-study table as CSV: study, mean, sd, one column per quantile.
pub fn fitted_csv(table: &StudyAccuracyTable) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["study".to_owned(), "mean".to_owned(), "sd".to_owned()];
    if let Some(r) = table.rows.first() {
        header.extend(r.quantiles.iter().map(|q| quantile_header(q.p)));
    }
    w.write_record(&header).expect("in-memory write");
    for r in &table.rows {
        let mut row = vec![r.study.clone(), r.mean.to_string(), r.sd.to_string()];
        row.extend(r.quantiles.iter().map(|q| q.value.to_string()));
        w.write_record(&row).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("UTF-8 output")
}

/// Prior density table as two-column CSV.
pub fn prior_csv(table: &PriorTable) -> String {
    let mut out = format!("{},density\n", table.scale.replace(' ', "_"));
    for (x, d) in table.x.iter().zip(&table.density) {
        let _ = writeln!(out, "{x},{d}");
    }
    out
}
