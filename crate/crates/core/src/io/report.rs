//! Markdown run summary assembled from the artifacts in an output directory.

use std::fmt::Write as _;
use std::path::Path;

use super::read_table;
use crate::error::{Error, Result};

/// Files that must exist before a report is written.
pub const REQUIRED: &[&str] = &["draws.csv", "diagnostics.csv"];

/// Optional sections: (file, heading, row limit).
const TABLES: &[(&str, &str, usize)] = &[
    ("sampler_stats.csv", "Sampler", 16),
    ("state_table.csv", "Per-state summary", 32),
    ("seasonal.csv", "Seasonal effects", 12),
    ("changepoint_summary.csv", "Change point", 8),
    ("elpd_compare.csv", "Held-out predictive comparison", 16),
];

const FIGURES: &[(&str, &str)] = &[
    ("proportion_series.svg", "Proportion of sites with a positive outcome"),
    ("missingness_curves.svg", "Missingness probability by state"),
    ("seasonal.svg", "Monthly seasonal effect"),
    ("changepoint.svg", "Change-point distribution"),
];

fn markdown_table(header: &[String], rows: &[Vec<String>], limit: usize) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "| {} |", header.join(" | "));
    let _ = writeln!(out, "|{}", "---|".repeat(header.len()));
    for row in rows.iter().take(limit) {
        let cells: Vec<String> = row.iter().map(|c| shorten(c)).collect();
        let _ = writeln!(out, "| {} |", cells.join(" | "));
    }
    if rows.len() > limit {
        let _ = writeln!(out, "\n{} of {} rows shown.", limit, rows.len());
    }
    out
}

/// Long-form floats are rounded for display; everything else passes through.
fn shorten(cell: &str) -> String {
    match cell.parse::<f64>() {
        Ok(v) if cell.contains('e') || cell.contains('.') => format!("{v:.4}"),
        _ => cell.to_string(),
    }
}

/// Diagnostics headline: worst R-hat and smallest bulk ESS.
fn diagnostics_headline(header: &[String], rows: &[Vec<String>]) -> String {
    let col = |name: &str| header.iter().position(|h| h == name);
    let worst = |idx: Option<usize>, pick_max: bool| -> Option<(String, f64)> {
        let idx = idx?;
        rows.iter()
            .filter_map(|r| Some((r[0].clone(), r.get(idx)?.parse::<f64>().ok()?)))
            .filter(|(_, v)| v.is_finite())
            .max_by(|a, b| if pick_max { a.1.total_cmp(&b.1) } else { b.1.total_cmp(&a.1) })
    };
    let mut out = format!("{} parameters summarized.", rows.len());
    if let Some((p, v)) = worst(col("rhat"), true) {
        let _ = write!(out, " Largest R-hat {v:.4} ({p}).");
    }
    if let Some((p, v)) = worst(col("ess_bulk"), false) {
        let _ = write!(out, " Smallest bulk ESS {v:.0} ({p}).");
    }
    out
}

/// Builds `report.md` in `dir` and returns its contents.
pub fn write_report(dir: &Path) -> Result<String> {
    let missing: Vec<&str> = REQUIRED.iter().copied().filter(|f| !dir.join(f).is_file()).collect();
    if !missing.is_empty() {
        return Err(Error::MissingArtifacts { dir: dir.to_path_buf(), missing: missing.join(", ") });
    }
    let mut md = String::from("# Run report\n\n");

    let (header, rows) = read_table(&dir.join("diagnostics.csv"))?;
    let _ = writeln!(md, "## Posterior summary\n\n{}\n", diagnostics_headline(&header, &rows));
    let headline: Vec<Vec<String>> = rows.iter().filter(|r| !is_field_param(&r[0])).cloned().collect();
    md.push_str(&markdown_table(&header, &headline, 64));
    md.push('\n');

    for (file, heading, limit) in TABLES {
        let path = dir.join(file);
        if path.is_file() {
            let (h, r) = read_table(&path)?;
            let _ = writeln!(md, "## {heading}\n");
            md.push_str(&markdown_table(&h, &r, *limit));
            md.push('\n');
        }
    }
    let figures: Vec<_> = FIGURES.iter().filter(|(f, _)| dir.join(f).is_file()).collect();
    if !figures.is_empty() {
        md.push_str("## Figures\n\n");
        for (file, caption) in figures {
            let _ = writeln!(md, "![{caption}]({file})\n");
        }
    }
    let path = dir.join("report.md");
    std::fs::write(&path, &md).map_err(|e| Error::io(&path, e))?;
    Ok(md)
}

/// Site-level effects are left to the CSV; the report lists global parameters.
fn is_field_param(name: &str) -> bool {
    name.starts_with("lambda[") || name.starts_with("phi[")
}
