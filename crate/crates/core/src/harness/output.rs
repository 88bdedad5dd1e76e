use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::{ExperimentOutput, HarnessError, Summary};

pub const RESULTS_JSONL: &str = "results.jsonl";
pub const FAILURES_JSONL: &str = "failures.jsonl";
pub const SUMMARY_JSON: &str = "summary.json";
pub const ROUNDS_CSV: &str = "rounds.csv";
pub const REGEN_CSV: &str = "regen.csv";

fn csv_error(e: csv::Error) -> HarnessError {
    HarnessError::Io(std::io::Error::other(e))
}

/// Writes results.jsonl, failures.jsonl, summary.json, rounds.csv and
/// regen.csv into `dir`. Only results.jsonl carries wall-clock times, so
/// the other files are reproducible across runs.
pub fn write_outputs(dir: &Path, output: &ExperimentOutput, summary: &Summary) -> Result<(), HarnessError> {
    fs::create_dir_all(dir)?;
    let jsonl = |items: Vec<String>| items.into_iter().map(|l| l + "\n").collect::<String>();
    fs::write(
        dir.join(RESULTS_JSONL),
        jsonl(output.results.iter().map(|r| serde_json::to_string(r).expect("serializes")).collect()),
    )?;
    fs::write(
        dir.join(FAILURES_JSONL),
        jsonl(output.failures.iter().map(|f| serde_json::to_string(f).expect("serializes")).collect()),
    )?;
    let mut summary_json = serde_json::to_string_pretty(summary).expect("summary serializes");
    summary_json.push('\n');
    fs::write(dir.join(SUMMARY_JSON), summary_json)?;

    let mut rounds = csv::Writer::from_path(dir.join(ROUNDS_CSV)).map_err(csv_error)?;
    for r in &summary.rounds {
        rounds.serialize(r).map_err(csv_error)?;
    }
    rounds.flush()?;
    let mut regen = csv::Writer::from_path(dir.join(REGEN_CSV)).map_err(csv_error)?;
    for b in &summary.regen_histogram {
        regen.serialize(b).map_err(csv_error)?;
    }
    regen.flush()?;
    Ok(())
}

fn opt(x: Option<f64>) -> String {
    x.map_or_else(|| "-".to_string(), |v| format!("{v:+.1}"))
}

/// Aligned plain-text table of the per-(method, budget) means.
pub fn render_table(summary: &Summary) -> String {
    let header = ["method", "K", "tasks", "struct%", "attr%", "d_struct", "d_attr", "regens"];
    let rows: Vec<[String; 8]> = summary
        .groups
        .iter()
        .map(|g| {
            [
                g.method.to_string(),
                g.budget_k.to_string(),
                g.tasks.to_string(),
                format!("{:.1}", g.mean_structure_pct),
                format!("{:.1}", g.mean_attribute_pct),
                opt(g.delta_structure_pct),
                opt(g.delta_attribute_pct),
                format!("{:.2}", g.mean_regen_count),
            ]
        })
        .collect();
    let mut widths: Vec<usize> = header.iter().map(|h| h.len()).collect();
    for row in &rows {
        for (w, cell) in widths.iter_mut().zip(row) {
            *w = (*w).max(cell.len());
        }
    }
    let mut out = String::new();
    let line = |out: &mut String, cells: &[&str]| {
        let parts: Vec<String> = cells
            .iter()
            .enumerate()
            .map(|(i, c)| if i == 0 { format!("{c:<w$}", w = widths[i]) } else { format!("{c:>w$}", w = widths[i]) })
            .collect();
        let _ = writeln!(out, "{}", parts.join("  ").trim_end());
    };
    line(&mut out, &header);
    let _ = writeln!(out, "{}", "-".repeat(widths.iter().sum::<usize>() + 2 * (widths.len() - 1)));
    for row in &rows {
        line(&mut out, &row.iter().map(String::as_str).collect::<Vec<_>>());
    }
    let _ = writeln!(out, "deltas vs {}; scores are means over tasks", summary.reference_method);
    out
}
