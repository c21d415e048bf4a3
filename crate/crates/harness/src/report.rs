//! Merges summary files into one table.

use std::path::Path;

use wignerlab_core::verify::Verdict;

use crate::run::{Summary, SummaryRow};

#[derive(Debug, thiserror::Error)]
pub enum ReportError {
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("{path} is not a valid summary: {source}")]
    Parse { path: String, source: serde_json::Error },
}

pub fn load(path: &Path) -> Result<Summary, ReportError> {
    let p = path.display().to_string();
    let text = std::fs::read_to_string(path).map_err(|source| ReportError::Io { path: p.clone(), source })?;
    serde_json::from_str(&text).map_err(|source| ReportError::Parse { path: p, source })
}

fn verdict_cell(v: Option<Verdict>) -> &'static str {
    match v {
        Some(Verdict::Pass) => "PASS",
        Some(Verdict::Fail) => "**FAIL**",
        None => "",
    }
}

/// Markdown table of all rows sorted by `(experiment, N)`, rows without `N`
/// last within an experiment, followed by one verdict line per summary.
pub fn render(summaries: &[Summary]) -> String {
    let mut rows: Vec<&SummaryRow> = summaries.iter().flat_map(|s| &s.rows).collect();
    rows.sort_by(|a, b| (&a.experiment, a.n.is_none(), a.n).cmp(&(&b.experiment, b.n.is_none(), b.n)));
    let mut out = String::from("| experiment | N | z | statistic | value | criterion | verdict |\n|---|---|---|---|---|---|---|\n");
    for r in rows {
        out += &format!(
            "| {} | {} | {} | {} | {:.6e} | {} | {} |\n",
            r.experiment,
            r.n.map(|n| n.to_string()).unwrap_or_default(),
            r.z.as_deref().unwrap_or(""),
            r.statistic,
            r.value,
            r.criterion,
            verdict_cell(r.verdict)
        );
    }
    out.push('\n');
    for s in summaries {
        let label = s.name.as_deref().unwrap_or(s.experiment.name());
        let mark = if s.verdict.passed() { "PASS" } else { "FAIL" };
        out += &format!("{mark} {label} (seed {}, config {})\n", s.seed, &s.config_hash[..12.min(s.config_hash.len())]);
        for w in &s.warnings {
            out += &format!("  warning: {w}\n");
        }
    }
    out
}

pub fn all_pass(summaries: &[Summary]) -> bool {
    summaries.iter().all(|s| s.verdict.passed())
}
