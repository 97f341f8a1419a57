//! Plain-text report tables.

use super::classification::ClassificationReport;
use super::harness::{EvalReport, Subtask, SubtaskOutcome};

/// Left-aligned first column, right-aligned numeric columns.
pub fn render_table(headers: &[&str], rows: &[Vec<String>]) -> String {
    let cols = headers.len();
    let mut width: Vec<usize> = headers.iter().map(|h| h.chars().count()).collect();
    for row in rows {
        for (i, cell) in row.iter().enumerate().take(cols) {
            width[i] = width[i].max(cell.chars().count());
        }
    }
    let fmt_row = |cells: Vec<&str>| {
        cells
            .iter()
            .enumerate()
            .map(|(i, c)| if i == 0 { format!("{c:<w$}", w = width[i]) } else { format!("{c:>w$}", w = width[i]) })
            .collect::<Vec<_>>()
            .join("  ")
            .trim_end()
            .to_string()
    };
    let mut out = vec![fmt_row(headers.to_vec())];
    out.push(width.iter().map(|w| "-".repeat(*w)).collect::<Vec<_>>().join("  "));
    for row in rows {
        out.push(fmt_row(row.iter().map(String::as_str).collect()));
    }
    out.join("\n") + "\n"
}

fn f3(x: f64) -> String {
    format!("{x:.3}")
}

fn macro_cells(r: &ClassificationReport) -> Vec<String> {
    vec![f3(r.accuracy), f3(r.macro_precision), f3(r.macro_recall), f3(r.macro_f1)]
}

/// Accuracy and macro P/R/F1 for one classification subtask, one row per
/// system.
pub fn macro_table(rows: &[(&str, &ClassificationReport)]) -> String {
    let body: Vec<Vec<String>> = rows
        .iter()
        .map(|(name, r)| std::iter::once(name.to_string()).chain(macro_cells(r)).collect())
        .collect();
    render_table(&["system", "accuracy", "precision", "recall", "f1"], &body)
}

/// Per-label P/R/F1 for the true and false classes.
pub fn verification_table(rows: &[(&str, &ClassificationReport)]) -> String {
    let body: Vec<Vec<String>> = rows
        .iter()
        .map(|(name, r)| {
            let mut row = vec![name.to_string()];
            for label in ["true", "false"] {
                match r.label(label) {
                    Some(s) => row.extend([f3(s.precision), f3(s.recall), f3(s.f1)]),
                    None => row.extend(["-".to_string(), "-".to_string(), "-".to_string()]),
                }
            }
            row
        })
        .collect();
    render_table(&["system", "true-p", "true-r", "true-f1", "false-p", "false-r", "false-f1"], &body)
}

/// Side-by-side text rendering of several reports.
pub fn render_reports(reports: &[EvalReport]) -> String {
    let mut out = String::new();
    for task in Subtask::ALL {
        let present: Vec<(&str, &SubtaskOutcome)> = reports
            .iter()
            .filter_map(|r| r.subtasks.get(&task).map(|o| (r.adapter.as_str(), o)))
            .collect();
        if present.is_empty() {
            continue;
        }
        out.push_str(&format!("== {} ==\n", task.as_str()));
        let classified: Vec<(&str, &ClassificationReport)> = present
            .iter()
            .filter_map(|(n, o)| match o {
                SubtaskOutcome::Classification(r) => Some((*n, r)),
                _ => None,
            })
            .collect();
        if !classified.is_empty() {
            out.push_str(&if task == Subtask::Verification {
                verification_table(&classified)
            } else {
                macro_table(&classified)
            });
        }
        let revisions: Vec<Vec<String>> = present
            .iter()
            .filter_map(|(n, o)| match o {
                SubtaskOutcome::Revision(r) => Some(vec![
                    n.to_string(),
                    r.n.to_string(),
                    f3(r.mean_edit_distance),
                    f3(r.mean_word_overlap),
                    r.mean_cosine_to_human.map_or("-".into(), f3),
                ]),
                _ => None,
            })
            .collect();
        if !revisions.is_empty() {
            out.push_str(&render_table(&["system", "n", "edit-dist", "word-overlap", "cosine-human"], &revisions));
        }
        for (n, o) in &present {
            if let SubtaskOutcome::Skipped { missing_hook } = o {
                out.push_str(&format!("{n}: skipped (no `{missing_hook}` hook)\n"));
            }
        }
        out.push('\n');
    }
    out
}

impl EvalReport {
    pub fn to_text(&self) -> String {
        render_reports(std::slice::from_ref(self))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn aligned_columns() {
        let t = render_table(&["a", "bb"], &[vec!["long name".into(), "1".into()]]);
        let lines: Vec<&str> = t.lines().collect();
        assert_eq!(lines[0], "a          bb");
        assert_eq!(lines[2], "long name   1");
    }
}
