//! CSV reading and writing.
//!
//! All CSVs are hand-rolled: comma-separated, no quoting (no field we emit
//! ever contains a comma), one header line, then data rows. Floats are
//! written with Rust's `{}` formatting, the shortest string that parses
//! back to the same bits. Absent values are empty cells. Lines starting
//! with `#` are comments; the run CSV has none, the gradient-histogram CSV
//! uses one to carry the exact-zero count.

use szo_core::metrics::{GradHistogram, MetricsRow, RunRecord};

use crate::CliError;

/// Column order of a run CSV, fixed across the tool.
pub const RUN_COLUMNS: [&str; 10] = [
    "step",
    "examples_seen",
    "fevals",
    "sparsity",
    "train_loss",
    "cum_loss",
    "grad_dist",
    "L_local",
    "L_neighbor",
    "test_acc",
];

/// Shortest round-trip rendering of a float.
pub fn fmt_f64(x: f64) -> String {
    format!("{x}")
}

/// Empty string for an absent value.
pub fn fmt_opt(x: Option<f64>) -> String {
    match x {
        Some(v) => fmt_f64(v),
        None => String::new(),
    }
}

/// One run CSV line (no trailing newline).
fn row_line(row: &MetricsRow) -> String {
    [
        row.step.to_string(),
        row.examples_seen.to_string(),
        row.fevals.to_string(),
        fmt_f64(row.sparsity),
        fmt_f64(row.train_loss),
        fmt_f64(row.cum_loss),
        fmt_opt(row.grad_dist),
        fmt_opt(row.l_local),
        fmt_opt(row.l_neighbor),
        fmt_opt(row.test_acc),
    ]
    .join(",")
}

/// Renders a run record as CSV text: header then one line per step.
pub fn run_csv(record: &RunRecord) -> String {
    let mut text = RUN_COLUMNS.join(",");
    text.push('\n');
    for row in &record.rows {
        text.push_str(&row_line(row));
        text.push('\n');
    }
    text
}

/// Renders a gradient histogram: a comment with the exact-zero count, a
/// header, then one `bin_lo,bin_hi,count` line per bin.
pub fn grad_hist_csv(hist: &GradHistogram) -> String {
    let mut text = format!("# exact_zero_coordinates = {}\n", hist.zero_count);
    text.push_str("bin_lo,bin_hi,count\n");
    for (i, &count) in hist.counts.iter().enumerate() {
        text.push_str(&format!(
            "{},{},{}\n",
            fmt_f64(hist.edges[i]),
            fmt_f64(hist.edges[i + 1]),
            count
        ));
    }
    text
}

/// Renders an arbitrary table: header then rows, all cells pre-formatted.
pub fn table_csv(header: &[String], rows: &[Vec<String>]) -> String {
    let mut text = header.join(",");
    text.push('\n');
    for row in rows {
        text.push_str(&row.join(","));
        text.push('\n');
    }
    text
}

/// A numeric CSV read back in: column names plus rows of optional floats
/// (empty cells become `None`).
#[derive(Debug, Clone, PartialEq)]
pub struct CsvData {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Option<f64>>>,
}

impl CsvData {
    /// Index of a column by name.
    pub fn column(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    /// All present `(row_index, value)` pairs of one column.
    pub fn series(&self, col: usize) -> Vec<(usize, f64)> {
        self.rows
            .iter()
            .enumerate()
            .filter_map(|(i, row)| row.get(col).copied().flatten().map(|v| (i, v)))
            .collect()
    }
}

/// Parses CSV text produced by this tool: `#` comment lines are skipped,
/// the first remaining line is the header, and every cell must be empty or
/// a number. Ragged rows and non-numeric cells are reported by position.
pub fn parse_numeric_csv(text: &str) -> Result<CsvData, CliError> {
    let mut lines = text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim_start().starts_with('#') && !l.trim().is_empty());
    let Some((_, header)) = lines.next() else {
        return Err(CliError::Config("csv has no header line".into()));
    };
    let columns: Vec<String> = header.split(',').map(|c| c.trim().to_string()).collect();
    let mut rows = Vec::new();
    for (idx, line) in lines {
        let line_no = idx + 1;
        let cells: Vec<&str> = line.split(',').collect();
        if cells.len() != columns.len() {
            return Err(CliError::Config(format!(
                "csv line {line_no}: {} cells, header has {}",
                cells.len(),
                columns.len()
            )));
        }
        let mut row = Vec::with_capacity(cells.len());
        for (col, cell) in cells.iter().enumerate() {
            let cell = cell.trim();
            if cell.is_empty() {
                row.push(None);
            } else {
                let value: f64 = cell.parse().map_err(|_| {
                    CliError::Config(format!(
                        "csv line {line_no}, column '{}': '{cell}' is not a number",
                        columns[col]
                    ))
                })?;
                row.push(Some(value));
            }
        }
        rows.push(row);
    }
    Ok(CsvData { columns, rows })
}

#[cfg(test)]
mod tests {
    use super::*;
    use szo_core::metrics::{RunMeta, RunRecord};

    fn record_with_rows(rows: Vec<MetricsRow>) -> RunRecord {
        let mut record = RunRecord::new(RunMeta {
            config_hash: "deadbeef".into(),
            seed: 1,
            objective_id: "test".into(),
        });
        for row in rows {
            record.push(row).unwrap();
        }
        record
    }

    fn sample_row(step: u64, cum: f64) -> MetricsRow {
        MetricsRow {
            step,
            examples_seen: step * 8,
            fevals: (step + 1) * 20,
            sparsity: 0.25,
            train_loss: 1.5,
            cum_loss: cum,
            grad_dist: Some(0.1),
            l_local: None,
            l_neighbor: if step == 0 { Some(3.0) } else { None },
            test_acc: if step == 0 { Some(0.5) } else { None },
        }
    }

    #[test]
    fn run_csv_has_fixed_header_and_empty_absent_cells() {
        let record = record_with_rows(vec![sample_row(0, 1.5), sample_row(1, 3.0)]);
        let text = run_csv(&record);
        let mut lines = text.lines();
        assert_eq!(
            lines.next().unwrap(),
            "step,examples_seen,fevals,sparsity,train_loss,cum_loss,grad_dist,L_local,L_neighbor,test_acc"
        );
        assert_eq!(lines.next().unwrap(), "0,0,20,0.25,1.5,1.5,0.1,,3,0.5");
        assert_eq!(lines.next().unwrap(), "1,8,40,0.25,1.5,3,0.1,,,");
        assert!(lines.next().is_none());
    }

    #[test]
    fn floats_round_trip_through_display() {
        for x in [0.1, 1.0 / 3.0, 2.5e-17, -1234.5678, f64::MIN_POSITIVE] {
            let text = fmt_f64(x);
            assert_eq!(text.parse::<f64>().unwrap(), x, "{text}");
        }
    }

    #[test]
    fn csv_parses_back_with_gaps() {
        let record = record_with_rows(vec![sample_row(0, 1.5), sample_row(1, 3.0)]);
        let data = parse_numeric_csv(&run_csv(&record)).unwrap();
        assert_eq!(data.columns, RUN_COLUMNS.to_vec());
        assert_eq!(data.rows.len(), 2);
        let acc = data.column("test_acc").unwrap();
        assert_eq!(data.rows[0][acc], Some(0.5));
        assert_eq!(data.rows[1][acc], None);
        assert_eq!(data.series(acc), vec![(0, 0.5)]);
    }

    #[test]
    fn parse_rejects_ragged_and_non_numeric() {
        let ragged = "a,b\n1,2,3\n";
        assert!(parse_numeric_csv(ragged).unwrap_err().to_string().contains("cells"));
        let text = "a,b\n1,x\n";
        let err = parse_numeric_csv(text).unwrap_err();
        assert!(err.to_string().contains("column 'b'"), "{err}");
        assert_eq!(err.exit_code(), crate::EXIT_CONFIG);
    }

    #[test]
    fn parse_skips_comments_and_blanks() {
        let text = "# note\n\na,b\n# mid\n1,\n";
        let data = parse_numeric_csv(text).unwrap();
        assert_eq!(data.columns, vec!["a", "b"]);
        assert_eq!(data.rows, vec![vec![Some(1.0), None]]);
    }

    #[test]
    fn empty_body_parses_to_zero_rows() {
        let data = parse_numeric_csv("a,b\n").unwrap();
        assert!(data.rows.is_empty());
    }

    #[test]
    fn grad_hist_csv_carries_zero_count() {
        let hist = GradHistogram {
            edges: vec![0.0, 0.5, 1.0],
            counts: vec![3, 2],
            zero_count: 1,
        };
        let text = grad_hist_csv(&hist);
        assert!(text.starts_with("# exact_zero_coordinates = 1\n"));
        assert!(text.contains("bin_lo,bin_hi,count\n"));
        assert!(text.contains("0,0.5,3\n"));
        assert!(text.contains("0.5,1,2\n"));
        let parsed = parse_numeric_csv(&text).unwrap();
        assert_eq!(parsed.rows.len(), 2);
    }
}
