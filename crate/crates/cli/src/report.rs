use std::fmt::Write as _;

use fingering::eval_measures::{PieceEvaluation, Rates};

use crate::args::Format;

/// Match rate as a percentage with one decimal.
pub fn pct(x: f64) -> String {
    format!("{:.1}", 100.0 * x)
}

/// Shortest representation that reads back to the same value.
pub fn full(x: f64) -> String {
    format!("{x}")
}

pub struct Table {
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new<S: Into<String>>(header: impl IntoIterator<Item = S>) -> Table {
        Table {
            header: header.into_iter().map(Into::into).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn render(&self, format: Format) -> String {
        let mut out = String::new();
        match format {
            Format::Table => {
                for row in std::iter::once(&self.header).chain(&self.rows) {
                    out.push_str(&row.join("\t"));
                    out.push('\n');
                }
            }
            Format::Text => {
                let widths: Vec<usize> = (0..self.header.len())
                    .map(|c| {
                        std::iter::once(&self.header)
                            .chain(&self.rows)
                            .map(|r| r[c].len())
                            .max()
                            .unwrap_or(0)
                    })
                    .collect();
                for row in std::iter::once(&self.header).chain(&self.rows) {
                    let mut line = String::new();
                    for (c, cell) in row.iter().enumerate() {
                        if c == 0 {
                            let _ = write!(line, "{cell:<w$}", w = widths[c]);
                        } else {
                            let _ = write!(line, "  {cell:>w$}", w = widths[c]);
                        }
                    }
                    out.push_str(line.trim_end());
                    out.push('\n');
                }
            }
        }
        out
    }
}

/// Comment line placed above or below a table.
pub fn note(out: &mut String, text: impl std::fmt::Display) {
    let _ = writeln!(out, "# {text}");
}

pub const RATE_HEADER: [&str; 10] = [
    "piece", "notes", "M_gen", "M_high", "M_soft", "M_rec", "gen", "high", "soft", "rec",
];

pub fn rate_row(label: &str, notes: usize, r: &Rates) -> Vec<String> {
    let mut row = vec![label.to_string(), notes.to_string()];
    row.extend(r.as_array().map(pct));
    row.extend(r.as_array().map(full));
    row
}

pub fn rate_table(evals: &[PieceEvaluation]) -> Table {
    let mut t = Table::new(RATE_HEADER);
    for e in evals {
        t.push(rate_row(&e.piece_id, e.notes, &e.combined));
    }
    t
}
