//! JSON envelopes and aligned text tables.

use serde::Serialize;
use serde_json::Value;

/// What every subcommand produces.
pub struct Report {
    pub config: Value,
    pub results: Value,
    pub diagnostics: Value,
    pub seed: Option<u64>,
    pub text: String,
}

#[derive(Serialize)]
struct Envelope<'a> {
    config: &'a Value,
    results: &'a Value,
    diagnostics: &'a Value,
    seed: Option<u64>,
    version: &'static str,
}

impl Report {
    pub fn to_json(&self) -> String {
        let env = Envelope {
            config: &self.config,
            results: &self.results,
            diagnostics: &self.diagnostics,
            seed: self.seed,
            version: env!("CARGO_PKG_VERSION"),
        };
        serde_json::to_string_pretty(&env).expect("JSON values always serialize")
    }
}

pub fn f4(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.4}")
    } else {
        "-".into()
    }
}

/// A right-aligned text table; the first column is left-aligned.
pub struct Table {
    headers: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new<S: Into<String>>(headers: impl IntoIterator<Item = S>) -> Self {
        Self {
            headers: headers.into_iter().map(Into::into).collect(),
            rows: Vec::new(),
        }
    }

    pub fn row<S: Into<String>>(&mut self, cells: impl IntoIterator<Item = S>) -> &mut Self {
        self.rows.push(cells.into_iter().map(Into::into).collect());
        self
    }

    pub fn render(&self) -> String {
        let cols = self.headers.len();
        let width = |c: usize| {
            self.rows
                .iter()
                .filter_map(|r| r.get(c))
                .chain(std::iter::once(&self.headers[c]))
                .map(|s| s.chars().count())
                .max()
                .unwrap_or(0)
        };
        let widths: Vec<usize> = (0..cols).map(width).collect();
        let line = |cells: &[String]| {
            let parts: Vec<String> = (0..cols)
                .map(|c| {
                    let s = cells.get(c).map(String::as_str).unwrap_or("");
                    if c == 0 {
                        format!("{s:<w$}", w = widths[c])
                    } else {
                        format!("{s:>w$}", w = widths[c])
                    }
                })
                .collect();
            parts.join("  ").trim_end().to_string()
        };
        let mut out = line(&self.headers);
        out.push('\n');
        out.push_str(&"-".repeat(widths.iter().sum::<usize>() + 2 * cols.saturating_sub(1)));
        for r in &self.rows {
            out.push('\n');
            out.push_str(&line(r));
        }
        out.push('\n');
        out
    }
}
