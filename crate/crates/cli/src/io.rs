//! CSV input and output of observation series.

use std::fmt;
use std::io::{Read, Write};
use std::path::Path;

use anyhow::{Context, Result};
use binlat_core::ObservationSeries;

/// Malformed input data; maps to exit status 2.
#[derive(Debug)]
pub struct DataError(pub String);

impl fmt::Display for DataError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for DataError {}

fn data_err(msg: impl Into<String>) -> anyhow::Error {
    DataError(msg.into()).into()
}

/// A series with the names of its regressor columns.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub series: ObservationSeries,
    /// One name per regressor, `intercept` included.
    pub names: Vec<String>,
    /// The intercept column was added on reading, not present in the file.
    pub implicit_intercept: bool,
}

pub const INTERCEPT: &str = "intercept";

/// Reads `y`, `m` and regressor columns (in file order). A column of ones
/// named `intercept` is prepended unless the file has one. With `binary`,
/// a missing `m` column means `m_t = 1`.
pub fn read_csv(path: &Path, binary: bool) -> Result<Dataset> {
    let file = std::fs::File::open(path).with_context(|| format!("cannot open {}", path.display()))?;
    parse_csv(file, binary).with_context(|| format!("reading {}", path.display()))
}

pub fn parse_csv<R: Read>(reader: R, binary: bool) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers().map_err(|e| data_err(format!("bad header: {e}")))?.clone();
    let find = |name: &str| headers.iter().position(|h| h == name);
    let y_col = find("y").ok_or_else(|| data_err("missing column `y`"))?;
    let m_col = find("m");
    if m_col.is_none() && !binary {
        return Err(data_err("missing column `m` (pass --binary for 0/1 responses)"));
    }
    let x_cols: Vec<usize> = (0..headers.len()).filter(|&c| c != y_col && Some(c) != m_col).collect();
    let implicit_intercept = find(INTERCEPT).is_none();
    let mut names: Vec<String> = Vec::with_capacity(x_cols.len() + 1);
    if implicit_intercept {
        names.push(INTERCEPT.to_string());
    }
    names.extend(x_cols.iter().map(|&c| headers[c].to_string()));

    let (mut y, mut m, mut rows) = (Vec::new(), Vec::new(), Vec::new());
    for (i, record) in rdr.records().enumerate() {
        // Header is line 1.
        let line = i + 2;
        let record = record.map_err(|e| match e.kind() {
            csv::ErrorKind::UnequalLengths { expected_len, len, .. } => {
                data_err(format!("line {line}: expected {expected_len} fields, found {len}"))
            }
            _ => data_err(format!("line {line}: {e}")),
        })?;
        let count = |c: usize| -> Result<u32> {
            let cell = &record[c];
            let v: i64 = cell
                .parse()
                .map_err(|_| data_err(format!("line {line}: `{}` = {cell:?} is not an integer", &headers[c])))?;
            u32::try_from(v).map_err(|_| data_err(format!("line {line}: `{}` = {v} must be nonnegative", &headers[c])))
        };
        let yt = count(y_col)?;
        let mt = match m_col {
            Some(c) => count(c)?,
            None => 1,
        };
        if yt > mt {
            return Err(data_err(format!("line {line}: y = {yt} exceeds m = {mt}")));
        }
        if mt == 0 {
            return Err(data_err(format!("line {line}: m must be at least 1")));
        }
        let mut row = Vec::with_capacity(names.len());
        if implicit_intercept {
            row.push(1.0);
        }
        for &c in &x_cols {
            let cell = &record[c];
            let v: f64 = cell.parse().ok().filter(|v: &f64| v.is_finite()).ok_or_else(|| {
                data_err(format!(
                    "line {line}: `{}` = {cell:?} is not a finite number",
                    &headers[c]
                ))
            })?;
            row.push(v);
        }
        y.push(yt);
        m.push(mt);
        rows.push(row);
    }
    if y.is_empty() {
        return Err(data_err("no data rows"));
    }
    let series = ObservationSeries::new(y, m, rows).map_err(|e| data_err(e.to_string()))?;
    Ok(Dataset {
        series,
        names,
        implicit_intercept,
    })
}

/// Writes `y`, `m` and the regressors at full precision; an implicit
/// intercept is left out so the file reads back to the same dataset.
pub fn write_csv<W: Write>(data: &Dataset, writer: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    let skip = usize::from(data.implicit_intercept);
    let mut header = vec!["y".to_string(), "m".to_string()];
    header.extend(data.names[skip..].iter().cloned());
    wtr.write_record(&header)?;
    let s = &data.series;
    for t in 0..s.n() {
        let mut rec = vec![s.y()[t].to_string(), s.m()[t].to_string()];
        rec.extend(s.row(t)[skip..].iter().map(|v| v.to_string()));
        wtr.write_record(&rec)?;
    }
    wtr.flush()?;
    Ok(())
}
