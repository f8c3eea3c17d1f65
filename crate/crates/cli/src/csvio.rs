use std::fs::File;
use std::io::Write;
use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use countflow_core::CountSeries;

/// Reads a counts CSV: a header of component labels, then one row of
/// nonnegative integers per time point.
///
/// A header-only file yields an empty series with `p` from the header.
pub fn read_counts_csv(path: &Path) -> Result<CountSeries> {
    let file = File::open(path).with_context(|| format!("cannot open {}", path.display()))?;
    let mut reader = csv::ReaderBuilder::new().has_headers(true).flexible(false).from_reader(file);
    let labels: Vec<String> = reader
        .headers()
        .with_context(|| format!("cannot read header of {}", path.display()))?
        .iter()
        .map(|s| s.trim().to_string())
        .collect();
    if labels.is_empty() || labels.iter().all(String::is_empty) {
        bail!("{}: header row is empty", path.display());
    }
    let p = labels.len();
    let mut values = Vec::new();
    for (r, record) in reader.records().enumerate() {
        let line = r + 2;
        let record = record.map_err(|e| match e.kind() {
            csv::ErrorKind::UnequalLengths { len, .. } => {
                anyhow!("{}: row {line} has {len} fields, header has {p}", path.display())
            }
            _ => anyhow!("{}: row {line}: {e}", path.display()),
        })?;
        for (c, cell) in record.iter().enumerate() {
            let cell = cell.trim();
            let v: u64 = cell.parse().map_err(|_| {
                anyhow!(
                    "{}: row {line}, column {} ('{}'): '{cell}' is not a nonnegative integer",
                    path.display(),
                    c + 1,
                    labels[c]
                )
            })?;
            values.push(v);
        }
    }
    let y = CountSeries::new(p, values)?;
    Ok(y.with_labels(labels)?)
}

pub fn write_counts_csv(path: &Path, y: &CountSeries) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(y.labels_or_default())?;
    for row in y.rows() {
        w.write_record(row.iter().map(u64::to_string))?;
    }
    w.flush()?;
    Ok(())
}

/// Writes rows of floats under `header`.
pub fn write_table<'a, I>(path: &Path, header: &[String], rows: I) -> Result<()>
where
    I: IntoIterator<Item = &'a [f64]>,
{
    let mut w = writer(path)?;
    w.write_record(header)?;
    for row in rows {
        w.write_record(row.iter().map(f64::to_string))?;
    }
    w.flush()?;
    Ok(())
}

/// Plot-ready curve: `x, y` and, when given, `upper, lower` band columns.
pub fn write_curve(path: &Path, x: &[f64], y: &[f64], band: Option<(&[f64], &[f64])>) -> Result<()> {
    let mut header = vec!["x".to_string(), "y".to_string()];
    if band.is_some() {
        header.extend(["upper".to_string(), "lower".to_string()]);
    }
    let rows: Vec<Vec<f64>> = (0..x.len())
        .map(|k| match band {
            Some((u, l)) => vec![x[k], y[k], u[k], l[k]],
            None => vec![x[k], y[k]],
        })
        .collect();
    write_table(path, &header, rows.iter().map(Vec::as_slice))
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    let mut f = File::create(path).with_context(|| format!("cannot create {}", path.display()))?;
    f.write_all(text.as_bytes())?;
    Ok(())
}

fn writer(path: &Path) -> Result<csv::Writer<File>> {
    csv::Writer::from_path(path).with_context(|| format!("cannot create {}", path.display()))
}
