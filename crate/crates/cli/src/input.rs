//! CSV column loading.

use std::path::Path;

use crate::Failure;

/// Reads one numeric column. A first row whose selected field is not a
/// number is taken as a header.
pub fn read_column(path: &Path, column: Option<&str>) -> Result<Vec<f64>, Failure> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| Failure::io(format!("cannot read {}: {e}", path.display())))?;
    let mut rows = Vec::new();
    for (k, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| Failure::io(format!("{}: line {}: {e}", path.display(), k + 1)))?;
        if rec.iter().all(|f| f.is_empty()) {
            continue;
        }
        rows.push((k + 1, rec));
    }
    if rows.is_empty() {
        return Err(Failure::io(format!("{}: no data", path.display())));
    }
    let numeric = |s: &str| s.parse::<f64>().is_ok();
    let first = &rows[0].1;
    let width = first.len();
    let index = match column {
        Some(c) => match c.parse::<usize>() {
            Ok(i) if i < width => i,
            Ok(i) => return Err(Failure::usage(format!("column index {i} out of range ({width} columns)"))),
            Err(_) => first
                .iter()
                .position(|h| h == c)
                .ok_or_else(|| Failure::usage(format!("no column named {c:?} in the header")))?,
        },
        None => {
            // First column that is numeric in the first data row.
            let probe = if first.iter().any(numeric) { first } else { rows.get(1).map(|r| &r.1).unwrap_or(first) };
            probe.iter().position(numeric).ok_or_else(|| Failure::io(format!("{}: no numeric column", path.display())))?
        }
    };
    let header = !first.get(index).is_some_and(numeric);
    let mut out = Vec::with_capacity(rows.len());
    for (line, rec) in rows.iter().skip(header as usize) {
        let field = rec.get(index).unwrap_or("");
        match field.parse::<f64>() {
            Ok(v) if v.is_finite() => out.push(v),
            _ => return Err(Failure::io(format!("{}: line {line}: not a finite number: {field:?}", path.display()))),
        }
    }
    if out.is_empty() {
        return Err(Failure::io(format!("{}: no data rows", path.display())));
    }
    Ok(out)
}
