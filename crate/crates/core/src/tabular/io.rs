use std::collections::HashMap;
use std::io::{Read, Write};
use std::path::Path;

use super::{Cell, ColumnKind, DataTable, Schema, TabularError};

const MISSING_MARKERS: [&str; 3] = ["", "?", "NA"];

/// Load a comma-separated, UTF-8 file with a header row.
///
/// Header order may differ from the schema; rows are stored in schema order.
pub fn load_csv(path: &Path, schema: &Schema) -> Result<DataTable, TabularError> {
    let file = std::fs::File::open(path).map_err(|source| TabularError::Io {
        path: path.display().to_string(),
        source,
    })?;
    read_csv(file, schema)
}

pub fn read_csv<R: Read>(reader: R, schema: &Schema) -> Result<DataTable, TabularError> {
    schema.validate()?;
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(reader);
    let mut records = rdr.records();

    let header = match records.next() {
        None => return Err(TabularError::EmptyFile),
        Some(rec) => rec.map_err(|e| TabularError::Csv(e.to_string()))?,
    };
    let header: Vec<String> = header.iter().map(|h| h.trim().to_string()).collect();
    if header.len() == 1 && header[0].is_empty() {
        return Err(TabularError::EmptyFile);
    }

    let positions: HashMap<&str, usize> = header
        .iter()
        .enumerate()
        .map(|(i, h)| (h.as_str(), i))
        .collect();
    for h in &header {
        if schema.index_of(h).is_none() {
            return Err(TabularError::UnknownColumn(h.clone()));
        }
    }
    let mut source_col = Vec::with_capacity(schema.len());
    for col in &schema.columns {
        match positions.get(col.name.as_str()) {
            Some(&i) => source_col.push(i),
            None => return Err(TabularError::MissingColumn(col.name.clone())),
        }
    }

    let mut rows = Vec::new();
    for (r, rec) in records.enumerate() {
        let rec = rec.map_err(|e| TabularError::Csv(e.to_string()))?;
        if rec.len() == 1 && rec.get(0).is_some_and(|s| s.trim().is_empty()) {
            continue;
        }
        if rec.len() != header.len() {
            return Err(TabularError::RaggedRow {
                row: r,
                found: rec.len(),
                expected: header.len(),
            });
        }
        let mut row = Vec::with_capacity(schema.len());
        for (c, col) in schema.columns.iter().enumerate() {
            let raw = rec.get(source_col[c]).unwrap_or("").trim();
            row.push(parse_cell(raw, col.kind).ok_or_else(|| {
                TabularError::UnparsableCell {
                    row: r,
                    col: col.name.clone(),
                    value: raw.to_string(),
                }
            })?);
        }
        rows.push(row);
    }
    DataTable::new(schema.clone(), rows)
}

fn parse_cell(raw: &str, kind: ColumnKind) -> Option<Cell> {
    if MISSING_MARKERS.contains(&raw) {
        // Binary columns never accept missing; `DataTable::new` reports it.
        return Some(Cell::Missing);
    }
    match kind {
        ColumnKind::Categorical => Some(Cell::Label(raw.to_string())),
        _ => {
            let v: f64 = raw.parse().ok()?;
            if !v.is_finite() {
                return None;
            }
            Some(Cell::Number(v))
        }
    }
}

fn render_cell(cell: &Cell) -> String {
    match cell {
        Cell::Number(v) => {
            if v.fract() == 0.0 && v.abs() < 1e15 {
                format!("{}", *v as i64)
            } else {
                format!("{v}")
            }
        }
        Cell::Label(s) => s.clone(),
        Cell::Missing => String::new(),
    }
}

/// Write a table back out as CSV in schema column order.
pub fn write_csv<W: Write>(table: &DataTable, writer: W) -> Result<(), TabularError> {
    let mut w = csv::WriterBuilder::new().from_writer(writer);
    let csv_err = |e: csv::Error| TabularError::Csv(e.to_string());
    w.write_record(table.schema.columns.iter().map(|c| c.name.as_str()))
        .map_err(csv_err)?;
    for row in &table.rows {
        w.write_record(row.iter().map(render_cell)).map_err(csv_err)?;
    }
    w.flush().map_err(|e| TabularError::Csv(e.to_string()))?;
    Ok(())
}
