//! Feature matrix serialization: a CSV of cells plus a JSON manifest
//! carrying column names, kinds, groups and category dictionaries.
//! Missing cells are written as empty fields.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::features::{
    CategoryDict, Column, ColumnKind, FeatureMatrix, MatrixSchema,
};

/// Write `matrix.csv`-style cells to `csv_path` and the schema manifest
/// to `manifest_path`.
pub fn write_matrix(m: &FeatureMatrix, csv_path: &Path, manifest_path: &Path) -> Result<()> {
    let file = File::create(csv_path).map_err(|e| Error::io(csv_path, e))?;
    let mut w = BufWriter::new(file);

    let mut header = String::from("sentence_id,rank");
    for col in m.columns() {
        header.push(',');
        header.push_str(&escape(&col.name));
    }
    header.push('\n');
    w.write_all(header.as_bytes()).map_err(|e| Error::io(csv_path, e))?;

    for (row, &(sid, rank)) in m.row_keys().iter().enumerate() {
        let mut line = format!("{sid},{rank}");
        for col in m.columns() {
            line.push(',');
            if let Some(v) = col.values[row] {
                match col.kind {
                    ColumnKind::Numeric => line.push_str(&format!("{v}")),
                    ColumnKind::Categorical => line.push_str(&format!("{}", v as u32)),
                }
            }
        }
        line.push('\n');
        w.write_all(line.as_bytes()).map_err(|e| Error::io(csv_path, e))?;
    }
    w.flush().map_err(|e| Error::io(csv_path, e))?;

    let manifest = File::create(manifest_path).map_err(|e| Error::io(manifest_path, e))?;
    serde_json::to_writer_pretty(BufWriter::new(manifest), &m.schema())?;
    Ok(())
}

fn escape(name: &str) -> String {
    if name.contains(',') || name.contains('"') {
        format!("\"{}\"", name.replace('"', "\"\""))
    } else {
        name.to_string()
    }
}

/// Load a matrix written by [`write_matrix`].
pub fn read_matrix(csv_path: &Path, manifest_path: &Path) -> Result<FeatureMatrix> {
    let manifest = File::open(manifest_path).map_err(|e| Error::io(manifest_path, e))?;
    let schema: MatrixSchema = serde_json::from_reader(BufReader::new(manifest))?;

    let file = File::open(csv_path).map_err(|e| Error::io(csv_path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(BufReader::new(file));

    let headers = reader
        .headers()
        .map_err(|e| Error::parse(csv_path, 1, e.to_string()))?
        .clone();
    let expected: Vec<&str> = ["sentence_id", "rank"]
        .into_iter()
        .chain(schema.columns.iter().map(|c| c.name.as_str()))
        .collect();
    if headers.iter().collect::<Vec<_>>() != expected {
        return Err(Error::Schema(format!(
            "{}: header does not match manifest columns",
            csv_path.display()
        )));
    }

    let mut row_keys = Vec::new();
    let mut values: Vec<Vec<Option<f64>>> = vec![Vec::new(); schema.columns.len()];
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map(|p| p.line() as usize).unwrap_or_default();
            Error::parse(csv_path, line, e.to_string())
        })?;
        let line = record
            .position()
            .map(|p| p.line() as usize)
            .unwrap_or_default();
        if record.len() != expected.len() {
            return Err(Error::parse(
                csv_path,
                line,
                format!("expected {} fields, found {}", expected.len(), record.len()),
            ));
        }
        let sid: u32 = record[0]
            .parse()
            .map_err(|_| Error::parse(csv_path, line, "bad sentence_id"))?;
        let rank: u32 = record[1]
            .parse()
            .map_err(|_| Error::parse(csv_path, line, "bad rank"))?;
        row_keys.push((sid, rank));
        for (i, meta) in schema.columns.iter().enumerate() {
            let cell = &record[i + 2];
            if cell.is_empty() {
                values[i].push(None);
                continue;
            }
            match meta.kind {
                ColumnKind::Numeric => {
                    let v: f64 = cell
                        .parse()
                        .map_err(|_| Error::parse(csv_path, line, format!("bad cell {cell:?}")))?;
                    values[i].push(Some(v));
                }
                ColumnKind::Categorical => {
                    let id: u32 = cell
                        .parse()
                        .map_err(|_| Error::parse(csv_path, line, format!("bad id {cell:?}")))?;
                    let n = meta.categories.as_ref().map(Vec::len).unwrap_or(0);
                    if id as usize > n {
                        return Err(Error::Validation(format!(
                            "{}:{line}: category id {id} outside dictionary of {n}",
                            csv_path.display()
                        )));
                    }
                    values[i].push(Some(f64::from(id)));
                }
            }
        }
    }

    let columns = schema
        .columns
        .into_iter()
        .zip(values)
        .map(|(meta, values)| Column {
            name: meta.name,
            kind: meta.kind,
            group: meta.group,
            values,
            dict: meta.categories.map(CategoryDict::from_names),
        })
        .collect();
    FeatureMatrix::from_columns(columns, row_keys)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::FeatureGroup;

    #[test]
    fn matrix_round_trip() {
        let dict = CategoryDict::from_names(vec!["NN".into(), "VB".into()]);
        let columns = vec![
            Column {
                name: "x".into(),
                kind: ColumnKind::Numeric,
                group: FeatureGroup::Length,
                values: vec![Some(1.5), None, Some(-0.125)],
                dict: None,
            },
            Column {
                name: "pos".into(),
                kind: ColumnKind::Categorical,
                group: FeatureGroup::PostagLemma,
                values: vec![Some(1.0), Some(2.0), None],
                dict: Some(dict),
            },
        ];
        let m = FeatureMatrix::from_columns(columns, vec![(1, 1), (1, 2), (2, 1)]).unwrap();

        let dir = tempfile::tempdir().unwrap();
        let csv = dir.path().join("m.csv");
        let manifest = dir.path().join("m.manifest.json");
        write_matrix(&m, &csv, &manifest).unwrap();
        let loaded = read_matrix(&csv, &manifest).unwrap();
        assert_eq!(loaded, m);
    }
}
