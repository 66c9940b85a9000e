//! Population CSV ingestion.

use std::collections::{BTreeSet, HashMap};
use std::io::Read;
use std::path::Path;

use geosampling::Population;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("malformed CSV: {0}")]
    Csv(#[from] csv::Error),
    #[error("empty population")]
    Empty,
    #[error("missing column(s): {}", .0.join(", "))]
    MissingColumns(Vec<String>),
    #[error("non-numeric values: {}", format_cells(.0))]
    NonNumeric(Vec<BadCell>),
    #[error("excluded ids not found: {}", .0.join(", "))]
    UnknownIds(Vec<String>),
    #[error("duplicate id '{0}'")]
    DuplicateId(String),
    #[error(transparent)]
    Population(#[from] geosampling::Error),
}

/// A designated cell that does not parse as a finite number. `row` counts
/// data rows from 1, so it sits on line `row + 1` of the file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BadCell {
    pub row: usize,
    pub column: String,
    pub value: String,
}

fn format_cells(cells: &[BadCell]) -> String {
    cells
        .iter()
        .map(|c| format!("row {} column {} ('{}')", c.row, c.column, c.value))
        .collect::<Vec<_>>()
        .join("; ")
}

/// Which CSV columns feed the population. Without an id column the 1-based
/// row number serves as id.
#[derive(Debug, Clone, Default)]
pub struct ColumnMap {
    pub id: Option<String>,
    pub y: Option<String>,
    pub x: Option<String>,
    pub z: Option<String>,
}

pub fn read_population(path: &Path, columns: &ColumnMap, exclude: &[String]) -> Result<Population, IngestError> {
    let mut text = String::new();
    std::fs::File::open(path)
        .and_then(|mut f| f.read_to_string(&mut text))
        .map_err(|source| IngestError::Io {
            path: path.display().to_string(),
            source,
        })?;
    parse_population(&text, columns, exclude)
}

pub fn parse_population(text: &str, columns: &ColumnMap, exclude: &[String]) -> Result<Population, IngestError> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
    let header: Vec<String> = reader.headers()?.iter().map(str::to_owned).collect();
    let find = |name: &str| header.iter().position(|h| h == name);

    let wanted = [&columns.id, &columns.y, &columns.x, &columns.z];
    let missing: Vec<String> = wanted
        .iter()
        .filter_map(|c| c.as_deref())
        .filter(|c| find(c).is_none())
        .map(str::to_owned)
        .collect();
    if !missing.is_empty() {
        return Err(IngestError::MissingColumns(missing));
    }
    let id_col = columns.id.as_deref().and_then(find);
    let numeric: Vec<(usize, usize, String)> = [&columns.y, &columns.x, &columns.z]
        .iter()
        .enumerate()
        .filter_map(|(slot, c)| c.as_deref().map(|name| (slot, find(name).expect("checked above"), name.to_owned())))
        .collect();

    let excluded: BTreeSet<&str> = exclude.iter().map(String::as_str).collect();
    let mut seen_excluded = BTreeSet::new();
    let mut seen_ids = HashMap::new();
    let mut ids = Vec::new();
    let mut values: [Vec<f64>; 3] = Default::default();
    let mut bad = Vec::new();
    for (index, record) in reader.records().enumerate() {
        let record = record?;
        let row = index + 1;
        let id = match id_col {
            Some(c) => record.get(c).unwrap_or("").to_owned(),
            None => row.to_string(),
        };
        if excluded.contains(id.as_str()) {
            seen_excluded.insert(id);
            continue;
        }
        if seen_ids.insert(id.clone(), row).is_some() {
            return Err(IngestError::DuplicateId(id));
        }
        for (slot, col, name) in &numeric {
            let raw = record.get(*col).unwrap_or("");
            match raw.parse::<f64>() {
                Ok(v) if v.is_finite() => values[*slot].push(v),
                _ => bad.push(BadCell {
                    row,
                    column: name.clone(),
                    value: raw.to_owned(),
                }),
            }
        }
        ids.push(id);
    }
    if !bad.is_empty() {
        return Err(IngestError::NonNumeric(bad));
    }
    let unknown: Vec<String> = excluded
        .iter()
        .filter(|id| !seen_excluded.contains(**id))
        .map(|id| id.to_string())
        .collect();
    if !unknown.is_empty() {
        return Err(IngestError::UnknownIds(unknown));
    }
    if ids.is_empty() {
        return Err(IngestError::Empty);
    }
    let [y, x, z] = values;
    let pick = |c: &Option<String>, v: Vec<f64>| c.as_ref().map(|_| v);
    Ok(Population::new(
        ids,
        pick(&columns.y, y),
        pick(&columns.x, x),
        pick(&columns.z, z),
    )?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cols(x: &str) -> ColumnMap {
        ColumnMap {
            x: Some(x.into()),
            ..ColumnMap::default()
        }
    }

    #[test]
    fn reads_seven_units() {
        let csv = "id,x\na,.38\nb,.30\nc,.42\nd,.65\ne,.25\nf,.10\ng,.90\n";
        let pop = parse_population(csv, &cols("x"), &[]).unwrap();
        assert_eq!(pop.len(), 7);
        assert_eq!(pop.ids[0], "1");
        assert_eq!(pop.x.unwrap()[6], 0.90);
    }

    #[test]
    fn header_only_is_empty() {
        let err = parse_population("id,x\n", &cols("x"), &[]).unwrap_err();
        assert_eq!(err.to_string(), "empty population");
    }

    #[test]
    fn missing_column_is_named() {
        let err = parse_population("id,x\n1,2\n", &cols("size"), &[]).unwrap_err();
        assert!(matches!(err, IngestError::MissingColumns(ref c) if c == &["size"]));
    }

    #[test]
    fn non_numeric_cells_list_rows() {
        let err = parse_population("x\n1\nabc\n3\n\n", &cols("x"), &[]).unwrap_err();
        match err {
            IngestError::NonNumeric(cells) => {
                assert_eq!(cells.len(), 1);
                assert_eq!(cells[0].row, 2);
                assert_eq!(cells[0].value, "abc");
            }
            other => panic!("{other}"),
        }
    }

    #[test]
    fn exclusion_by_id() {
        let columns = ColumnMap {
            id: Some("id".into()),
            ..cols("x")
        };
        let pop = parse_population("id,x\nA,1\nB,2\nC,3\n", &columns, &["B".into()]).unwrap();
        assert_eq!(pop.ids, vec!["A", "C"]);
        assert!(matches!(
            parse_population("id,x\nA,1\n", &columns, &["Q".into()]),
            Err(IngestError::UnknownIds(_))
        ));
    }
}
