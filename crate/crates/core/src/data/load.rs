use std::collections::BTreeSet;
use std::path::Path;

use super::{CostSpec, CostedDataset, Table};
use crate::error::{Error, Result};

fn is_missing(cell: &str) -> bool {
    matches!(cell, "" | "?" | "NA" | "na" | "NaN" | "nan")
}

/// Reads a comma-separated file with a header row. The column named
/// `label_column` holds class labels; every other column is a feature.
///
/// Columns whose observed cells all parse as numbers are numeric; any other
/// column is integer-coded by the sorted distinct strings it contains. Missing
/// cells (`""`, `?`, `NA`, `NaN`) become `NaN` until imputation.
pub fn read_table(path: &Path, label_column: &str) -> Result<Table> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)?;
    let header: Vec<String> = reader.headers()?.iter().map(str::to_owned).collect();
    let label_idx = header.iter().position(|h| h == label_column).ok_or_else(|| {
        Error::Data(format!(
            "{}: no label column {label_column:?} in header",
            path.display()
        ))
    })?;

    let mut rows: Vec<Vec<String>> = Vec::new();
    for record in reader.records() {
        let record = record?;
        rows.push(record.iter().map(str::to_owned).collect());
    }
    if rows.is_empty() {
        return Err(Error::Data(format!("{}: no data rows", path.display())));
    }

    let feature_cols: Vec<usize> = (0..header.len()).filter(|&c| c != label_idx).collect();
    if feature_cols.is_empty() {
        return Err(Error::Data(format!("{}: no feature columns", path.display())));
    }

    let labels_raw: Vec<&str> = rows.iter().map(|r| r[label_idx].as_str()).collect();
    if let Some(line) = labels_raw.iter().position(|l| is_missing(l)) {
        return Err(Error::Data(format!(
            "{}: missing label on data line {}",
            path.display(),
            line + 2
        )));
    }
    let class_names: Vec<String> = labels_raw
        .iter()
        .map(|s| s.to_string())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let labels = labels_raw
        .iter()
        .map(|l| class_names.iter().position(|c| c == l).unwrap())
        .collect();

    let n = feature_cols.len();
    let mut values = vec![f64::NAN; rows.len() * n];
    let mut categorical = vec![false; n];
    for (j, &col) in feature_cols.iter().enumerate() {
        let cells: Vec<&str> = rows.iter().map(|r| r[col].as_str()).collect();
        let numeric = cells
            .iter()
            .filter(|c| !is_missing(c))
            .all(|c| c.parse::<f64>().is_ok());
        if numeric {
            for (i, cell) in cells.iter().enumerate() {
                if is_missing(cell) {
                    continue;
                }
                let v: f64 = cell.parse().unwrap();
                if !v.is_finite() {
                    return Err(Error::Data(format!(
                        "{}: non-finite value {cell:?} on data line {} column {:?}",
                        path.display(),
                        i + 2,
                        header[col]
                    )));
                }
                values[i * n + j] = v;
            }
        } else {
            categorical[j] = true;
            let levels: Vec<&str> = cells
                .iter()
                .copied()
                .filter(|c| !is_missing(c))
                .collect::<BTreeSet<_>>()
                .into_iter()
                .collect();
            for (i, cell) in cells.iter().enumerate() {
                if !is_missing(cell) {
                    values[i * n + j] = levels.iter().position(|l| l == cell).unwrap() as f64;
                }
            }
        }
    }

    Ok(Table {
        feature_names: feature_cols.iter().map(|&c| header[c].clone()).collect(),
        class_names,
        values,
        labels,
        categorical,
    })
}

/// Reads a table, resolves its cost spec, splits it 50-25-25 and imputes
/// missing cells from the training split.
pub fn load_dataset(
    path: &Path,
    label_column: &str,
    cost_spec: &CostSpec,
    split_seed: u64,
) -> Result<CostedDataset> {
    let table = read_table(path, label_column)?;
    let costs = cost_spec.resolve(&table.feature_names)?.costs()?;
    CostedDataset::from_table(table, costs, split_seed)
}
