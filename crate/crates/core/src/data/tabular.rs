use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};

pub const LABEL_COLUMN: &str = "label";

/// Column name for feature `j` of node `i`.
pub fn feature_column(node: usize, feature: usize) -> String {
    format!("n{node}_f{feature}")
}

/// How to read a CSV file into a [`Dataset`].
///
/// Unless `feature_columns` is given, node `i`'s feature `j` is read from
/// the column named `n{i}_f{j}`. Explicit columns are listed node-major.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TabularSchema {
    pub n_nodes: usize,
    pub feature_dim: usize,
    pub n_classes: usize,
    #[serde(default = "default_label")]
    pub label_column: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub feature_columns: Option<Vec<String>>,
}

fn default_label() -> String {
    LABEL_COLUMN.to_string()
}

impl TabularSchema {
    pub fn new(n_nodes: usize, feature_dim: usize, n_classes: usize) -> Self {
        Self {
            n_nodes,
            feature_dim,
            n_classes,
            label_column: default_label(),
            feature_columns: None,
        }
    }

    fn columns(&self) -> Vec<String> {
        match &self.feature_columns {
            Some(c) => c.clone(),
            None => (0..self.n_nodes)
                .flat_map(|i| (0..self.feature_dim).map(move |j| feature_column(i, j)))
                .collect(),
        }
    }
}

/// Writes the header `n0_f0, ..., n{N-1}_f{L-1}, label` and one row per
/// sample. Values use the shortest exact decimal form.
pub fn save_csv(data: &Dataset, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let mut header: Vec<String> = (0..data.n_nodes())
        .flat_map(|i| (0..data.feature_dim()).map(move |j| feature_column(i, j)))
        .collect();
    header.push(LABEL_COLUMN.to_string());
    w.write_record(&header)?;
    for i in 0..data.len() {
        let mut row: Vec<String> = data.sample(i).iter().map(|v| format!("{v:?}")).collect();
        row.push(data.labels()[i].to_string());
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn load_tabular(path: &Path, schema: &TabularSchema) -> Result<Dataset> {
    let columns = schema.columns();
    if columns.len() != schema.n_nodes * schema.feature_dim {
        return Err(Error::Parameter(format!(
            "schema lists {} feature columns, expected N * L = {}",
            columns.len(),
            schema.n_nodes * schema.feature_dim
        )));
    }
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_path(path)?;
    let header = reader.headers().map_err(|e| ingestion(1, e.to_string()))?.clone();
    if header.is_empty() || (header.len() == 1 && header[0].is_empty()) {
        return Err(ingestion(1, "empty file".into()));
    }
    let find = |name: &str| {
        header
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| ingestion(1, format!("missing column `{name}`")))
    };
    let feature_idx = columns.iter().map(|c| find(c)).collect::<Result<Vec<_>>>()?;
    let label_idx = find(&schema.label_column)?;

    let mut features = Vec::new();
    let mut labels = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line() as usize);
            ingestion(line, e.to_string())
        })?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        for (&idx, name) in feature_idx.iter().zip(&columns) {
            let cell = record.get(idx).unwrap_or("").trim();
            let value: f64 = cell
                .parse()
                .map_err(|_| ingestion(line, format!("column `{name}`: `{cell}` is not a number")))?;
            if !value.is_finite() {
                return Err(ingestion(line, format!("column `{name}`: non-finite value")));
            }
            features.push(value);
        }
        let cell = record.get(label_idx).unwrap_or("").trim();
        let label: usize = cell
            .parse()
            .map_err(|_| ingestion(line, format!("label `{cell}` is not a class index")))?;
        if label >= schema.n_classes {
            return Err(ingestion(
                line,
                format!("label {label} outside the {} declared classes", schema.n_classes),
            ));
        }
        labels.push(label);
    }
    if labels.is_empty() {
        return Err(ingestion(1, "no data rows".into()));
    }
    Dataset::new(schema.n_nodes, schema.feature_dim, schema.n_classes, features, labels)
}

fn ingestion(line: usize, message: String) -> Error {
    Error::Ingestion { line, message }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write(text: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(text.as_bytes()).unwrap();
        f
    }

    #[test]
    fn round_trip_is_exact() {
        let values = vec![0.1, -2.5e-17, 1.0 / 3.0, 4.0, f64::MIN_POSITIVE, 7.25];
        let d = Dataset::new(3, 1, 2, values, vec![0, 1]).unwrap();
        let f = tempfile::NamedTempFile::new().unwrap();
        save_csv(&d, f.path()).unwrap();
        let back = load_tabular(f.path(), &TabularSchema::new(3, 1, 2)).unwrap();
        assert_eq!(back, d);
    }

    #[test]
    fn declared_shape() {
        let f = write("n0_f0,n0_f1,n1_f0,n1_f1,label\n1,2,3,4,0\n5,6,7,8,2\n");
        let d = load_tabular(f.path(), &TabularSchema::new(2, 2, 3)).unwrap();
        assert_eq!((d.len(), d.n_nodes(), d.feature_dim()), (2, 2, 2));
        assert_eq!(d.node_features(1, 1), &[7.0, 8.0]);
    }

    #[test]
    fn errors_carry_line_numbers() {
        let empty = write("");
        assert!(matches!(
            load_tabular(empty.path(), &TabularSchema::new(1, 1, 2)),
            Err(Error::Ingestion { .. })
        ));
        let missing = write("n0_f0,label\n1,0\n");
        assert!(matches!(
            load_tabular(missing.path(), &TabularSchema::new(2, 1, 2)),
            Err(Error::Ingestion { line: 1, .. })
        ));
        let text = write("n0_f0,label\n1,0\nabc,1\n");
        assert!(matches!(
            load_tabular(text.path(), &TabularSchema::new(1, 1, 2)),
            Err(Error::Ingestion { line: 3, .. })
        ));
        let label = write("n0_f0,label\n1,0\n2,1\n3,5\n");
        assert!(matches!(
            load_tabular(label.path(), &TabularSchema::new(1, 1, 2)),
            Err(Error::Ingestion { line: 4, .. })
        ));
    }

    #[test]
    fn explicit_columns() {
        let f = write("y,b,a\n1,2.5,1.5\n");
        let schema = TabularSchema {
            label_column: "y".into(),
            feature_columns: Some(vec!["a".into(), "b".into()]),
            ..TabularSchema::new(2, 1, 2)
        };
        let d = load_tabular(f.path(), &schema).unwrap();
        assert_eq!(d.sample(0), &[1.5, 2.5]);
        assert_eq!(d.labels(), &[1]);
    }
}
