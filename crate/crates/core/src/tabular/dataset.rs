use std::collections::HashMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::schema::{FeatureKind, FeatureSchema, RawRecord, RawValue};
use super::space::{FeatureSpace, Scaler};
use crate::error::{Error, Result};

/// A point in encoded space, optionally tied to the dataset row it came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncodedInstance {
    pub values: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub raw_id: Option<usize>,
}

impl EncodedInstance {
    pub fn new(values: Vec<f64>) -> Self {
        Self { values, raw_id: None }
    }

    pub fn width(&self) -> usize {
        self.values.len()
    }
}

impl AsRef<[f64]> for EncodedInstance {
    fn as_ref(&self) -> &[f64] {
        &self.values
    }
}

/// Encoded rows plus the feature space they live in. Row order defines
/// instance ids `0..n`.
#[derive(Debug, Clone)]
pub struct Dataset {
    space: FeatureSpace,
    instances: Vec<EncodedInstance>,
    labels: Vec<String>,
}

impl Dataset {
    /// Fits a scaler on `records` and encodes them.
    pub fn from_records(schema: FeatureSchema, records: &[RawRecord], labels: Vec<String>) -> Result<Self> {
        if records.is_empty() {
            return Err(Error::EmptyDataset);
        }
        let scaler = Scaler::fit(&schema, records)?;
        let space = FeatureSpace::new(schema, scaler)?;
        let instances = records
            .iter()
            .enumerate()
            .map(|(i, r)| {
                space.encode(r).map(|values| EncodedInstance {
                    values,
                    raw_id: Some(i),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Self::check_labels(&labels, instances.len())?;
        Ok(Self {
            space,
            instances,
            labels,
        })
    }

    /// Wraps already-encoded rows. `labels` may be empty.
    pub fn from_encoded(space: FeatureSpace, rows: Vec<Vec<f64>>, labels: Vec<String>) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::EmptyDataset);
        }
        if let Some(bad) = rows.iter().find(|r| r.len() != space.width()) {
            return Err(Error::WidthMismatch {
                expected: space.width(),
                actual: bad.len(),
            });
        }
        Self::check_labels(&labels, rows.len())?;
        let instances = rows
            .into_iter()
            .enumerate()
            .map(|(i, values)| EncodedInstance {
                values,
                raw_id: Some(i),
            })
            .collect();
        Ok(Self {
            space,
            instances,
            labels,
        })
    }

    fn check_labels(labels: &[String], n: usize) -> Result<()> {
        if !labels.is_empty() && labels.len() != n {
            return Err(Error::WidthMismatch {
                expected: n,
                actual: labels.len(),
            });
        }
        Ok(())
    }

    pub fn space(&self) -> &FeatureSpace {
        &self.space
    }

    pub fn schema(&self) -> &FeatureSchema {
        &self.space.schema
    }

    pub fn len(&self) -> usize {
        self.instances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.instances.is_empty()
    }

    pub fn width(&self) -> usize {
        self.space.width()
    }

    pub fn instances(&self) -> &[EncodedInstance] {
        &self.instances
    }

    pub fn row(&self, id: usize) -> &[f64] {
        &self.instances[id].values
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[f64]> {
        self.instances.iter().map(|i| i.values.as_slice())
    }

    /// Label column as read from the file; never consulted by the engine.
    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    /// Hex SHA-256 over the schema, scaler and encoded values.
    pub fn fingerprint(&self) -> String {
        let mut h = Sha256::new();
        h.update(serde_json::to_vec(&self.space).expect("space serializes"));
        h.update((self.instances.len() as u64).to_le_bytes());
        for inst in &self.instances {
            for v in &inst.values {
                h.update(v.to_le_bytes());
            }
        }
        hex::encode(h.finalize())
    }
}

/// Reads a CSV dataset described by a JSON schema file.
pub fn load_dataset(csv_path: &Path, schema_path: &Path) -> Result<(Dataset, FeatureSchema)> {
    let schema = FeatureSchema::from_json(&std::fs::read_to_string(schema_path)?)?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(csv_path)?;
    let (records, labels) = read_records(&mut reader, &schema)?;
    let data = Dataset::from_records(schema.clone(), &records, labels)?;
    Ok((data, schema))
}

/// Parses CSV rows into raw records and the label column.
pub fn read_records<R: std::io::Read>(
    reader: &mut csv::Reader<R>,
    schema: &FeatureSchema,
) -> Result<(Vec<RawRecord>, Vec<String>)> {
    let headers = reader.headers()?.clone();
    let position: HashMap<&str, usize> = headers.iter().enumerate().map(|(i, h)| (h, i)).collect();
    let mut columns = Vec::with_capacity(schema.len());
    for name in schema.names() {
        columns.push(
            *position
                .get(name)
                .ok_or_else(|| Error::MissingColumn(name.to_string()))?,
        );
    }
    let label_col = *position
        .get(schema.label())
        .ok_or_else(|| Error::MissingColumn(schema.label().to_string()))?;

    let mut records = Vec::new();
    let mut labels = Vec::new();
    for (row, rec) in reader.records().enumerate() {
        let rec = rec?;
        let mut raw = Vec::with_capacity(schema.len());
        for (spec, &col) in schema.features().iter().zip(&columns) {
            let cell = rec
                .get(col)
                .ok_or_else(|| Error::MissingColumn(spec.name.clone()))?;
            let value = match spec.kind {
                FeatureKind::Categorical => {
                    if !spec.categories.iter().any(|c| c == cell) {
                        return Err(Error::UnknownCategory {
                            feature: spec.name.clone(),
                            value: cell.to_string(),
                        });
                    }
                    RawValue::Category(cell.to_string())
                }
                FeatureKind::Ordinal if !spec.categories.is_empty() => {
                    if !spec.categories.iter().any(|c| c == cell) {
                        return Err(Error::UnknownCategory {
                            feature: spec.name.clone(),
                            value: cell.to_string(),
                        });
                    }
                    RawValue::Category(cell.to_string())
                }
                _ => RawValue::Number(cell.parse::<f64>().map_err(|_| Error::NonNumericCell {
                    column: spec.name.clone(),
                    row,
                    value: cell.to_string(),
                })?),
            };
            raw.push(value);
        }
        records.push(raw);
        labels.push(rec.get(label_col).unwrap_or_default().to_string());
    }
    if records.is_empty() {
        return Err(Error::EmptyDataset);
    }
    Ok((records, labels))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write(dir: &Path, name: &str, text: &str) -> std::path::PathBuf {
        let p = dir.join(name);
        std::fs::File::create(&p).unwrap().write_all(text.as_bytes()).unwrap();
        p
    }

    const TWO_NUMERIC: &str = r#"{"features":[
        {"name":"a","kind":"continuous"},
        {"name":"b","kind":"discrete"}], "label":"y"}"#;

    #[test]
    fn loads_numeric_rows_in_order() {
        let dir = tempfile::tempdir().unwrap();
        let csv = write(dir.path(), "d.csv", "a,b,y\n0,1,A\n1,2,A\n2,3,B\n3,4,B\n4,5,A\n");
        let schema = write(dir.path(), "s.json", TWO_NUMERIC);
        let (data, schema) = load_dataset(&csv, &schema).unwrap();
        assert_eq!(schema.width(), 2);
        assert_eq!(data.len(), 5);
        assert_eq!(data.row(2), &[0.5, 0.5]);
        assert_eq!(data.instances()[4].raw_id, Some(4));
        assert_eq!(data.labels()[2], "B");
    }

    #[test]
    fn header_order_does_not_matter() {
        let dir = tempfile::tempdir().unwrap();
        let csv = write(dir.path(), "d.csv", "y,b,a\nA,1,0\nB,3,4\n");
        let schema = write(dir.path(), "s.json", TWO_NUMERIC);
        let (data, _) = load_dataset(&csv, &schema).unwrap();
        assert_eq!(data.row(1), &[1.0, 1.0]);
    }

    #[test]
    fn one_hot_expansion() {
        let dir = tempfile::tempdir().unwrap();
        let csv = write(dir.path(), "d.csv", "c,y\nred,0\ngreen,1\nblue,0\n");
        let schema = write(
            dir.path(),
            "s.json",
            r#"{"features":[{"name":"c","kind":"categorical","categories":["red","blue","green"]}],"label":"y"}"#,
        );
        let (data, schema) = load_dataset(&csv, &schema).unwrap();
        assert_eq!(schema.width(), 3);
        for row in data.rows() {
            assert_eq!(row.iter().sum::<f64>(), 1.0);
            assert!(row.iter().all(|&v| v == 0.0 || v == 1.0));
        }
        assert_eq!(data.row(1), &[0.0, 0.0, 1.0]);
    }

    #[test]
    fn load_errors() {
        let dir = tempfile::tempdir().unwrap();
        let schema = write(
            dir.path(),
            "s.json",
            r#"{"features":[{"name":"c","kind":"categorical","categories":["red","blue"]},{"name":"x","kind":"continuous"}],"label":"y"}"#,
        );
        let unknown = write(dir.path(), "u.csv", "c,x,y\nblu,1,0\n");
        assert!(matches!(load_dataset(&unknown, &schema), Err(Error::UnknownCategory { .. })));
        let missing = write(dir.path(), "m.csv", "c,y\nred,0\n");
        assert!(matches!(load_dataset(&missing, &schema), Err(Error::MissingColumn(c)) if c == "x"));
        let text = write(dir.path(), "t.csv", "c,x,y\nred,abc,0\n");
        assert!(matches!(load_dataset(&text, &schema), Err(Error::NonNumericCell { .. })));
        let empty = write(dir.path(), "e.csv", "c,x,y\n");
        assert!(matches!(load_dataset(&empty, &schema), Err(Error::EmptyDataset)));
    }

    #[test]
    fn fingerprint_tracks_content() {
        let space = FeatureSpace::unscaled(
            FeatureSchema::new(vec![super::super::FeatureSpec::continuous("x")], "y").unwrap(),
        );
        let a = Dataset::from_encoded(space.clone(), vec![vec![0.0], vec![1.0]], vec![]).unwrap();
        let b = Dataset::from_encoded(space.clone(), vec![vec![0.0], vec![1.0]], vec![]).unwrap();
        let c = Dataset::from_encoded(space, vec![vec![0.0], vec![2.0]], vec![]).unwrap();
        assert_eq!(a.fingerprint(), b.fingerprint());
        assert_ne!(a.fingerprint(), c.fingerprint());
    }
}
