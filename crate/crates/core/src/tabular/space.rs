//! Min-max scaling, one-hot expansion and the reverse mapping.
//!
//! Every non-categorical feature owns one encoded column holding its value
//! scaled by the training minimum and maximum. Categorical features expand to
//! one column per category. Ordinal features stay in a single column holding
//! their rank.

use serde::{Deserialize, Serialize};

use super::schema::{FeatureKind, FeatureSchema, FeatureSpec, RawRecord, RawValue};
use crate::error::{Error, Result};

/// Tolerance for accepting a decoded integral value.
pub const INTEGRAL_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ColumnRange {
    pub min: f64,
    pub max: f64,
}

impl ColumnRange {
    pub fn scale(&self, v: f64) -> f64 {
        let span = self.max - self.min;
        if span > 0.0 {
            (v - self.min) / span
        } else {
            0.0
        }
    }

    pub fn unscale(&self, s: f64) -> f64 {
        let span = self.max - self.min;
        if span > 0.0 {
            self.min + s * span
        } else {
            self.min
        }
    }
}

/// Per-feature ranges; `None` for categorical features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scaler {
    ranges: Vec<Option<ColumnRange>>,
}

impl Scaler {
    /// Fits ranges over the numeric view of `records`.
    pub fn fit(schema: &FeatureSchema, records: &[RawRecord]) -> Result<Self> {
        if records.is_empty() {
            return Err(Error::EmptyDataset);
        }
        let mut ranges = Vec::with_capacity(schema.len());
        for (i, spec) in schema.features().iter().enumerate() {
            if spec.is_categorical() {
                ranges.push(None);
                continue;
            }
            let mut lo = f64::INFINITY;
            let mut hi = f64::NEG_INFINITY;
            for r in records {
                let v = numeric_value(spec, record_cell(r, i, schema)?)?;
                lo = lo.min(v);
                hi = hi.max(v);
            }
            ranges.push(Some(ColumnRange { min: lo, max: hi }));
        }
        Ok(Self { ranges })
    }

    /// A scaler that leaves every numeric column untouched (min 0, max 1).
    pub fn identity(schema: &FeatureSchema) -> Self {
        let ranges = schema
            .features()
            .iter()
            .map(|f| (!f.is_categorical()).then_some(ColumnRange { min: 0.0, max: 1.0 }))
            .collect();
        Self { ranges }
    }

    pub fn from_ranges(ranges: Vec<Option<ColumnRange>>) -> Self {
        Self { ranges }
    }

    pub fn range(&self, feature: usize) -> Option<&ColumnRange> {
        self.ranges.get(feature).and_then(Option::as_ref)
    }

    pub fn len(&self) -> usize {
        self.ranges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ranges.is_empty()
    }
}

fn record_cell<'a>(record: &'a RawRecord, i: usize, schema: &FeatureSchema) -> Result<&'a RawValue> {
    if record.len() != schema.len() {
        return Err(Error::WidthMismatch {
            expected: schema.len(),
            actual: record.len(),
        });
    }
    Ok(&record[i])
}

/// Numeric view of a non-categorical cell (ordinal levels map to their rank).
fn numeric_value(spec: &FeatureSpec, cell: &RawValue) -> Result<f64> {
    match (spec.kind, cell) {
        (FeatureKind::Ordinal, RawValue::Category(c)) if !spec.categories.is_empty() => spec
            .categories
            .iter()
            .position(|x| x == c)
            .map(|p| p as f64)
            .ok_or_else(|| Error::UnknownCategory {
                feature: spec.name.clone(),
                value: c.clone(),
            }),
        (FeatureKind::Categorical, _) => unreachable!("categorical features have no numeric view"),
        (_, RawValue::Number(v)) => Ok(*v),
        (_, RawValue::Category(c)) => Err(Error::NonNumericCell {
            column: spec.name.clone(),
            row: 0,
            value: c.clone(),
        }),
    }
}

/// Schema plus fitted scaler: everything needed to move between raw records
/// and encoded vectors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSpace {
    pub schema: FeatureSchema,
    pub scaler: Scaler,
}

impl FeatureSpace {
    pub fn new(schema: FeatureSchema, scaler: Scaler) -> Result<Self> {
        if scaler.len() != schema.len() {
            return Err(Error::WidthMismatch {
                expected: schema.len(),
                actual: scaler.len(),
            });
        }
        for (i, f) in schema.features().iter().enumerate() {
            if f.is_categorical() == scaler.range(i).is_some() {
                return Err(Error::InvalidSchema(format!(
                    "scaler does not match kind of feature {:?}",
                    f.name
                )));
            }
        }
        Ok(Self { schema, scaler })
    }

    /// Space with identity scaling, for data that is already numeric and scaled.
    pub fn unscaled(schema: FeatureSchema) -> Self {
        let scaler = Scaler::identity(&schema);
        Self { schema, scaler }
    }

    pub fn width(&self) -> usize {
        self.schema.width()
    }

    pub fn encode(&self, record: &RawRecord) -> Result<Vec<f64>> {
        encode(record, &self.schema, &self.scaler)
    }

    pub fn decode(&self, values: &[f64]) -> Result<RawRecord> {
        decode(values, &self.schema, &self.scaler)
    }

    /// Restores integrality of discrete/ordinal columns and one-hot validity.
    ///
    /// One-hot groups take their argmax; ties go to the category active in
    /// `reference` when it is among the tied, otherwise to the lowest index.
    pub fn snap(&self, values: &mut [f64], reference: &[f64]) {
        debug_assert_eq!(values.len(), self.width());
        for (i, spec) in self.schema.features().iter().enumerate() {
            let cols = self.schema.columns(i);
            match spec.kind {
                FeatureKind::Continuous => {}
                FeatureKind::Discrete | FeatureKind::Ordinal => {
                    let range = self.scaler.range(i).expect("numeric feature has a range");
                    let mut v = range.unscale(values[cols.start]).round();
                    if let Some(lo) = spec.lower {
                        v = v.max(lo.ceil());
                    }
                    if let Some(hi) = spec.upper {
                        v = v.min(hi.floor());
                    }
                    if spec.kind == FeatureKind::Ordinal && !spec.categories.is_empty() {
                        v = v.clamp(0.0, (spec.categories.len() - 1) as f64);
                    }
                    values[cols.start] = range.scale(v);
                }
                FeatureKind::Categorical => {
                    let block = &values[cols.clone()];
                    let best = block.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                    let preferred = reference[cols.clone()]
                        .iter()
                        .position(|&r| r == 1.0)
                        .filter(|&p| block[p] == best);
                    let chosen = preferred
                        .unwrap_or_else(|| block.iter().position(|&b| b == best).unwrap_or(0));
                    for (k, c) in cols.enumerate() {
                        values[c] = if k == chosen { 1.0 } else { 0.0 };
                    }
                }
            }
        }
    }

    /// Magnitude of the change in feature `i` between two encoded points.
    /// One-hot groups report half their L1 difference.
    pub fn feature_difference(&self, i: usize, a: &[f64], b: &[f64]) -> f64 {
        let cols = self.schema.columns(i);
        let l1: f64 = cols.map(|c| (a[c] - b[c]).abs()).sum();
        if self.schema.feature(i).is_categorical() {
            l1 / 2.0
        } else {
            l1
        }
    }

    pub fn feature_changed(&self, i: usize, a: &[f64], b: &[f64]) -> bool {
        self.schema.columns(i).any(|c| a[c] != b[c])
    }

    /// Indices of semantic features that differ between `a` and `b`.
    pub fn changed_features(&self, a: &[f64], b: &[f64]) -> Vec<usize> {
        (0..self.schema.len())
            .filter(|&i| self.feature_changed(i, a, b))
            .collect()
    }

    /// Copies the columns of feature `i` from `src` into `dst`.
    pub fn copy_feature(&self, i: usize, dst: &mut [f64], src: &[f64]) {
        let cols = self.schema.columns(i);
        dst[cols.clone()].copy_from_slice(&src[cols]);
    }
}

/// Encodes a raw record: numeric features min-max scaled, categoricals one-hot.
pub fn encode(record: &RawRecord, schema: &FeatureSchema, scaler: &Scaler) -> Result<Vec<f64>> {
    let mut out = vec![0.0; schema.width()];
    for (i, spec) in schema.features().iter().enumerate() {
        let cell = record_cell(record, i, schema)?;
        let cols = schema.columns(i);
        if spec.is_categorical() {
            let RawValue::Category(c) = cell else {
                return Err(Error::UnknownCategory {
                    feature: spec.name.clone(),
                    value: cell.to_string(),
                });
            };
            let k = spec
                .categories
                .iter()
                .position(|x| x == c)
                .ok_or_else(|| Error::UnknownCategory {
                    feature: spec.name.clone(),
                    value: c.clone(),
                })?;
            out[cols.start + k] = 1.0;
            continue;
        }
        let v = numeric_value(spec, cell)?;
        if spec.lower.is_some_and(|lo| v < lo) || spec.upper.is_some_and(|hi| v > hi) {
            return Err(Error::OutOfBounds {
                feature: spec.name.clone(),
                value: v,
            });
        }
        if spec.is_integral() && (v - v.round()).abs() > INTEGRAL_TOLERANCE {
            return Err(Error::NonIntegralDiscrete {
                feature: spec.name.clone(),
                value: v,
            });
        }
        let range = scaler
            .range(i)
            .ok_or_else(|| Error::InvalidSchema(format!("no scaler range for {:?}", spec.name)))?;
        out[cols.start] = range.scale(v);
    }
    Ok(out)
}

/// Inverse of [`encode`].
pub fn decode(values: &[f64], schema: &FeatureSchema, scaler: &Scaler) -> Result<RawRecord> {
    if values.len() != schema.width() {
        return Err(Error::WidthMismatch {
            expected: schema.width(),
            actual: values.len(),
        });
    }
    let mut out = Vec::with_capacity(schema.len());
    for (i, spec) in schema.features().iter().enumerate() {
        let cols = schema.columns(i);
        if spec.is_categorical() {
            let block = &values[cols];
            let ones: Vec<usize> = (0..block.len()).filter(|&k| block[k] == 1.0).collect();
            let zeros = block.iter().filter(|&&b| b == 0.0).count();
            if ones.len() != 1 || zeros != block.len() - 1 {
                return Err(Error::InvalidOneHot(spec.name.clone()));
            }
            out.push(RawValue::Category(spec.categories[ones[0]].clone()));
            continue;
        }
        let range = scaler
            .range(i)
            .ok_or_else(|| Error::InvalidSchema(format!("no scaler range for {:?}", spec.name)))?;
        let v = range.unscale(values[cols.start]);
        if !spec.is_integral() {
            out.push(RawValue::Number(v));
            continue;
        }
        let rounded = v.round();
        if (v - rounded).abs() > INTEGRAL_TOLERANCE {
            return Err(Error::NonIntegralDiscrete {
                feature: spec.name.clone(),
                value: v,
            });
        }
        if spec.kind == FeatureKind::Ordinal && !spec.categories.is_empty() {
            let level = spec
                .categories
                .get(rounded as usize)
                .filter(|_| rounded >= 0.0)
                .ok_or_else(|| Error::OutOfBounds {
                    feature: spec.name.clone(),
                    value: rounded,
                })?;
            out.push(RawValue::Category(level.clone()));
        } else {
            // normalise -0.0
            out.push(RawValue::Number(rounded + 0.0));
        }
    }
    Ok(out)
}
