use std::collections::HashSet;
use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureKind {
    Continuous,
    Discrete,
    Ordinal,
    Categorical,
}

/// One semantic feature of a tabular dataset.
///
/// Ordinal features may list their levels in `categories` (lowest first), in
/// which case cells hold level names and the encoded value is the level rank.
/// Without levels, ordinal cells hold integer ranks directly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSpec {
    pub name: String,
    pub kind: FeatureKind,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub categories: Vec<String>,
    #[serde(default)]
    pub immutable: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lower: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub upper: Option<f64>,
}

impl FeatureSpec {
    pub fn continuous(name: impl Into<String>) -> Self {
        Self::new(name, FeatureKind::Continuous, Vec::new())
    }

    pub fn discrete(name: impl Into<String>) -> Self {
        Self::new(name, FeatureKind::Discrete, Vec::new())
    }

    pub fn ordinal<S: Into<String>>(name: impl Into<String>, levels: impl IntoIterator<Item = S>) -> Self {
        Self::new(
            name,
            FeatureKind::Ordinal,
            levels.into_iter().map(Into::into).collect(),
        )
    }

    pub fn categorical<S: Into<String>>(
        name: impl Into<String>,
        categories: impl IntoIterator<Item = S>,
    ) -> Self {
        Self::new(
            name,
            FeatureKind::Categorical,
            categories.into_iter().map(Into::into).collect(),
        )
    }

    fn new(name: impl Into<String>, kind: FeatureKind, categories: Vec<String>) -> Self {
        Self {
            name: name.into(),
            kind,
            categories,
            immutable: false,
            lower: None,
            upper: None,
        }
    }

    pub fn immutable(mut self) -> Self {
        self.immutable = true;
        self
    }

    pub fn bounded(mut self, lower: Option<f64>, upper: Option<f64>) -> Self {
        self.lower = lower;
        self.upper = upper;
        self
    }

    /// Number of encoded columns this feature occupies.
    pub fn width(&self) -> usize {
        match self.kind {
            FeatureKind::Categorical => self.categories.len(),
            _ => 1,
        }
    }

    pub fn is_categorical(&self) -> bool {
        self.kind == FeatureKind::Categorical
    }

    /// Whether encoded values must decode to integers.
    pub fn is_integral(&self) -> bool {
        matches!(self.kind, FeatureKind::Discrete | FeatureKind::Ordinal)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct SchemaFile {
    features: Vec<FeatureSpec>,
    label: String,
}

/// Ordered feature list plus the encoded column layout derived from it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SchemaFile", into = "SchemaFile")]
pub struct FeatureSchema {
    features: Vec<FeatureSpec>,
    label: String,
    offsets: Vec<usize>,
    width: usize,
}

impl TryFrom<SchemaFile> for FeatureSchema {
    type Error = Error;

    fn try_from(file: SchemaFile) -> Result<Self> {
        FeatureSchema::new(file.features, file.label)
    }
}

impl From<FeatureSchema> for SchemaFile {
    fn from(schema: FeatureSchema) -> Self {
        SchemaFile {
            features: schema.features,
            label: schema.label,
        }
    }
}

impl FeatureSchema {
    pub fn new(features: Vec<FeatureSpec>, label: impl Into<String>) -> Result<Self> {
        let label = label.into();
        if features.is_empty() {
            return Err(Error::InvalidSchema("no features declared".into()));
        }
        let mut seen = HashSet::new();
        for f in &features {
            if !seen.insert(f.name.as_str()) {
                return Err(Error::InvalidSchema(format!("duplicate feature {:?}", f.name)));
            }
            match f.kind {
                FeatureKind::Categorical if f.categories.len() < 2 => {
                    return Err(Error::InvalidSchema(format!(
                        "categorical feature {:?} needs at least 2 categories",
                        f.name
                    )));
                }
                FeatureKind::Continuous | FeatureKind::Discrete if !f.categories.is_empty() => {
                    return Err(Error::InvalidSchema(format!(
                        "numeric feature {:?} cannot list categories",
                        f.name
                    )));
                }
                _ => {}
            }
            let distinct: HashSet<_> = f.categories.iter().collect();
            if distinct.len() != f.categories.len() {
                return Err(Error::InvalidSchema(format!(
                    "feature {:?} repeats a category",
                    f.name
                )));
            }
            if let (Some(lo), Some(hi)) = (f.lower, f.upper) {
                if lo > hi {
                    return Err(Error::InvalidSchema(format!(
                        "feature {:?} has lower bound above upper bound",
                        f.name
                    )));
                }
            }
        }
        if seen.contains(label.as_str()) {
            return Err(Error::InvalidSchema(format!(
                "label {label:?} collides with a feature name"
            )));
        }
        let mut offsets = Vec::with_capacity(features.len());
        let mut width = 0;
        for f in &features {
            offsets.push(width);
            width += f.width();
        }
        Ok(Self {
            features,
            label,
            offsets,
            width,
        })
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn features(&self) -> &[FeatureSpec] {
        &self.features
    }

    pub fn feature(&self, index: usize) -> &FeatureSpec {
        &self.features[index]
    }

    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    /// Total number of encoded columns.
    pub fn width(&self) -> usize {
        self.width
    }

    /// Encoded columns occupied by feature `index`.
    pub fn columns(&self, index: usize) -> Range<usize> {
        let start = self.offsets[index];
        start..start + self.features[index].width()
    }

    /// Semantic feature that owns encoded column `column`.
    pub fn feature_of_column(&self, column: usize) -> usize {
        debug_assert!(column < self.width);
        match self.offsets.binary_search(&column) {
            Ok(i) => i,
            Err(i) => i - 1,
        }
    }

    pub fn position(&self, name: &str) -> Option<usize> {
        self.features.iter().position(|f| f.name == name)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.features.iter().map(|f| f.name.as_str())
    }

    pub fn has_immutable(&self) -> bool {
        self.features.iter().any(|f| f.immutable)
    }
}

/// A cell of a raw (decoded) record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum RawValue {
    Number(f64),
    Category(String),
}

impl std::fmt::Display for RawValue {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            RawValue::Number(v) => write!(f, "{v}"),
            RawValue::Category(c) => f.write_str(c),
        }
    }
}

pub type RawRecord = Vec<RawValue>;
