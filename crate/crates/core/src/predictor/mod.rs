//! The black-box prediction contract.
//!
//! Everything downstream only ever sees hard class labels returned by a
//! [`Predictor`]. Three implementations ship with the crate: a k-nearest
//! neighbour vote, a small ReLU network evaluated from a JSON weights file, and
//! a bridge to an external process speaking newline-delimited JSON.

mod knn;
mod mlp;
mod protocol;
mod subprocess;

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::Result;

pub use knn::{knn_predictor, KnnPredictor};
pub use mlp::{mlp_predictor, DenseLayer, MlpPredictor};
pub use protocol::{serve, Request, Response};
pub use subprocess::{subprocess_predictor, SubprocessPredictor};

/// Index into [`Predictor::classes`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ClassId(pub u32);

impl ClassId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for ClassId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl From<usize> for ClassId {
    fn from(i: usize) -> Self {
        ClassId(i as u32)
    }
}

/// A deterministic classifier over encoded instances.
pub trait Predictor: Send + Sync {
    /// One class per row of `batch`, in order.
    fn predict(&self, batch: &[&[f64]]) -> Result<Vec<ClassId>>;

    /// Ordered class names; `ClassId(k)` names `classes()[k]`.
    fn classes(&self) -> &[String];

    /// Stable identity used to detect stale coverage caches.
    fn fingerprint(&self) -> String;

    fn predict_one(&self, x: &[f64]) -> Result<ClassId> {
        Ok(self.predict(&[x])?[0])
    }

    fn n_classes(&self) -> usize {
        self.classes().len()
    }

    fn class_name(&self, c: ClassId) -> &str {
        self.classes().get(c.index()).map(String::as_str).unwrap_or("?")
    }

    fn class_by_name(&self, name: &str) -> Option<ClassId> {
        self.classes().iter().position(|c| c == name).map(ClassId::from)
    }
}

impl<P: Predictor + ?Sized> Predictor for &P {
    fn predict(&self, batch: &[&[f64]]) -> Result<Vec<ClassId>> {
        (**self).predict(batch)
    }
    fn classes(&self) -> &[String] {
        (**self).classes()
    }
    fn fingerprint(&self) -> String {
        (**self).fingerprint()
    }
}

impl<P: Predictor + ?Sized> Predictor for Box<P> {
    fn predict(&self, batch: &[&[f64]]) -> Result<Vec<ClassId>> {
        (**self).predict(batch)
    }
    fn classes(&self) -> &[String] {
        (**self).classes()
    }
    fn fingerprint(&self) -> String {
        (**self).fingerprint()
    }
}

impl<P: Predictor + ?Sized> Predictor for Arc<P> {
    fn predict(&self, batch: &[&[f64]]) -> Result<Vec<ClassId>> {
        (**self).predict(batch)
    }
    fn classes(&self) -> &[String] {
        (**self).classes()
    }
    fn fingerprint(&self) -> String {
        (**self).fingerprint()
    }
}

/// Wraps a plain function as a predictor.
pub struct FnPredictor<F> {
    name: String,
    classes: Vec<String>,
    f: F,
}

impl<F> FnPredictor<F>
where
    F: Fn(&[f64]) -> ClassId + Send + Sync,
{
    pub fn new<S: Into<String>>(name: impl Into<String>, classes: impl IntoIterator<Item = S>, f: F) -> Self {
        Self {
            name: name.into(),
            classes: classes.into_iter().map(Into::into).collect(),
            f,
        }
    }
}

impl<F> Predictor for FnPredictor<F>
where
    F: Fn(&[f64]) -> ClassId + Send + Sync,
{
    fn predict(&self, batch: &[&[f64]]) -> Result<Vec<ClassId>> {
        Ok(batch.iter().map(|x| (self.f)(x)).collect())
    }

    fn classes(&self) -> &[String] {
        &self.classes
    }

    fn fingerprint(&self) -> String {
        format!("fn:{}", self.name)
    }
}

const LABEL_BATCH: usize = 1024;

/// Predicted class of every row, in order.
pub fn predict_labels<'a, P, I>(rows: I, predictor: &P) -> Result<Vec<ClassId>>
where
    P: Predictor + ?Sized,
    I: IntoIterator<Item = &'a [f64]>,
{
    let rows: Vec<&[f64]> = rows.into_iter().collect();
    let mut out = Vec::with_capacity(rows.len());
    for chunk in rows.chunks(LABEL_BATCH) {
        out.extend(predictor.predict(chunk)?);
    }
    Ok(out)
}
