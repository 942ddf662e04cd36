//! Fully-connected ReLU network loaded from a JSON weights file.
//!
//! ```json
//! {
//!   "classes": ["no", "yes"],
//!   "layers": [
//!     {"weights": [[...], ...], "biases": [...]},
//!     ...
//!   ]
//! }
//! ```
//!
//! `weights` is row-major with one row per output unit. Every layer but the
//! last is followed by a ReLU; the prediction is the argmax of the final
//! logits, ties going to the lowest class index.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{ClassId, Predictor};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseLayer {
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<f64>,
}

impl DenseLayer {
    pub fn inputs(&self) -> usize {
        self.weights.first().map_or(0, Vec::len)
    }

    pub fn outputs(&self) -> usize {
        self.weights.len()
    }

    fn apply(&self, x: &[f64], out: &mut Vec<f64>) {
        out.clear();
        out.extend(
            self.weights
                .iter()
                .zip(&self.biases)
                .map(|(row, b)| row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>() + b),
        );
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct WeightsFile {
    #[serde(default)]
    classes: Vec<String>,
    layers: Vec<DenseLayer>,
}

#[derive(Debug, Clone)]
pub struct MlpPredictor {
    layers: Vec<DenseLayer>,
    classes: Vec<String>,
    fingerprint: String,
}

impl MlpPredictor {
    /// Validates layer shapes. Empty `classes` yields names "0", "1", ...
    pub fn new(layers: Vec<DenseLayer>, classes: Vec<String>) -> Result<Self> {
        let Some(first) = layers.first() else {
            return Err(Error::ShapeMismatch("network has no layers".into()));
        };
        if first.inputs() == 0 {
            return Err(Error::ShapeMismatch("first layer has no inputs".into()));
        }
        let mut expected_in = first.inputs();
        for (k, layer) in layers.iter().enumerate() {
            if layer.outputs() == 0 {
                return Err(Error::ShapeMismatch(format!("layer {k} has no outputs")));
            }
            if layer.biases.len() != layer.outputs() {
                return Err(Error::ShapeMismatch(format!(
                    "layer {k}: {} biases for {} outputs",
                    layer.biases.len(),
                    layer.outputs()
                )));
            }
            if let Some(row) = layer.weights.iter().find(|r| r.len() != expected_in) {
                return Err(Error::ShapeMismatch(format!(
                    "layer {k}: weight row of width {} where {expected_in} inputs expected",
                    row.len()
                )));
            }
            if layer
                .weights
                .iter()
                .flatten()
                .chain(&layer.biases)
                .any(|v| !v.is_finite())
            {
                return Err(Error::CorruptWeights(format!("layer {k} holds a non-finite value")));
            }
            expected_in = layer.outputs();
        }
        let n_out = expected_in;
        let classes = if classes.is_empty() {
            (0..n_out).map(|c| c.to_string()).collect()
        } else if classes.len() == n_out {
            classes
        } else {
            return Err(Error::ShapeMismatch(format!(
                "{} class names for {n_out} outputs",
                classes.len()
            )));
        };
        let fingerprint = {
            let mut h = Sha256::new();
            h.update(serde_json::to_vec(&layers).expect("layers serialize"));
            h.update(serde_json::to_vec(&classes).expect("classes serialize"));
            hex::encode(h.finalize())
        };
        Ok(Self {
            layers,
            classes,
            fingerprint,
        })
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let file: WeightsFile = serde_json::from_str(&text)
            .map_err(|e| Error::CorruptWeights(format!("{}: {e}", path.display())))?;
        Self::new(file.layers, file.classes)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = WeightsFile {
            classes: self.classes.clone(),
            layers: self.layers.clone(),
        };
        std::fs::write(path, serde_json::to_string_pretty(&file)?)?;
        Ok(())
    }

    pub fn input_width(&self) -> usize {
        self.layers[0].inputs()
    }

    pub fn layers(&self) -> &[DenseLayer] {
        &self.layers
    }

    /// Final-layer logits for one input.
    pub fn logits(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.input_width() {
            return Err(Error::ShapeMismatch(format!(
                "input of width {} for a network expecting {}",
                x.len(),
                self.input_width()
            )));
        }
        let mut cur = x.to_vec();
        let mut next = Vec::new();
        let last = self.layers.len() - 1;
        for (k, layer) in self.layers.iter().enumerate() {
            layer.apply(&cur, &mut next);
            if k < last {
                next.iter_mut().for_each(|v| *v = v.max(0.0));
            }
            std::mem::swap(&mut cur, &mut next);
        }
        Ok(cur)
    }
}

fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate().skip(1) {
        if x > v[best] {
            best = i;
        }
    }
    best
}

pub fn mlp_predictor(weights_path: &Path) -> Result<MlpPredictor> {
    MlpPredictor::from_file(weights_path)
}

impl Predictor for MlpPredictor {
    fn predict(&self, batch: &[&[f64]]) -> Result<Vec<ClassId>> {
        batch
            .iter()
            .map(|x| self.logits(x).map(|l| ClassId::from(argmax(&l))))
            .collect()
    }

    fn classes(&self) -> &[String] {
        &self.classes
    }

    fn fingerprint(&self) -> String {
        format!("mlp:{}", self.fingerprint)
    }
}
