//! Feature swapping towards the nearest unlike neighbour.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::predictor::{ClassId, Predictor};
use crate::tabular::{Dataset, Metric};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct NiceConfig {
    /// Upper bound on swapped features; `None` allows all of them.
    pub max_swaps: Option<usize>,
}

/// Copies features from the nearest training row predicted in another class,
/// one at a time, until the class of `x` changes.
///
/// Each round applies the swap that flips the class if any does, otherwise
/// the one that stays closest to `x`; ties go to the earlier feature.
/// `train_classes` are the predicted classes of the training rows.
pub fn nice_counterfactual<P: Predictor + ?Sized>(
    x: &[f64],
    train: &Dataset,
    train_classes: &[ClassId],
    predictor: &P,
    metric: Metric,
    cfg: &NiceConfig,
) -> Result<Option<Vec<f64>>> {
    let space = train.space();
    if x.len() != space.width() {
        return Err(Error::WidthMismatch { expected: space.width(), actual: x.len() });
    }
    if train_classes.len() != train.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} training classes for {} rows",
            train_classes.len(),
            train.len()
        )));
    }
    let own = predictor.predict_one(x)?;
    let prototype = train
        .rows()
        .zip(train_classes)
        .enumerate()
        .filter(|(_, (_, &c))| c != own)
        .map(|(i, (row, _))| (metric.between(x, row), i))
        .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let Some((_, proto_id)) = prototype else {
        return Ok(None);
    };
    let proto = train.row(proto_id);

    let mut remaining = space.changed_features(x, proto);
    let limit = cfg.max_swaps.unwrap_or(remaining.len());
    let mut current = x.to_vec();
    for _ in 0..limit.min(remaining.len()) {
        let trials: Vec<Vec<f64>> = remaining
            .iter()
            .map(|&i| {
                let mut t = current.clone();
                space.copy_feature(i, &mut t, proto);
                t
            })
            .collect();
        let refs: Vec<&[f64]> = trials.iter().map(Vec::as_slice).collect();
        let classes = predictor.predict(&refs)?;
        let (k, _) = classes
            .iter()
            .zip(&trials)
            .map(|(&c, t)| (c != own, metric.between(x, t)))
            .enumerate()
            .min_by(|(i, a), (j, b)| b.0.cmp(&a.0).then(a.1.total_cmp(&b.1)).then(i.cmp(j)))
            .expect("at least one remaining feature");
        current = trials[k].clone();
        remaining.remove(k);
        if classes[k] != own {
            return Ok(Some(current));
        }
    }
    Ok(None)
}
