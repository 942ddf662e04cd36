//! Random search on growing spherical layers around the factual.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::predictor::{ClassId, Predictor};
use crate::tabular::{FeatureSpace, Metric};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GrowingSpheresConfig {
    pub n_per_layer: usize,
    /// Radius of the innermost ball, in scaled units.
    pub initial_radius: f64,
    pub radius_step: f64,
    pub max_layers: usize,
    pub seed: u64,
}

impl Default for GrowingSpheresConfig {
    fn default() -> Self {
        Self {
            n_per_layer: 200,
            initial_radius: 0.1,
            radius_step: 0.1,
            max_layers: 100,
            seed: 0,
        }
    }
}

impl GrowingSpheresConfig {
    fn validate(&self) -> Result<()> {
        if self.n_per_layer == 0 || self.max_layers == 0 {
            return Err(Error::InvalidConfig("growing spheres needs positive sample and layer counts".into()));
        }
        if !(self.initial_radius > 0.0 && self.radius_step > 0.0) {
            return Err(Error::InvalidConfig("growing spheres needs positive radii".into()));
        }
        Ok(())
    }

    /// Inner and outer radius of layer `k`; layer 0 is the full inner ball.
    pub fn layer_bounds(&self, k: usize) -> (f64, f64) {
        if k == 0 {
            (0.0, self.initial_radius)
        } else {
            (
                self.initial_radius + (k - 1) as f64 * self.radius_step,
                self.initial_radius + k as f64 * self.radius_step,
            )
        }
    }
}

/// Uniform sample in the shell `lo <= |v| < hi` of dimension `dim`.
fn sample_shell(rng: &mut ChaCha8Rng, dim: usize, lo: f64, hi: f64) -> Vec<f64> {
    let mut dir: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
    let norm = dir.iter().map(|v| v * v).sum::<f64>().sqrt();
    let d = dim as f64;
    let u: f64 = rng.random();
    let r = (lo.powf(d) + u * (hi.powf(d) - lo.powf(d))).powf(1.0 / d);
    let scale = if norm > 0.0 { r / norm } else { 0.0 };
    dir.iter_mut().for_each(|v| *v *= scale);
    dir
}

/// Reverts features of `cf` to `x`, smallest change first, until a revert
/// would lose `class`.
fn sparsify<P: Predictor + ?Sized>(
    x: &[f64],
    cf: &[f64],
    class: ClassId,
    predictor: &P,
    space: &FeatureSpace,
) -> Result<Vec<f64>> {
    let mut order: Vec<(f64, usize)> = space
        .changed_features(x, cf)
        .into_iter()
        .map(|i| (space.feature_difference(i, cf, x), i))
        .collect();
    order.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let mut current = cf.to_vec();
    for (_, i) in order {
        let mut trial = current.clone();
        space.copy_feature(i, &mut trial, x);
        if predictor.predict_one(&trial)? != class {
            break;
        }
        current = trial;
    }
    Ok(current)
}

/// Samples layer after layer until some point changes the predicted class of
/// `x`, then returns the closest such point after sparsification. Immutable
/// columns are never moved. `None` when every layer fails.
pub fn growing_spheres<P: Predictor + ?Sized>(
    x: &[f64],
    predictor: &P,
    space: &FeatureSpace,
    cfg: &GrowingSpheresConfig,
) -> Result<Option<Vec<f64>>> {
    cfg.validate()?;
    if x.len() != space.width() {
        return Err(Error::WidthMismatch { expected: space.width(), actual: x.len() });
    }
    let own = predictor.predict_one(x)?;
    let schema = &space.schema;
    let free: Vec<usize> = (0..schema.len())
        .filter(|&i| !schema.feature(i).immutable)
        .flat_map(|i| schema.columns(i))
        .collect();
    if free.is_empty() {
        return Ok(None);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    for k in 0..cfg.max_layers {
        let (lo, hi) = cfg.layer_bounds(k);
        let points: Vec<Vec<f64>> = (0..cfg.n_per_layer)
            .map(|_| {
                let step = sample_shell(&mut rng, free.len(), lo, hi);
                let mut p = x.to_vec();
                for (&c, s) in free.iter().zip(step) {
                    p[c] += s;
                }
                space.snap(&mut p, x);
                p
            })
            .collect();
        let refs: Vec<&[f64]> = points.iter().map(Vec::as_slice).collect();
        let classes = predictor.predict(&refs)?;
        let best = points
            .iter()
            .zip(&classes)
            .filter(|(_, &c)| c != own)
            .map(|(p, &c)| (Metric::Euclidean.between(x, p), p, c))
            .min_by(|a, b| a.0.total_cmp(&b.0));
        if let Some((_, p, c)) = best {
            return sparsify(x, p, c, predictor, space).map(Some);
        }
    }
    Ok(None)
}
