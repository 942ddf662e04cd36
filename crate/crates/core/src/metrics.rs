//! Quality metrics for counterfactuals, their aggregation over a sample, and
//! the per-dataset 0–1 rescaling used to compare methods.

use std::collections::BTreeMap;
use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::predictor::{predict_labels, ClassId, Predictor};
use crate::tabular::{Dataset, FeatureSpace, Metric};

/// Number of training neighbours inspected by yNN.
pub const YNN_NEIGHBOURS: usize = 5;

/// The eight reported metrics, in report and plot order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricName {
    L0,
    L1,
    L2,
    Linf,
    ConstraintViolation,
    Redundancy,
    Ynn,
    SuccessRate,
}

impl MetricName {
    pub const ALL: [MetricName; 8] = [
        MetricName::L0,
        MetricName::L1,
        MetricName::L2,
        MetricName::Linf,
        MetricName::ConstraintViolation,
        MetricName::Redundancy,
        MetricName::Ynn,
        MetricName::SuccessRate,
    ];

    pub fn key(self) -> &'static str {
        match self {
            MetricName::L0 => "l0",
            MetricName::L1 => "l1",
            MetricName::L2 => "l2",
            MetricName::Linf => "linf",
            MetricName::ConstraintViolation => "constraint_violation",
            MetricName::Redundancy => "redundancy",
            MetricName::Ynn => "ynn",
            MetricName::SuccessRate => "success_rate",
        }
    }

    /// Short human label used on plots.
    pub fn label(self) -> &'static str {
        match self {
            MetricName::L0 => "L0",
            MetricName::L1 => "L1",
            MetricName::L2 => "L2",
            MetricName::Linf => "L-inf",
            MetricName::ConstraintViolation => "Const. vio.",
            MetricName::Redundancy => "Redundancy",
            MetricName::Ynn => "yNN",
            MetricName::SuccessRate => "Success",
        }
    }

    /// Lower is better.
    pub fn is_loss(self) -> bool {
        !matches!(self, MetricName::Ynn | MetricName::SuccessRate)
    }
}

impl fmt::Display for MetricName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.key())
    }
}

/// How L0 counts changes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum L0Granularity {
    /// A one-hot group counts once.
    #[default]
    Feature,
    /// Every encoded column counts.
    Column,
}

/// Metrics of one factual. On failure every value is NaN.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricVector {
    pub l0: f64,
    pub l1: f64,
    pub l2: f64,
    pub linf: f64,
    pub constraint_violation: f64,
    pub redundancy: f64,
    pub ynn: f64,
    pub success: bool,
}

impl MetricVector {
    pub fn failure() -> Self {
        Self {
            l0: f64::NAN,
            l1: f64::NAN,
            l2: f64::NAN,
            linf: f64::NAN,
            constraint_violation: f64::NAN,
            redundancy: f64::NAN,
            ynn: f64::NAN,
            success: false,
        }
    }

    /// Value of a per-sample metric; `SuccessRate` gives 1 or 0.
    pub fn get(&self, m: MetricName) -> f64 {
        match m {
            MetricName::L0 => self.l0,
            MetricName::L1 => self.l1,
            MetricName::L2 => self.l2,
            MetricName::Linf => self.linf,
            MetricName::ConstraintViolation => self.constraint_violation,
            MetricName::Redundancy => self.redundancy,
            MetricName::Ynn => self.ynn,
            MetricName::SuccessRate => self.success as u8 as f64,
        }
    }
}

/// Distance part of the metrics, needing no predictor.
pub fn distances(x: &[f64], cf: &[f64]) -> (f64, f64, f64) {
    let mut l1 = 0.0;
    let mut l2 = 0.0;
    let mut linf: f64 = 0.0;
    for (a, b) in x.iter().zip(cf) {
        let d = (a - b).abs();
        l1 += d;
        l2 += d * d;
        linf = linf.max(d);
    }
    (l1, l2, linf)
}

/// Computes metric vectors against one training set and predictor.
///
/// Predicted classes of the training rows are computed once on construction
/// and reused by yNN.
pub struct Evaluator<'a, P: Predictor + ?Sized> {
    train: &'a Dataset,
    predictor: &'a P,
    metric: Metric,
    granularity: L0Granularity,
    train_classes: Vec<ClassId>,
}

impl<'a, P: Predictor + ?Sized> Evaluator<'a, P> {
    pub fn new(train: &'a Dataset, predictor: &'a P, metric: Metric) -> Result<Self> {
        let train_classes = predict_labels(train.rows(), predictor)?;
        Ok(Self {
            train,
            predictor,
            metric,
            granularity: L0Granularity::default(),
            train_classes,
        })
    }

    pub fn with_granularity(mut self, g: L0Granularity) -> Self {
        self.granularity = g;
        self
    }

    pub fn space(&self) -> &FeatureSpace {
        self.train.space()
    }

    pub fn train_classes(&self) -> &[ClassId] {
        &self.train_classes
    }

    /// Share of the nearest training rows whose predicted class is `class`.
    /// Neighbours are ordered by distance, then row index.
    pub fn ynn(&self, cf: &[f64], class: ClassId) -> f64 {
        let mut nearest: Vec<(f64, usize)> = Vec::with_capacity(YNN_NEIGHBOURS + 1);
        for (i, row) in self.train.rows().enumerate() {
            let d = self.metric.between(cf, row);
            if nearest.len() == YNN_NEIGHBOURS && d >= nearest[YNN_NEIGHBOURS - 1].0 {
                continue;
            }
            let pos = nearest.partition_point(|&(e, _)| e <= d);
            nearest.insert(pos, (d, i));
            nearest.truncate(YNN_NEIGHBOURS);
        }
        if nearest.is_empty() {
            return 0.0;
        }
        let same = nearest.iter().filter(|&&(_, i)| self.train_classes[i] == class).count();
        same as f64 / nearest.len() as f64
    }

    /// Changed features of `cf` whose individual revert to `x` keeps the
    /// predicted class of `cf`.
    pub fn redundancy(&self, x: &[f64], cf: &[f64], class: ClassId) -> Result<usize> {
        let space = self.space();
        let changed = space.changed_features(x, cf);
        let mut trials = Vec::with_capacity(changed.len());
        for &i in &changed {
            let mut t = cf.to_vec();
            space.copy_feature(i, &mut t, x);
            trials.push(t);
        }
        let refs: Vec<&[f64]> = trials.iter().map(Vec::as_slice).collect();
        let classes = self.predictor.predict(&refs)?;
        Ok(classes.into_iter().filter(|&c| c == class).count())
    }

    pub fn metric_vector(&self, x: &[f64], cf: Option<&[f64]>) -> Result<MetricVector> {
        let width = self.space().width();
        if x.len() != width {
            return Err(Error::WidthMismatch { expected: width, actual: x.len() });
        }
        let Some(cf) = cf else {
            return Ok(MetricVector::failure());
        };
        if cf.len() != width {
            return Err(Error::WidthMismatch { expected: width, actual: cf.len() });
        }
        let space = self.space();
        let changed = space.changed_features(x, cf);
        let l0 = match self.granularity {
            L0Granularity::Feature => changed.len(),
            L0Granularity::Column => x.iter().zip(cf).filter(|(a, b)| a != b).count(),
        };
        let constraint_violation = changed
            .iter()
            .filter(|&&i| space.schema.feature(i).immutable)
            .count();
        let (l1, l2, linf) = distances(x, cf);
        let class = self.predictor.predict_one(cf)?;
        Ok(MetricVector {
            l0: l0 as f64,
            l1,
            l2,
            linf,
            constraint_violation: constraint_violation as f64,
            redundancy: self.redundancy(x, cf, class)? as f64,
            ynn: self.ynn(cf, class),
            success: true,
        })
    }

    /// Metric vectors for many factuals, evaluated in parallel.
    pub fn evaluate_all<X, C>(&self, pairs: &[(X, Option<C>)]) -> Result<Vec<MetricVector>>
    where
        X: AsRef<[f64]> + Sync,
        C: AsRef<[f64]> + Sync,
    {
        pairs
            .par_iter()
            .map(|(x, cf)| self.metric_vector(x.as_ref(), cf.as_ref().map(AsRef::as_ref)))
            .collect()
    }
}

/// One-shot form of [`Evaluator::metric_vector`].
pub fn metric_vector<P: Predictor + ?Sized>(
    x: &[f64],
    cf: Option<&[f64]>,
    predictor: &P,
    train: &Dataset,
    metric: Metric,
) -> Result<MetricVector> {
    Evaluator::new(train, predictor, metric)?.metric_vector(x, cf)
}

/// Means over the successful samples and the success rate over all of them.
/// A value mean is `None` when nothing succeeded.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary {
    pub samples: usize,
    pub successes: usize,
    pub l0: Option<f64>,
    pub l1: Option<f64>,
    pub l2: Option<f64>,
    pub linf: Option<f64>,
    pub constraint_violation: Option<f64>,
    pub redundancy: Option<f64>,
    pub ynn: Option<f64>,
    pub success_rate: f64,
}

impl MetricSummary {
    pub fn get(&self, m: MetricName) -> Option<f64> {
        match m {
            MetricName::L0 => self.l0,
            MetricName::L1 => self.l1,
            MetricName::L2 => self.l2,
            MetricName::Linf => self.linf,
            MetricName::ConstraintViolation => self.constraint_violation,
            MetricName::Redundancy => self.redundancy,
            MetricName::Ynn => self.ynn,
            MetricName::SuccessRate => Some(self.success_rate),
        }
    }

    pub fn values(&self) -> [Option<f64>; 8] {
        MetricName::ALL.map(|m| self.get(m))
    }
}

pub fn aggregate(per_sample: &[MetricVector]) -> Result<MetricSummary> {
    if per_sample.is_empty() {
        return Err(Error::EmptyEvaluation);
    }
    let ok: Vec<&MetricVector> = per_sample.iter().filter(|m| m.success).collect();
    let mean = |m: MetricName| -> Option<f64> {
        (!ok.is_empty()).then(|| ok.iter().map(|v| v.get(m)).sum::<f64>() / ok.len() as f64)
    };
    Ok(MetricSummary {
        samples: per_sample.len(),
        successes: ok.len(),
        l0: mean(MetricName::L0),
        l1: mean(MetricName::L1),
        l2: mean(MetricName::L2),
        linf: mean(MetricName::Linf),
        constraint_violation: mean(MetricName::ConstraintViolation),
        redundancy: mean(MetricName::Redundancy),
        ynn: mean(MetricName::Ynn),
        success_rate: ok.len() as f64 / per_sample.len() as f64,
    })
}

/// Raw per-method means for one dataset, in [`MetricName::ALL`] order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodRow {
    pub method: String,
    pub values: [Option<f64>; 8],
}

impl MethodRow {
    pub fn new(method: impl Into<String>, values: [Option<f64>; 8]) -> Self {
        Self { method: method.into(), values }
    }

    pub fn from_summary(method: impl Into<String>, s: &MetricSummary) -> Self {
        Self::new(method, s.values())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScaledRow {
    pub method: String,
    pub values: [f64; 8],
    pub overall: f64,
}

/// Rescales every metric column to [0, 1] across methods with higher meaning
/// better. Loss metrics map the column minimum to 1; gain metrics map the
/// maximum to 1. A constant column is 1 for everyone, and a missing value
/// scores 0.
pub fn scale_report(raw: &[MethodRow]) -> Vec<ScaledRow> {
    let mut scaled: Vec<[f64; 8]> = vec![[0.0; 8]; raw.len()];
    for (k, metric) in MetricName::ALL.into_iter().enumerate() {
        let present = raw.iter().filter_map(|r| r.values[k]);
        let (lo, hi) = present.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
        for (row, out) in raw.iter().zip(scaled.iter_mut()) {
            out[k] = match row.values[k] {
                None => 0.0,
                Some(_) if hi == lo => 1.0,
                Some(v) if metric.is_loss() => (hi - v) / (hi - lo),
                Some(v) => (v - lo) / (hi - lo),
            };
        }
    }
    raw.iter()
        .zip(scaled)
        .map(|(r, values)| ScaledRow {
            method: r.method.clone(),
            overall: values.iter().sum::<f64>() / values.len() as f64,
            values,
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairCount {
    pub a: String,
    pub b: String,
    pub count: usize,
}

/// How often each feature, and each pair of features, was changed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureChangeTable {
    pub features: Vec<String>,
    pub counts: Vec<usize>,
    /// Every unordered pair with a nonzero count, most frequent first, then in
    /// schema order.
    pub pairs: Vec<PairCount>,
    pub successes: usize,
    pub mean_changes: Option<f64>,
}

impl FeatureChangeTable {
    pub fn count(&self, feature: &str) -> Option<usize> {
        self.features.iter().position(|f| f == feature).map(|i| self.counts[i])
    }

    pub fn pair_count(&self, a: &str, b: &str) -> usize {
        self.pairs
            .iter()
            .find(|p| (p.a == a && p.b == b) || (p.a == b && p.b == a))
            .map_or(0, |p| p.count)
    }
}

/// Tallies feature changes over `(factual, counterfactual)` pairs. Failed
/// factuals contribute nothing.
pub fn feature_change_table<X, C>(results: &[(X, Option<C>)], space: &FeatureSpace) -> FeatureChangeTable
where
    X: AsRef<[f64]>,
    C: AsRef<[f64]>,
{
    let schema = &space.schema;
    let mut counts = vec![0usize; schema.len()];
    let mut pairs: BTreeMap<(usize, usize), usize> = BTreeMap::new();
    let mut successes = 0;
    let mut total_changes = 0;
    for (x, cf) in results {
        let Some(cf) = cf else { continue };
        let changed = space.changed_features(x.as_ref(), cf.as_ref());
        successes += 1;
        total_changes += changed.len();
        for (k, &i) in changed.iter().enumerate() {
            counts[i] += 1;
            for &j in &changed[k + 1..] {
                *pairs.entry((i, j)).or_default() += 1;
            }
        }
    }
    let mut pairs: Vec<((usize, usize), usize)> = pairs.into_iter().collect();
    pairs.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
    FeatureChangeTable {
        features: schema.names().map(str::to_string).collect(),
        counts,
        pairs: pairs
            .into_iter()
            .map(|((i, j), count)| PairCount {
                a: schema.feature(i).name.clone(),
                b: schema.feature(j).name.clone(),
                count,
            })
            .collect(),
        successes,
        mean_changes: (successes > 0).then(|| total_changes as f64 / successes as f64),
    }
}
