//! Greedy covering of a labelled dataset by single-class open balls.
//!
//! For every class, each still-uncovered instance proposes the largest open
//! ball around itself that contains no instance of another class. The ball
//! catching the most uncovered instances of its class is kept, its catch is
//! removed, and the round repeats until the class is exhausted. Candidates are
//! scanned in ascending id order and only a strictly larger catch replaces the
//! current best, so the lowest id wins ties.
//!
//! A ball always covers its own centre, even when a duplicate point of another
//! class forces its radius to zero.

use std::collections::BTreeMap;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::predictor::{predict_labels, ClassId, Predictor};
use crate::tabular::{pairwise_distances, Dataset, DistanceMatrix, Metric, Scaler};

pub const COVERAGE_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ball {
    /// Instance id of the centre.
    pub center: usize,
    pub class: ClassId,
    /// Distance to the nearest instance of another class; `f64::INFINITY`
    /// when there is none.
    #[serde(serialize_with = "ser_radius", deserialize_with = "de_radius")]
    pub radius: f64,
    /// Instances newly covered when this ball was selected, ascending.
    pub covered: Vec<usize>,
}

fn ser_radius<S: Serializer>(r: &f64, s: S) -> Result<S::Ok, S::Error> {
    if r.is_infinite() {
        s.serialize_str("inf")
    } else {
        s.serialize_f64(*r)
    }
}

fn de_radius<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Num(f64),
        Text(String),
    }
    match Repr::deserialize(d)? {
        Repr::Num(v) if v >= 0.0 => Ok(v),
        Repr::Text(t) if t == "inf" => Ok(f64::INFINITY),
        Repr::Num(v) => Err(serde::de::Error::custom(format!("negative radius {v}"))),
        Repr::Text(t) => Err(serde::de::Error::custom(format!("bad radius {t:?}"))),
    }
}

/// Runs the greedy covering over `n` points with on-demand distances.
///
/// Returned balls use local indices `0..n`, grouped by ascending class and in
/// selection order within each class.
fn greedy_cover<D>(n: usize, labels: &[ClassId], dist: D) -> Vec<Ball>
where
    D: Fn(usize, usize) -> f64 + Sync,
{
    debug_assert_eq!(labels.len(), n);
    let mut classes: Vec<ClassId> = labels.to_vec();
    classes.sort();
    classes.dedup();

    let mut balls = Vec::new();
    for &k in &classes {
        let members: Vec<usize> = (0..n).filter(|&i| labels[i] == k).collect();
        let others: Vec<usize> = (0..n).filter(|&i| labels[i] != k).collect();
        let radii: Vec<f64> = members
            .par_iter()
            .map(|&i| {
                others
                    .iter()
                    .map(|&j| dist(i, j))
                    .fold(f64::INFINITY, f64::min)
            })
            .collect();

        // positions into `members` still uncovered
        let mut open: Vec<usize> = (0..members.len()).collect();
        while !open.is_empty() {
            let catches: Vec<usize> = open
                .par_iter()
                .map(|&a| {
                    let i = members[a];
                    let r = radii[a];
                    open.iter()
                        .filter(|&&b| b == a || dist(i, members[b]) < r)
                        .count()
                })
                .collect();
            let mut best = 0;
            for (slot, &c) in catches.iter().enumerate() {
                if c > catches[best] {
                    best = slot;
                }
            }
            let a = open[best];
            let center = members[a];
            let radius = radii[a];
            let (caught, rest): (Vec<usize>, Vec<usize>) = open
                .iter()
                .partition(|&&b| b == a || dist(center, members[b]) < radius);
            balls.push(Ball {
                center,
                class: k,
                radius,
                covered: caught.iter().map(|&b| members[b]).collect(),
            });
            open = rest;
        }
    }
    balls
}

/// Covers the instances of `dm` given their predicted classes.
pub fn build_coverage(dm: &DistanceMatrix, labels: &[ClassId]) -> Result<Vec<Ball>> {
    if labels.len() != dm.len() {
        return Err(Error::WidthMismatch {
            expected: dm.len(),
            actual: labels.len(),
        });
    }
    if labels.is_empty() {
        return Err(Error::EmptyDataset);
    }
    Ok(greedy_cover(dm.len(), labels, |i, j| dm.get(i, j)))
}

/// A point taking part in a local re-covering: a dataset instance or the
/// query being explained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Member {
    Instance(usize),
    Query,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FragmentBall {
    pub center: Member,
    pub class: ClassId,
    pub radius: f64,
    pub covered: Vec<Member>,
}

/// Re-runs the covering on `ids` plus one extra point that has no row in the
/// distance matrix.
///
/// `id_classes[k]` is the predicted class of `ids[k]`.
pub fn recover_subset(
    ids: &[usize],
    id_classes: &[ClassId],
    extra: &[f64],
    extra_class: ClassId,
    data: &Dataset,
    metric: Metric,
) -> Result<Vec<FragmentBall>> {
    if ids.is_empty() {
        return Err(Error::InvalidRequest("re-covering needs at least one instance".into()));
    }
    if id_classes.len() != ids.len() {
        return Err(Error::WidthMismatch {
            expected: ids.len(),
            actual: id_classes.len(),
        });
    }
    if extra.len() != data.width() {
        return Err(Error::WidthMismatch {
            expected: data.width(),
            actual: extra.len(),
        });
    }
    let mut points: Vec<&[f64]> = ids.iter().map(|&i| data.row(i)).collect();
    points.push(extra);
    let local = pairwise_distances(&points, metric)?;
    let mut labels = id_classes.to_vec();
    labels.push(extra_class);
    let member = |k: usize| if k == ids.len() { Member::Query } else { Member::Instance(ids[k]) };
    Ok(greedy_cover(points.len(), &labels, |i, j| local.get(i, j))
        .into_iter()
        .map(|b| FragmentBall {
            center: member(b.center),
            class: b.class,
            radius: b.radius,
            covered: b.covered.into_iter().map(member).collect(),
        })
        .collect())
}

/// A dataset covering together with what it was built from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Coverage {
    pub version: u32,
    pub dataset_fp: String,
    pub predictor_fp: String,
    pub metric: Metric,
    pub scaler: Scaler,
    pub balls: Vec<Ball>,
}

impl Coverage {
    /// Predicts every instance, computes all pairwise distances and covers.
    pub fn build<P: Predictor + ?Sized>(data: &Dataset, predictor: &P, metric: Metric) -> Result<Self> {
        let dm = pairwise_distances(data.instances(), metric)?;
        Self::build_with_matrix(data, predictor, &dm, metric)
    }

    pub fn build_with_matrix<P: Predictor + ?Sized>(
        data: &Dataset,
        predictor: &P,
        dm: &DistanceMatrix,
        metric: Metric,
    ) -> Result<Self> {
        let labels = predict_labels(data.rows(), predictor)?;
        let balls = build_coverage(dm, &labels)?;
        Ok(Self {
            version: COVERAGE_VERSION,
            dataset_fp: data.fingerprint(),
            predictor_fp: predictor.fingerprint(),
            metric,
            scaler: data.space().scaler.clone(),
            balls,
        })
    }

    pub fn len(&self) -> usize {
        self.balls.len()
    }

    pub fn is_empty(&self) -> bool {
        self.balls.is_empty()
    }

    /// Number of balls per class, ascending by class.
    pub fn class_counts(&self) -> BTreeMap<ClassId, usize> {
        let mut counts = BTreeMap::new();
        for b in &self.balls {
            *counts.entry(b.class).or_insert(0) += 1;
        }
        counts
    }

    /// Checks that the coverage belongs to this dataset and predictor.
    pub fn verify<P: Predictor + ?Sized>(&self, data: &Dataset, predictor: &P) -> Result<()> {
        if self.dataset_fp != data.fingerprint() {
            return Err(Error::FingerprintMismatch("dataset changed since the coverage was built".into()));
        }
        if self.predictor_fp != predictor.fingerprint() {
            return Err(Error::FingerprintMismatch(
                "predictor changed since the coverage was built".into(),
            ));
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        Ok(text)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    /// Reads a coverage file without checking fingerprints.
    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let cov: Coverage = serde_json::from_str(&text).map_err(|e| Error::CorruptFile {
            path: path.to_path_buf(),
            reason: e.to_string(),
        })?;
        if cov.version != COVERAGE_VERSION {
            return Err(Error::CorruptFile {
                path: path.to_path_buf(),
                reason: format!("unsupported version {}", cov.version),
            });
        }
        Ok(cov)
    }

    /// Reads a coverage file and verifies it against the active inputs.
    pub fn load<P: Predictor + ?Sized>(path: &Path, data: &Dataset, predictor: &P) -> Result<Self> {
        let cov = Self::read(path)?;
        cov.verify(data, predictor)?;
        Ok(cov)
    }
}

pub fn save_coverage(c: &Coverage, path: &Path) -> Result<()> {
    c.save(path)
}

pub fn load_coverage<P: Predictor + ?Sized>(path: &Path, data: &Dataset, predictor: &P) -> Result<Coverage> {
    Coverage::load(path, data, predictor)
}
