use sha2::{Digest, Sha256};

use super::{ClassId, Predictor};
use crate::error::{Error, Result};
use crate::tabular::{Dataset, Metric};

/// Majority vote among the `k` nearest training rows.
///
/// Neighbours at equal distance are ordered by row index; vote ties go to the
/// smallest class index.
#[derive(Debug, Clone)]
pub struct KnnPredictor {
    rows: Vec<Vec<f64>>,
    labels: Vec<ClassId>,
    classes: Vec<String>,
    k: usize,
    metric: Metric,
}

impl KnnPredictor {
    pub fn new(
        rows: Vec<Vec<f64>>,
        labels: Vec<ClassId>,
        classes: Vec<String>,
        k: usize,
        metric: Metric,
    ) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::EmptyTrainingSet);
        }
        if labels.len() != rows.len() {
            return Err(Error::WidthMismatch {
                expected: rows.len(),
                actual: labels.len(),
            });
        }
        if k == 0 || k > rows.len() {
            return Err(Error::InvalidConfig(format!(
                "k must lie in 1..={}, got {k}",
                rows.len()
            )));
        }
        if let Some(bad) = labels.iter().find(|c| c.index() >= classes.len()) {
            return Err(Error::InvalidConfig(format!("label {bad} has no class name")));
        }
        Ok(Self {
            rows,
            labels,
            classes,
            k,
            metric,
        })
    }

    /// Trains on a dataset's own label column; classes are the distinct
    /// labels in sorted order.
    pub fn from_dataset_labels(train: &Dataset, k: usize, metric: Metric) -> Result<Self> {
        if train.labels().is_empty() {
            return Err(Error::EmptyTrainingSet);
        }
        let mut classes: Vec<String> = train.labels().to_vec();
        classes.sort();
        classes.dedup();
        let labels = train
            .labels()
            .iter()
            .map(|l| ClassId::from(classes.binary_search(l).expect("label present")))
            .collect();
        Self::new(train.rows().map(<[f64]>::to_vec).collect(), labels, classes, k, metric)
    }

    fn vote(&self, x: &[f64]) -> ClassId {
        let mut order: Vec<(f64, usize)> = self
            .rows
            .iter()
            .enumerate()
            .map(|(i, r)| (self.metric.between(x, r), i))
            .collect();
        let k = self.k;
        if k < order.len() {
            order.select_nth_unstable_by(k - 1, |a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            order.truncate(k);
        }
        let mut votes = vec![0usize; self.classes.len()];
        for &(_, i) in &order {
            votes[self.labels[i].index()] += 1;
        }
        let best = votes.iter().copied().max().unwrap_or(0);
        ClassId::from(votes.iter().position(|&v| v == best).unwrap_or(0))
    }
}

/// Builds a kNN reference predictor over `train` with the given labels.
pub fn knn_predictor(
    train: &Dataset,
    labels: &[ClassId],
    k: usize,
    metric: Metric,
    classes: Vec<String>,
) -> Result<KnnPredictor> {
    KnnPredictor::new(
        train.rows().map(<[f64]>::to_vec).collect(),
        labels.to_vec(),
        classes,
        k,
        metric,
    )
}

impl Predictor for KnnPredictor {
    fn predict(&self, batch: &[&[f64]]) -> Result<Vec<ClassId>> {
        let width = self.rows[0].len();
        batch
            .iter()
            .map(|x| {
                if x.len() != width {
                    return Err(Error::WidthMismatch {
                        expected: width,
                        actual: x.len(),
                    });
                }
                Ok(self.vote(x))
            })
            .collect()
    }

    fn classes(&self) -> &[String] {
        &self.classes
    }

    fn fingerprint(&self) -> String {
        let mut h = Sha256::new();
        h.update(format!("knn:k={}:{}:", self.k, self.metric));
        for c in &self.classes {
            h.update(c.as_bytes());
            h.update([0]);
        }
        for (r, l) in self.rows.iter().zip(&self.labels) {
            for v in r {
                h.update(v.to_le_bytes());
            }
            h.update(l.0.to_le_bytes());
        }
        hex::encode(h.finalize())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy(k: usize) -> KnnPredictor {
        let rows = [0.0, 1.0, 2.0, 10.0, 11.0].iter().map(|&x| vec![x]).collect();
        let labels = [0, 0, 0, 1, 1].iter().map(|&c| ClassId(c)).collect();
        KnnPredictor::new(rows, labels, vec!["A".into(), "B".into()], k, Metric::Manhattan).unwrap()
    }

    #[test]
    fn zero_distance_neighbour_wins_with_k1() {
        let p = toy(1);
        assert_eq!(p.predict_one(&[10.0]).unwrap(), ClassId(1));
        assert_eq!(p.predict_one(&[1.0]).unwrap(), ClassId(0));
    }

    #[test]
    fn three_nearest_of_five_are_all_a() {
        // nearest to 5 are 2 (3), 1 (4), 0 (5); 10 is also at 5 but has a larger index
        let p = toy(3);
        assert_eq!(p.predict_one(&[5.0]).unwrap(), ClassId(0));
    }

    #[test]
    fn vote_tie_goes_to_smaller_class() {
        let rows = vec![vec![0.0], vec![2.0]];
        let labels = vec![ClassId(1), ClassId(0)];
        let p = KnnPredictor::new(rows, labels, vec!["A".into(), "B".into()], 2, Metric::Manhattan).unwrap();
        assert_eq!(p.predict_one(&[0.1]).unwrap(), ClassId(0));
    }

    #[test]
    fn rejects_empty_training_set() {
        let err = KnnPredictor::new(vec![], vec![], vec!["A".into()], 1, Metric::Manhattan).unwrap_err();
        assert!(matches!(err, Error::EmptyTrainingSet));
    }

    #[test]
    fn batch_matches_singletons() {
        let p = toy(3);
        let xs: Vec<Vec<f64>> = (0..25).map(|i| vec![i as f64 * 0.5]).collect();
        let batch: Vec<&[f64]> = xs.iter().map(Vec::as_slice).collect();
        let all = p.predict(&batch).unwrap();
        for (x, c) in xs.iter().zip(all) {
            assert_eq!(p.predict_one(x).unwrap(), c);
        }
    }
}
