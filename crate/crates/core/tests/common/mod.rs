//! Fixtures shared by the integration tests.
#![allow(dead_code)]

use morphocf::predictor::{ClassId, FnPredictor};
use morphocf::tabular::{
    Dataset, FeatureSchema, FeatureSpace, FeatureSpec, RawRecord, RawValue,
};
use rand::{Rng, RngCore};

/// Points 0, 1, 2 labelled A and 10, 11 labelled B, unscaled.
pub fn toy() -> Dataset {
    let space = FeatureSpace::unscaled(FeatureSchema::new(vec![FeatureSpec::continuous("x")], "y").unwrap());
    let rows = [0.0, 1.0, 2.0, 10.0, 11.0].iter().map(|&v| vec![v]).collect();
    Dataset::from_encoded(space, rows, ["A", "A", "A", "B", "B"].map(String::from).to_vec()).unwrap()
}

/// B iff x > 5.5.
pub fn threshold() -> FnPredictor<impl Fn(&[f64]) -> ClassId + Send + Sync> {
    FnPredictor::new("x>5.5", ["A", "B"], |x: &[f64]| ClassId((x[0] > 5.5) as u32))
}

const COLOURS: [&str; 3] = ["red", "green", "blue"];
const LEVELS: [&str; 4] = ["low", "mid", "high", "top"];

/// A schema of `d` features of random kinds; roughly one in five immutable.
pub fn random_schema(rng: &mut impl RngCore, d: usize) -> FeatureSchema {
    let features = (0..d)
        .map(|i| {
            let name = format!("f{i}");
            let spec = match rng.random_range(0..4) {
                0 => FeatureSpec::continuous(name),
                1 => FeatureSpec::discrete(name),
                2 => FeatureSpec::ordinal(name, LEVELS),
                _ => FeatureSpec::categorical(name, COLOURS),
            };
            if rng.random_bool(0.2) {
                spec.immutable()
            } else {
                spec
            }
        })
        .collect();
    FeatureSchema::new(features, "label").unwrap()
}

/// Values on a coarse grid so that ties and duplicates occur.
pub fn random_record(rng: &mut impl RngCore, schema: &FeatureSchema) -> RawRecord {
    schema
        .features()
        .iter()
        .map(|f| match f.kind {
            morphocf::tabular::FeatureKind::Continuous => RawValue::Number(rng.random_range(0..20) as f64 * 0.25),
            morphocf::tabular::FeatureKind::Discrete => RawValue::Number(rng.random_range(0..6) as f64),
            morphocf::tabular::FeatureKind::Ordinal => {
                RawValue::Category(LEVELS[rng.random_range(0..LEVELS.len())].to_string())
            }
            morphocf::tabular::FeatureKind::Categorical => {
                RawValue::Category(COLOURS[rng.random_range(0..COLOURS.len())].to_string())
            }
        })
        .collect()
}

/// A mixed-kind dataset with uniformly random labels `c0..c{k-1}`.
pub fn random_dataset(rng: &mut impl RngCore, n: usize, d: usize, k: usize) -> (Dataset, Vec<ClassId>) {
    let schema = random_schema(rng, d);
    let records: Vec<RawRecord> = (0..n).map(|_| random_record(rng, &schema)).collect();
    let classes: Vec<ClassId> = (0..n).map(|_| ClassId(rng.random_range(0..k as u32))).collect();
    let labels = classes.iter().map(|c| format!("c{}", c.0)).collect();
    (Dataset::from_records(schema, &records, labels).unwrap(), classes)
}

/// A mixed-kind dataset whose labels follow a noisy-free rule of the encoded
/// values, so that a kNN model has real structure to learn.
pub fn structured_dataset(rng: &mut impl RngCore, n: usize, d: usize, k: usize) -> Dataset {
    let schema = random_schema(rng, d);
    let records: Vec<RawRecord> = (0..n).map(|_| random_record(rng, &schema)).collect();
    let unlabelled = Dataset::from_records(schema.clone(), &records, vec![]).unwrap();
    let weights: Vec<f64> = (0..unlabelled.width()).map(|_| rng.random_range(-1.0..1.0)).collect();
    let scores: Vec<f64> = unlabelled
        .rows()
        .map(|r| r.iter().zip(&weights).map(|(a, b)| a * b).sum())
        .collect();
    let mut sorted = scores.clone();
    sorted.sort_by(f64::total_cmp);
    let cuts: Vec<f64> = (1..k).map(|q| sorted[q * n / k]).collect();
    let labels = scores
        .iter()
        .map(|s| format!("c{}", cuts.iter().filter(|&&c| *s >= c).count()))
        .collect();
    Dataset::from_records(schema, &records, labels).unwrap()
}

/// `n` points in the unit hypercube of dimension `d`, unscaled.
pub fn uniform_points(rng: &mut impl RngCore, n: usize, d: usize) -> Vec<Vec<f64>> {
    (0..n).map(|_| (0..d).map(|_| rng.random::<f64>()).collect()).collect()
}

pub fn continuous_space(d: usize) -> FeatureSpace {
    FeatureSpace::unscaled(
        FeatureSchema::new((0..d).map(|i| FeatureSpec::continuous(format!("f{i}"))).collect(), "y").unwrap(),
    )
}
