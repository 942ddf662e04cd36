mod common;

use morphocf::coverage::Coverage;
use morphocf::engine::{explain, ExplanationRequest, Explainer, RelaxationLevel};
use morphocf::metrics::Evaluator;
use morphocf::predictor::{ClassId, FnPredictor, Predictor};
use morphocf::tabular::{Dataset, FeatureSchema, FeatureSpace, FeatureSpec, Metric};
use morphocf::Error;

/// A at 0..2 flanked by B pairs on both sides.
fn flanked() -> Dataset {
    let rows = [-11.0, -10.0, 0.0, 1.0, 2.0, 10.0, 11.0].iter().map(|&v| vec![v]).collect();
    let labels = ["B", "B", "A", "A", "A", "B", "B"].map(String::from).to_vec();
    Dataset::from_encoded(common::continuous_space(1), rows, labels).unwrap()
}

fn outer() -> FnPredictor<impl Fn(&[f64]) -> ClassId + Send + Sync> {
    FnPredictor::new("|x|>5.5", ["A", "B"], |x: &[f64]| ClassId((x[0].abs() > 5.5) as u32))
}

#[test]
fn several_counterfactuals_come_from_distinct_balls() {
    let data = flanked();
    let p = outer();
    let cov = Coverage::build(&data, &p, Metric::Manhattan).unwrap();
    assert_eq!(cov.len(), 3);
    let res = explain(&ExplanationRequest::new(vec![1.0]).with_count(2), &cov, &data, &p).unwrap();
    assert!(res.success);
    assert_eq!(res.counterfactuals.len(), 2);
    let [a, b] = [&res.counterfactuals[0], &res.counterfactuals[1]];
    assert_ne!(a.source_ball, b.source_ball);
    assert!(a.values[0] > 5.5 && b.values[0] < -5.5, "{a:?} {b:?}");
    assert!((a.values[0] - 1.0).abs() <= (b.values[0] - 1.0).abs());
    assert!(res.counterfactuals.iter().all(|c| c.class == ClassId(1)));
}

#[test]
fn semifactual_keeps_the_instance_class() {
    let data = common::toy();
    let p = common::threshold();
    let cov = Coverage::build(&data, &p, Metric::Manhattan).unwrap();
    let res = explain(&ExplanationRequest::new(vec![1.0]), &cov, &data, &p).unwrap();
    let best = res.best().unwrap();
    assert!((best.values[0] - 6.0).abs() < 1e-9, "{:?}", best.values);
    assert_eq!(res.level, Some(RelaxationLevel::Strict));
    if let Some(s) = &res.semifactual {
        assert_eq!(p.predict_one(s).unwrap(), ClassId(0));
    }
}

#[test]
fn misassociated_instance_triggers_recovering() {
    let data = common::toy();
    let p = common::threshold();
    let cov = Coverage::build(&data, &p, Metric::Manhattan).unwrap();
    // predicted B but deeper inside the A ball (radius 10) than the B ball (radius 8)
    let res = explain(&ExplanationRequest::new(vec![5.8]), &cov, &data, &p).unwrap();
    assert_eq!(res.instance_class, ClassId(1));
    assert!(res.recovered);
    let best = res.best().unwrap();
    assert_eq!(best.class, ClassId(0));
    assert!(best.values[0] <= 5.5);
}

#[test]
fn immutable_driver_needs_the_last_relaxation() {
    let schema = FeatureSchema::new(
        vec![FeatureSpec::continuous("age").immutable(), FeatureSpec::continuous("x")],
        "y",
    )
    .unwrap();
    let space = FeatureSpace::unscaled(schema);
    let rows = vec![vec![20.0, 0.0], vec![30.0, 1.0], vec![60.0, 0.0], vec![70.0, 1.0]];
    let labels = ["A", "A", "B", "B"].map(String::from).to_vec();
    let data = Dataset::from_encoded(space, rows, labels).unwrap();
    let p = FnPredictor::new("age>50", ["A", "B"], |x: &[f64]| ClassId((x[0] > 50.0) as u32));
    let cov = Coverage::build(&data, &p, Metric::Manhattan).unwrap();

    let x = vec![20.0, 0.0];
    let res = explain(&ExplanationRequest::new(x.clone()), &cov, &data, &p).unwrap();
    assert!(res.success);
    assert_eq!(res.level, Some(RelaxationLevel::ImmutabilityWithheld));
    assert!(res.attempts[..2].iter().all(|a| a.accepted_projections == 0), "{:?}", res.attempts);
    let best = res.best().unwrap();
    assert_eq!(best.changed_features[0], "age");

    let eval = Evaluator::new(&data, &p, Metric::Manhattan).unwrap();
    let m = eval.metric_vector(&x, Some(&best.values)).unwrap();
    assert!(m.constraint_violation >= 1.0);
}

#[test]
fn requests_are_validated() {
    let data = common::toy();
    let p = common::threshold();
    let cov = Coverage::build(&data, &p, Metric::Manhattan).unwrap();
    let ex = Explainer::new(&cov, &data, &p).unwrap();
    let bad = [
        ExplanationRequest::new(vec![1.0, 2.0]),
        ExplanationRequest::new(vec![1.0]).with_count(0),
        ExplanationRequest::new(vec![1.0]).with_step_ratio(1.0),
        ExplanationRequest::new(vec![1.0]).with_targets(vec![ClassId(0)]),
        ExplanationRequest::new(vec![1.0]).with_targets(vec![ClassId(7)]),
    ];
    for req in bad {
        assert!(ex.explain(&req).is_err(), "{req:?}");
    }
}

#[test]
fn stale_coverage_is_rejected() {
    let data = common::toy();
    let cov = Coverage::build(&data, &common::threshold(), Metric::Manhattan).unwrap();
    let other = FnPredictor::new("x>0.5", ["A", "B"], |x: &[f64]| ClassId((x[0] > 0.5) as u32));
    assert!(matches!(Explainer::new(&cov, &data, &other), Err(Error::CoverageMismatch(_))));
}

#[test]
fn single_class_data_has_no_counterfactual() {
    let rows = vec![vec![0.0], vec![1.0]];
    let data = Dataset::from_encoded(common::continuous_space(1), rows, vec!["A".into(), "A".into()]).unwrap();
    let p = FnPredictor::new("const", ["A", "B"], |_: &[f64]| ClassId(0));
    let cov = Coverage::build(&data, &p, Metric::Euclidean).unwrap();
    let res = explain(&ExplanationRequest::new(vec![0.5]), &cov, &data, &p);
    assert!(matches!(res, Err(Error::NoOpposingBalls)));
}
