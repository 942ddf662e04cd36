mod common;

use morphocf::association::{associate, shapes, signed_surface_distance};
use morphocf::baselines::{nice_counterfactual, NiceConfig};
use morphocf::coverage::{build_coverage, Coverage};
use morphocf::engine::{boundary_candidate, explain, ExplanationRequest};
use morphocf::metrics::{distances, scale_report, Evaluator, MethodRow, ScaledRow};
use morphocf::predictor::{predict_labels, ClassId, KnnPredictor, Predictor};
use morphocf::tabular::{pairwise_distances, Dataset, FeatureKind, Metric, RawValue};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn metric() -> impl Strategy<Value = Metric> {
    prop_oneof![Just(Metric::Manhattan), Just(Metric::Euclidean)]
}

fn point(d: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-10.0..10.0f64, d)
}

/// Sorted points on [0, 1): the lower `split` share labelled A, the rest B.
fn line_fixture(points: std::collections::BTreeSet<u32>, split: f64) -> (Vec<f64>, usize, Dataset) {
    let xs: Vec<f64> = points.into_iter().map(|p| p as f64 / 1000.0).collect();
    let cut = ((xs.len() as f64 * split) as usize).clamp(1, xs.len() - 1);
    let rows = xs.iter().map(|&x| vec![x]).collect();
    let labels = (0..xs.len()).map(|i| if i < cut { "A" } else { "B" }.to_string()).collect();
    let data = Dataset::from_encoded(common::continuous_space(1), rows, labels).unwrap();
    (xs, cut, data)
}

fn method_rows() -> impl Strategy<Value = Vec<MethodRow>> {
    let value = prop::option::weighted(0.9, 0.0..5.0f64);
    prop::collection::vec(prop::array::uniform8(value), 1..6).prop_map(|rows| {
        rows.into_iter()
            .enumerate()
            .map(|(i, v)| MethodRow::new(format!("m{i}"), v))
            .collect()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn decode_inverts_encode(seed in any::<u64>(), n in 2usize..20, d in 1usize..6) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let schema = common::random_schema(&mut rng, d);
        let records: Vec<_> = (0..n).map(|_| common::random_record(&mut rng, &schema)).collect();
        let data = Dataset::from_records(schema, &records, vec![]).unwrap();
        for (record, row) in records.iter().zip(data.rows()) {
            let back = data.space().decode(row).unwrap();
            for (a, b) in record.iter().zip(&back) {
                match (a, b) {
                    (RawValue::Number(x), RawValue::Number(y)) => prop_assert!((x - y).abs() <= 1e-9, "{x} vs {y}"),
                    _ => prop_assert_eq!(a, b),
                }
            }
            prop_assert_eq!(data.space().encode(&back).unwrap(), row.to_vec());
        }
    }

    #[test]
    fn encoded_rows_are_scaled_and_one_hot(seed in any::<u64>(), n in 2usize..30, d in 1usize..6) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (data, _) = common::random_dataset(&mut rng, n, d, 2);
        let schema = data.schema();
        for row in data.rows() {
            prop_assert!(row.iter().all(|v| (0.0..=1.0).contains(v)));
            for (i, f) in schema.features().iter().enumerate() {
                if f.kind == FeatureKind::Categorical {
                    prop_assert_eq!(row[schema.columns(i)].iter().sum::<f64>(), 1.0);
                }
            }
        }
        let dm = pairwise_distances(data.instances(), Metric::Euclidean).unwrap();
        for i in 0..n {
            prop_assert_eq!(dm.get(i, i), 0.0);
            for j in 0..n {
                prop_assert_eq!(dm.get(i, j), dm.get(j, i));
            }
        }
    }

    #[test]
    fn distances_are_metrics(m in metric(), a in point(4), b in point(4), c in point(4)) {
        let ab = m.between(&a, &b);
        prop_assert_eq!(ab, m.between(&b, &a));
        prop_assert_eq!(m.between(&a, &a), 0.0);
        prop_assert!(m.between(&a, &c) <= ab + m.between(&b, &c) + 1e-9);
    }

    #[test]
    fn coverage_partitions_and_stays_pure(
        m in metric(),
        rows in prop::collection::vec(point(2), 1..25),
        k in 1u32..4,
        seed in any::<u64>(),
    ) {
        let labels: Vec<ClassId> = (0..rows.len() as u64)
            .map(|i| ClassId((seed.rotate_left(i as u32) % k as u64) as u32))
            .collect();
        let dm = pairwise_distances(&rows, m).unwrap();
        let balls = build_coverage(&dm, &labels).unwrap();
        let mut seen = vec![0; rows.len()];
        for ball in &balls {
            prop_assert_eq!(ball.class, labels[ball.center]);
            for &i in &ball.covered {
                seen[i] += 1;
                prop_assert_eq!(labels[i], ball.class);
            }
            for (j, &label) in labels.iter().enumerate() {
                if label != ball.class {
                    prop_assert!(dm.get(ball.center, j) >= ball.radius);
                }
            }
        }
        prop_assert!(seen.iter().all(|&s| s == 1));
    }

    #[test]
    fn training_rows_associate_with_a_covering_ball(
        m in metric(),
        rows in prop::collection::vec(point(2), 2..25),
        seed in any::<u64>(),
    ) {
        let labels: Vec<ClassId> = (0..rows.len() as u64).map(|i| ClassId(((seed >> (i % 64)) & 1) as u32)).collect();
        let dm = pairwise_distances(&rows, m).unwrap();
        let balls = build_coverage(&dm, &labels).unwrap();
        let shapes: Vec<_> = balls
            .iter()
            .map(|b| morphocf::association::BallShape { center: &rows[b.center], class: b.class, radius: b.radius })
            .collect();
        let mut reversed = shapes.clone();
        reversed.reverse();
        for (i, x) in rows.iter().enumerate() {
            let a = associate(x, &shapes, m).unwrap();
            let ball = &balls[a.ball_index];
            prop_assert!(ball.center == i || dm.get(ball.center, i) < ball.radius);
            prop_assert_eq!(ball.class, labels[i]);
            // reversing the list only matters on exact ties
            let r = associate(x, &reversed, m).unwrap();
            let other = &shapes[shapes.len() - 1 - r.ball_index];
            prop_assert_eq!(
                signed_surface_distance(x, &shapes[a.ball_index], m),
                signed_surface_distance(x, other, m)
            );
        }
    }

    #[test]
    fn explanations_are_valid_integral_and_repeatable(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let data = common::structured_dataset(&mut rng, 40, 4, 2);
        let knn = KnnPredictor::from_dataset_labels(&data, 3, Metric::Manhattan).unwrap();
        let cov = Coverage::build(&data, &knn, Metric::Manhattan).unwrap();
        prop_assume!(cov.class_counts().len() > 1);
        for id in [0, 17, 39] {
            let req = ExplanationRequest::new(data.row(id).to_vec()).with_count(2);
            let res = explain(&req, &cov, &data, &knn).unwrap();
            prop_assert_eq!(&res, &explain(&req, &cov, &data, &knn).unwrap());
            for cf in &res.counterfactuals {
                prop_assert_eq!(knn.predict_one(&cf.values).unwrap(), cf.class);
                prop_assert!(res.target_classes.contains(&cf.class));
                let mut snapped = cf.values.clone();
                data.space().snap(&mut snapped, &cf.values);
                prop_assert_eq!(&snapped, &cf.values);
            }
        }
    }

    #[test]
    fn one_dimensional_boundary_lies_before_the_nearest_opponent(
        points in prop::collection::btree_set(0u32..1000, 4..30),
        split in 0.2..0.8f64,
    ) {
        let (xs, cut, data) = line_fixture(points, split);
        let nn = KnnPredictor::from_dataset_labels(&data, 1, Metric::Manhattan).unwrap();
        let cov = Coverage::build(&data, &nn, Metric::Manhattan).unwrap();
        let balls = shapes(&cov, &data);
        for (i, &x) in xs.iter().enumerate() {
            let nearest_opponent = if i < cut { xs[cut] - x } else { x - xs[cut - 1] };
            let assoc = balls[associate(&[x], &balls, Metric::Manhattan).unwrap().ball_index];
            let closest = balls
                .iter()
                .filter(|b| b.class != assoc.class)
                .map(|opp| {
                    let p = boundary_candidate(&[x], &assoc, opp, opp.center, Metric::Manhattan, data.space());
                    (p[0] - x).abs()
                })
                .fold(f64::INFINITY, f64::min);
            prop_assert!(closest <= nearest_opponent + 1e-9, "x={} candidate at {} limit {}", x, closest, nearest_opponent);

            let res = explain(&ExplanationRequest::new(vec![x]), &cov, &data, &nn).unwrap();
            let cf = res.best().unwrap();
            if res.semifactual.is_none() {
                // the candidate itself flipped, so it is the counterfactual
                prop_assert!((cf.values[0] - x).abs() <= closest + 1e-9);
            }
        }
    }

    #[test]
    fn single_column_changes_obey_the_norm_laws(x in point(5), col in 0usize..5, delta in -3.0..3.0f64) {
        let mut cf = x.clone();
        cf[col] += delta;
        let (l1, l2, linf) = distances(&x, &cf);
        prop_assert!((l2 - l1 * l1).abs() <= 1e-12 * l1.max(1.0));
        prop_assert_eq!(linf, l1);
    }

    #[test]
    fn l0_bounds_violations_and_redundancy(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let data = common::structured_dataset(&mut rng, 30, 5, 2);
        let knn = KnnPredictor::from_dataset_labels(&data, 3, Metric::Manhattan).unwrap();
        let eval = Evaluator::new(&data, &knn, Metric::Manhattan).unwrap();
        let classes = predict_labels(data.rows(), &knn).unwrap();
        for (i, x) in data.rows().enumerate() {
            let Some(cf) = nice_counterfactual(x, &data, &classes, &knn, Metric::Manhattan, &NiceConfig::default()).unwrap()
            else {
                continue;
            };
            prop_assert_ne!(knn.predict_one(&cf).unwrap(), classes[i]);
            // every coordinate comes from the instance or from its prototype
            prop_assert!(cf.iter().zip(x).all(|(c, v)| c == v || data.rows().any(|r| r.contains(c))));
            let m = eval.metric_vector(x, Some(&cf)).unwrap();
            prop_assert!(m.l0 >= m.constraint_violation);
            prop_assert!(m.l0 >= m.redundancy);
        }
    }

    #[test]
    fn scaling_ignores_row_order(rows in method_rows(), shift in 0usize..6) {
        let scaled = scale_report(&rows);
        let mut rotated = rows.clone();
        let len = rotated.len();
        rotated.rotate_left(shift % len);
        let mut again = scale_report(&rotated);
        again.rotate_right(shift % len);
        prop_assert_eq!(&scaled, &again);
        for row in &scaled {
            prop_assert!(row.values.iter().all(|v| (0.0..=1.0).contains(v)));
            prop_assert!((0.0..=1.0).contains(&row.overall));
        }
        // rescaling an already scaled report with the same extrema changes nothing
        let as_rows = |rows: &[ScaledRow]| -> Vec<MethodRow> {
            rows.iter().map(|r| MethodRow::new(r.method.clone(), r.values.map(Some))).collect()
        };
        let mut anchored = as_rows(&scaled);
        anchored.push(MethodRow::new("lo", [Some(0.0); 8]));
        anchored.push(MethodRow::new("hi", [Some(1.0); 8]));
        let twice = scale_report(&anchored);
        for (a, b) in scaled.iter().zip(&twice) {
            for k in 0..8 {
                let v = if morphocf::metrics::MetricName::ALL[k].is_loss() { 1.0 - a.values[k] } else { a.values[k] };
                prop_assert!((b.values[k] - v).abs() <= 1e-12, "{:?} vs {:?}", a, b);
            }
        }
    }
}

// A boundary candidate that still carries the instance's class sends the walk
// halfway to the opposing centre, past the nearest opponent.
#[test]
fn walk_can_overshoot_the_nearest_opponent() {
    let (_, _, data) = line_fixture([0, 5, 421, 837].into_iter().collect(), 0.2);
    let nn = KnnPredictor::from_dataset_labels(&data, 1, Metric::Manhattan).unwrap();
    let cov = Coverage::build(&data, &nn, Metric::Manhattan).unwrap();
    let res = explain(&ExplanationRequest::new(vec![0.0]), &cov, &data, &nn).unwrap();
    let cf = res.best().unwrap().values[0];
    assert!(res.semifactual.is_some());
    assert!(cf > 0.005, "{cf}");
}
