//! Assigning a query point to one ball of a coverage.
//!
//! The boundary between two balls is taken to be the set of points whose
//! signed surface distance `d(x, centre) - radius` is equal for both. A point
//! lies on the side of the ball with the smaller signed distance. With equal
//! radii this is the ordinary bisector of the two centres. Among several
//! covering balls, the one whose side of every pairwise boundary holds the
//! point is the argmin of the signed distance.

use serde::{Deserialize, Serialize};

use crate::coverage::Coverage;
use crate::error::{Error, Result};
use crate::predictor::ClassId;
use crate::tabular::{Dataset, Metric};

/// Geometry of one ball as seen by association and candidate generation.
#[derive(Debug, Clone, Copy)]
pub struct BallShape<'a> {
    pub center: &'a [f64],
    pub class: ClassId,
    pub radius: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Containment {
    OutsideAll,
    Single,
    Multiple,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Association {
    pub ball_index: usize,
    pub containment: Containment,
}

/// `d(x, centre) - radius`: negative inside, zero on the surface. An infinite
/// radius gives negative infinity.
pub fn signed_surface_distance(x: &[f64], ball: &BallShape<'_>, metric: Metric) -> f64 {
    if ball.radius.is_infinite() {
        return f64::NEG_INFINITY;
    }
    metric.between(x, ball.center) - ball.radius
}

/// Index of the smallest value, first occurrence on ties.
fn argmin(values: impl Iterator<Item = (usize, f64)>) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, v) in values {
        if best.is_none_or(|(_, b)| v < b) {
            best = Some((i, v));
        }
    }
    best.map(|(i, _)| i)
}

pub fn associate(x: &[f64], balls: &[BallShape<'_>], metric: Metric) -> Result<Association> {
    if balls.is_empty() {
        return Err(Error::EmptyCoverage);
    }
    if let Some(b) = balls.iter().find(|b| b.center.len() != x.len()) {
        return Err(Error::WidthMismatch {
            expected: b.center.len(),
            actual: x.len(),
        });
    }
    let covering: Vec<usize> = (0..balls.len())
        .filter(|&l| metric.between(x, balls[l].center) < balls[l].radius)
        .collect();
    let assoc = match covering.len() {
        0 => Association {
            ball_index: argmin(balls.iter().enumerate().map(|(l, b)| (l, metric.between(x, b.center))))
                .expect("nonempty"),
            containment: Containment::OutsideAll,
        },
        1 => Association {
            ball_index: covering[0],
            containment: Containment::Single,
        },
        _ => Association {
            ball_index: argmin(
                covering
                    .iter()
                    .map(|&l| (l, signed_surface_distance(x, &balls[l], metric))),
            )
            .expect("nonempty"),
            containment: Containment::Multiple,
        },
    };
    Ok(assoc)
}

/// Ball shapes of a coverage whose centres are rows of `data`.
pub fn shapes<'a>(cov: &'a Coverage, data: &'a Dataset) -> Vec<BallShape<'a>> {
    cov.balls
        .iter()
        .map(|b| BallShape {
            center: data.row(b.center),
            class: b.class,
            radius: b.radius,
        })
        .collect()
}

/// Associates `x` with a ball of `cov`.
pub fn associate_with_coverage(x: &[f64], cov: &Coverage, data: &Dataset) -> Result<Association> {
    associate(x, &shapes(cov, data), cov.metric)
}

#[cfg(test)]
mod tests {
    use super::*;

    const A: [f64; 1] = [0.0];
    const B: [f64; 1] = [10.0];

    fn toy() -> Vec<BallShape<'static>> {
        vec![
            BallShape { center: &A, class: ClassId(0), radius: 10.0 },
            BallShape { center: &B, class: ClassId(1), radius: 8.0 },
        ]
    }

    #[test]
    fn signed_distance_examples() {
        let balls = toy();
        assert_eq!(signed_surface_distance(&[0.0], &balls[0], Metric::Manhattan), -10.0);
        assert_eq!(signed_surface_distance(&[5.0], &balls[0], Metric::Manhattan), -5.0);
        assert_eq!(signed_surface_distance(&[10.0], &balls[0], Metric::Manhattan), 0.0);
    }

    #[test]
    fn doubly_covered_point_takes_the_deeper_side() {
        let a = associate(&[5.0], &toy(), Metric::Manhattan).unwrap();
        assert_eq!(a, Association { ball_index: 0, containment: Containment::Multiple });
        // boundary between the two balls sits at 6
        assert_eq!(associate(&[6.5], &toy(), Metric::Manhattan).unwrap().ball_index, 1);
    }

    #[test]
    fn outside_point_takes_nearest_centre() {
        let a = associate(&[20.0], &toy(), Metric::Manhattan).unwrap();
        assert_eq!(a, Association { ball_index: 1, containment: Containment::OutsideAll });
    }

    #[test]
    fn single_cover_ignores_centre_distance() {
        const C: [f64; 1] = [3.0];
        let balls = vec![
            BallShape { center: &A, class: ClassId(0), radius: 100.0 },
            BallShape { center: &C, class: ClassId(1), radius: 0.5 },
        ];
        let a = associate(&[3.6], &balls, Metric::Manhattan).unwrap();
        assert_eq!(a, Association { ball_index: 0, containment: Containment::Single });
    }

    #[test]
    fn empty_coverage_is_an_error() {
        assert!(matches!(associate(&[0.0], &[], Metric::Manhattan), Err(Error::EmptyCoverage)));
    }
}
