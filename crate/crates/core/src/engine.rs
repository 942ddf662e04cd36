//! Counterfactual and semifactual generation from a ball coverage.
//!
//! For a query `x` predicted as class `y`:
//!
//! 1. `x` is associated with a ball. When that ball belongs to another class
//!    the ball is re-covered locally together with `x`, and `x` becomes the
//!    centre of its own small ball.
//! 2. Every ball of a target class contributes a projected centre: its centre
//!    with the immutable features of `x` written in. The projection is
//!    *viable* when it stays inside the ball and keeps the ball's class.
//! 3. The projection is made sparser by handing features back to `x`, smallest
//!    change first, whenever the class survives.
//! 4. A first candidate is placed where the segment from `x` to the projection
//!    crosses the boundary between the associated ball and the target ball.
//!    The `n` closest candidates are kept.
//! 5. From each kept candidate, points are stepped geometrically towards the
//!    projection until the target class appears. If it never does, the
//!    projection itself is returned. The last visited point still classed `y`
//!    is a semifactual.
//!
//! If no ball offers a viable projection, step 2 accepts projections that only
//! keep the class. If there are still none, immutability is dropped and raw
//! centres are used.

use std::borrow::Cow;

use serde::{Deserialize, Serialize};

use crate::association::{associate, signed_surface_distance, Association, BallShape};
use crate::coverage::{recover_subset, Coverage, Member};
use crate::error::{Error, Result};
use crate::predictor::{ClassId, Predictor};
use crate::tabular::{Dataset, FeatureSpace, Metric};

pub const DEFAULT_STEP_RATIO: f64 = 0.5;
pub const DEFAULT_MAX_STEPS: usize = 10;
const BISECTION_TOLERANCE: f64 = 1e-10;
const BISECTION_ITERATIONS: usize = 60;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RelaxationLevel {
    Strict,
    RelaxedProjection,
    ImmutabilityWithheld,
}

impl RelaxationLevel {
    pub const ALL: [RelaxationLevel; 3] = [
        RelaxationLevel::Strict,
        RelaxationLevel::RelaxedProjection,
        RelaxationLevel::ImmutabilityWithheld,
    ];

    pub fn name(self) -> &'static str {
        match self {
            RelaxationLevel::Strict => "strict",
            RelaxationLevel::RelaxedProjection => "relaxed_projection",
            RelaxationLevel::ImmutabilityWithheld => "immutability_withheld",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Viability {
    /// Inside the ball and predicted as the ball's class.
    Viable,
    /// Predicted as the ball's class but outside its radius.
    ClassOnly,
    Invalid,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExplanationRequest {
    pub instance: Vec<f64>,
    /// Defaults to every class other than the instance's.
    pub target_classes: Option<Vec<ClassId>>,
    pub n_counterfactuals: usize,
    pub step_ratio: f64,
    pub max_steps: usize,
}

impl ExplanationRequest {
    pub fn new(instance: Vec<f64>) -> Self {
        Self {
            instance,
            target_classes: None,
            n_counterfactuals: 1,
            step_ratio: DEFAULT_STEP_RATIO,
            max_steps: DEFAULT_MAX_STEPS,
        }
    }

    pub fn with_targets(mut self, targets: Vec<ClassId>) -> Self {
        self.target_classes = Some(targets);
        self
    }

    pub fn with_count(mut self, n: usize) -> Self {
        self.n_counterfactuals = n;
        self
    }

    pub fn with_step_ratio(mut self, r: f64) -> Self {
        self.step_ratio = r;
        self
    }

    pub fn with_max_steps(mut self, steps: usize) -> Self {
        self.max_steps = steps;
        self
    }
}

/// A boundary candidate kept in the best-candidate list.
#[derive(Debug, Clone, PartialEq)]
pub struct Candidate {
    pub point: Vec<f64>,
    pub source_ball: usize,
    pub projection: Vec<f64>,
    pub distance_to_instance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Counterfactual {
    pub values: Vec<f64>,
    pub class: ClassId,
    pub level: RelaxationLevel,
    /// Index of the target ball in the (possibly locally repaired) ball list.
    pub source_ball: usize,
    pub changed_features: Vec<String>,
    /// False when the line search fell back to the projection.
    pub found_on_segment: bool,
}

/// How many projections each relaxation level accepted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LevelAttempt {
    pub level: RelaxationLevel,
    pub accepted_projections: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExplanationResult {
    pub instance_class: ClassId,
    pub target_classes: Vec<ClassId>,
    pub association: Association,
    /// True when the associated ball had to be re-covered around the instance.
    pub recovered: bool,
    pub level: Option<RelaxationLevel>,
    pub counterfactuals: Vec<Counterfactual>,
    pub semifactual: Option<Vec<f64>>,
    pub success: bool,
    pub attempts: Vec<LevelAttempt>,
}

impl ExplanationResult {
    pub fn best(&self) -> Option<&Counterfactual> {
        self.counterfactuals.first()
    }
}

/// Centre of `ball` with the immutable features of `instance` written in.
pub fn project_center<P: Predictor + ?Sized>(
    ball: &BallShape<'_>,
    instance: &[f64],
    space: &FeatureSpace,
    predictor: &P,
    metric: Metric,
) -> Result<(Vec<f64>, Viability)> {
    let mut proj = ball.center.to_vec();
    for (i, spec) in space.schema.features().iter().enumerate() {
        if spec.immutable {
            space.copy_feature(i, &mut proj, instance);
        }
    }
    space.snap(&mut proj, instance);
    let keeps_class = predictor.predict_one(&proj)? == ball.class;
    let inside = metric.between(&proj, ball.center) < ball.radius;
    let v = match (keeps_class, inside) {
        (true, true) => Viability::Viable,
        (true, false) => Viability::ClassOnly,
        (false, _) => Viability::Invalid,
    };
    Ok((proj, v))
}

/// Hands features of `proj` back to `instance`, smallest change first, keeping
/// each revert only if the predicted class of `proj` survives it.
pub fn sparsify_projection<P: Predictor + ?Sized>(
    proj: &[f64],
    instance: &[f64],
    predictor: &P,
    space: &FeatureSpace,
) -> Result<Vec<f64>> {
    let class = predictor.predict_one(proj)?;
    let mut order: Vec<(f64, usize)> = (0..space.schema.len())
        .filter(|&i| space.feature_changed(i, proj, instance))
        .map(|i| (space.feature_difference(i, proj, instance), i))
        .collect();
    order.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));

    let mut current = proj.to_vec();
    let mut trial = current.clone();
    for (_, i) in order {
        space.copy_feature(i, &mut trial, instance);
        if predictor.predict_one(&trial)? == class {
            current.copy_from_slice(&trial);
        } else {
            trial.copy_from_slice(&current);
        }
    }
    Ok(current)
}

fn lerp(a: &[f64], b: &[f64], t: f64) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x + t * (y - x)).collect()
}

/// Position along `instance -> proj` where the boundary between `assoc` and
/// `opp` is crossed, as a fraction of the segment.
///
/// Zero when the instance already sits on the opposing side; one when the
/// whole segment stays on the associated side.
pub fn boundary_parameter(
    instance: &[f64],
    assoc: &BallShape<'_>,
    opp: &BallShape<'_>,
    proj: &[f64],
    metric: Metric,
) -> f64 {
    let gap = |t: f64| -> f64 {
        let p = lerp(instance, proj, t);
        match (assoc.radius.is_infinite(), opp.radius.is_infinite()) {
            (true, true) => metric.between(&p, assoc.center) - metric.between(&p, opp.center),
            (true, false) => f64::NEG_INFINITY,
            (false, true) => f64::INFINITY,
            (false, false) => {
                signed_surface_distance(&p, assoc, metric) - signed_surface_distance(&p, opp, metric)
            }
        }
    };
    if gap(0.0) >= 0.0 {
        return 0.0;
    }
    if gap(1.0) < 0.0 {
        return 1.0;
    }
    let (mut lo, mut hi) = (0.0, 1.0);
    for _ in 0..BISECTION_ITERATIONS {
        let mid = 0.5 * (lo + hi);
        let g = gap(mid);
        if g.abs() <= BISECTION_TOLERANCE {
            return mid;
        }
        if g < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// First candidate: the boundary crossing on the segment, snapped to valid
/// discrete and one-hot values.
pub fn boundary_candidate(
    instance: &[f64],
    assoc: &BallShape<'_>,
    opp: &BallShape<'_>,
    proj: &[f64],
    metric: Metric,
    space: &FeatureSpace,
) -> Vec<f64> {
    let t = boundary_parameter(instance, assoc, opp, proj, metric);
    let mut p = if t >= 1.0 { proj.to_vec() } else { lerp(instance, proj, t) };
    space.snap(&mut p, instance);
    p
}

#[derive(Debug, Clone, PartialEq)]
pub struct WalkOutcome {
    pub point: Vec<f64>,
    pub found: bool,
    pub last_same_class: Option<Vec<f64>>,
}

/// Steps from `start` towards `proj` by `step_ratio` of the remaining gap
/// until `target` is predicted. `start` itself is checked first.
///
/// `reference` is the explained instance (used for one-hot tie-breaking) and
/// `instance_class` its class; the last visited point of that class is
/// reported as a semifactual.
#[allow(clippy::too_many_arguments)]
pub fn walk_to_class<P: Predictor + ?Sized>(
    start: &[f64],
    proj: &[f64],
    target: ClassId,
    instance_class: ClassId,
    step_ratio: f64,
    max_steps: usize,
    predictor: &P,
    space: &FeatureSpace,
    reference: &[f64],
) -> Result<WalkOutcome> {
    let mut cand = start.to_vec();
    let mut last_same_class = None;
    let mut class = predictor.predict_one(&cand)?;
    let mut steps = 0;
    loop {
        if class == target {
            return Ok(WalkOutcome {
                point: cand,
                found: true,
                last_same_class,
            });
        }
        if class == instance_class {
            last_same_class = Some(cand.clone());
        }
        if steps == max_steps {
            break;
        }
        for (c, p) in cand.iter_mut().zip(proj) {
            *c += step_ratio * (p - *c);
        }
        space.snap(&mut cand, reference);
        class = predictor.predict_one(&cand)?;
        steps += 1;
    }
    Ok(WalkOutcome {
        point: proj.to_vec(),
        found: false,
        last_same_class,
    })
}

struct LiveBall<'a> {
    center: Cow<'a, [f64]>,
    class: ClassId,
    radius: f64,
}

impl LiveBall<'_> {
    fn shape(&self) -> BallShape<'_> {
        BallShape {
            center: &self.center,
            class: self.class,
            radius: self.radius,
        }
    }
}

/// Explains instances against a fixed coverage, dataset and predictor.
pub struct Explainer<'a, P: Predictor + ?Sized> {
    coverage: &'a Coverage,
    data: &'a Dataset,
    predictor: &'a P,
}

impl<'a, P: Predictor + ?Sized> Explainer<'a, P> {
    pub fn new(coverage: &'a Coverage, data: &'a Dataset, predictor: &'a P) -> Result<Self> {
        coverage.verify(data, predictor).map_err(|e| Error::CoverageMismatch(e.to_string()))?;
        if coverage.is_empty() {
            return Err(Error::EmptyCoverage);
        }
        Ok(Self {
            coverage,
            data,
            predictor,
        })
    }

    pub fn coverage(&self) -> &Coverage {
        self.coverage
    }

    pub fn explain(&self, req: &ExplanationRequest) -> Result<ExplanationResult> {
        let space = self.data.space();
        let metric = self.coverage.metric;
        let x = req.instance.as_slice();
        if x.len() != space.width() {
            return Err(Error::WidthMismatch {
                expected: space.width(),
                actual: x.len(),
            });
        }
        if req.n_counterfactuals == 0 {
            return Err(Error::InvalidRequest("at least one counterfactual must be requested".into()));
        }
        if !(req.step_ratio > 0.0 && req.step_ratio < 1.0) {
            return Err(Error::InvalidRequest(format!(
                "step ratio must lie in (0, 1), got {}",
                req.step_ratio
            )));
        }
        let own = self.predictor.predict_one(x)?;
        let targets = self.targets(req, own)?;

        let mut balls: Vec<LiveBall<'_>> = self
            .coverage
            .balls
            .iter()
            .map(|b| LiveBall {
                center: Cow::Borrowed(self.data.row(b.center)),
                class: b.class,
                radius: b.radius,
            })
            .collect();
        let shapes: Vec<BallShape<'_>> = balls.iter().map(LiveBall::shape).collect();
        let association = associate(x, &shapes, metric)?;
        drop(shapes);

        let mut assoc = association.ball_index;
        let recovered = balls[assoc].class != own;
        if recovered {
            let old = &self.coverage.balls[assoc];
            let classes = vec![old.class; old.covered.len()];
            let fragment = recover_subset(&old.covered, &classes, x, own, self.data, metric)?;
            let mut new_assoc = assoc;
            let replacement: Vec<LiveBall<'_>> = fragment
                .into_iter()
                .enumerate()
                .map(|(k, f)| {
                    let center = match f.center {
                        Member::Instance(id) => Cow::Borrowed(self.data.row(id)),
                        Member::Query => {
                            new_assoc = assoc + k;
                            Cow::Owned(x.to_vec())
                        }
                    };
                    LiveBall {
                        center,
                        class: f.class,
                        radius: f.radius,
                    }
                })
                .collect();
            balls.splice(assoc..=assoc, replacement);
            assoc = new_assoc;
        }

        if !balls.iter().any(|b| targets.contains(&b.class)) {
            return Err(Error::NoOpposingBalls);
        }

        let mut attempts = Vec::new();
        let mut chosen_level = None;
        let mut bcl: Vec<Candidate> = Vec::new();
        for level in RelaxationLevel::ALL {
            let (accepted, found) = self.collect_candidates(x, &balls, assoc, &targets, level, req.n_counterfactuals)?;
            attempts.push(LevelAttempt {
                level,
                accepted_projections: accepted,
            });
            if !found.is_empty() {
                bcl = found;
                chosen_level = Some(level);
                break;
            }
        }

        let mut counterfactuals = Vec::with_capacity(bcl.len());
        let mut semifactual = None;
        for (rank, cand) in bcl.iter().enumerate() {
            let target = balls[cand.source_ball].class;
            let walk = walk_to_class(
                &cand.point,
                &cand.projection,
                target,
                own,
                req.step_ratio,
                req.max_steps,
                self.predictor,
                space,
                x,
            )?;
            if rank == 0 {
                semifactual = walk.last_same_class.clone();
            }
            let class = self.predictor.predict_one(&walk.point)?;
            if !targets.contains(&class) {
                continue;
            }
            let changed_features = space
                .changed_features(x, &walk.point)
                .into_iter()
                .map(|i| space.schema.feature(i).name.clone())
                .collect();
            counterfactuals.push(Counterfactual {
                values: walk.point,
                class,
                level: chosen_level.expect("candidates imply a level"),
                source_ball: cand.source_ball,
                changed_features,
                found_on_segment: walk.found,
            });
        }

        Ok(ExplanationResult {
            instance_class: own,
            target_classes: targets,
            association: Association {
                ball_index: assoc,
                containment: association.containment,
            },
            recovered,
            level: chosen_level,
            success: !counterfactuals.is_empty(),
            counterfactuals,
            semifactual,
            attempts,
        })
    }

    fn targets(&self, req: &ExplanationRequest, own: ClassId) -> Result<Vec<ClassId>> {
        let n = self.predictor.n_classes();
        let mut targets = match &req.target_classes {
            None => (0..n).map(ClassId::from).filter(|&c| c != own).collect::<Vec<_>>(),
            Some(t) => {
                if let Some(bad) = t.iter().find(|c| c.index() >= n) {
                    return Err(Error::InvalidRequest(format!("unknown target class {bad}")));
                }
                if t.contains(&own) {
                    return Err(Error::InvalidRequest(
                        "target classes must exclude the instance's own class".into(),
                    ));
                }
                t.clone()
            }
        };
        targets.sort();
        targets.dedup();
        if targets.is_empty() {
            return Err(Error::InvalidRequest("no target class".into()));
        }
        Ok(targets)
    }

    /// Builds boundary candidates for one relaxation level and keeps the `n`
    /// closest. Returns the number of accepted projections and the list.
    fn collect_candidates(
        &self,
        x: &[f64],
        balls: &[LiveBall<'_>],
        assoc: usize,
        targets: &[ClassId],
        level: RelaxationLevel,
        n: usize,
    ) -> Result<(usize, Vec<Candidate>)> {
        let space = self.data.space();
        let metric = self.coverage.metric;
        let assoc_shape = balls[assoc].shape();
        let mut accepted = 0;
        let mut bcl: Vec<Candidate> = Vec::new();
        for (l, ball) in balls.iter().enumerate() {
            if !targets.contains(&ball.class) {
                continue;
            }
            let shape = ball.shape();
            let proj = match level {
                RelaxationLevel::Strict | RelaxationLevel::RelaxedProjection => {
                    let (proj, viability) = project_center(&shape, x, space, self.predictor, metric)?;
                    let ok = match level {
                        RelaxationLevel::Strict => viability == Viability::Viable,
                        _ => viability != Viability::Invalid,
                    };
                    if !ok {
                        continue;
                    }
                    proj
                }
                RelaxationLevel::ImmutabilityWithheld => {
                    let mut proj = ball.center.to_vec();
                    space.snap(&mut proj, x);
                    if self.predictor.predict_one(&proj)? != ball.class {
                        continue;
                    }
                    proj
                }
            };
            accepted += 1;
            let proj = sparsify_projection(&proj, x, self.predictor, space)?;
            let point = boundary_candidate(x, &assoc_shape, &shape, &proj, metric, space);
            let distance_to_instance = metric.between(x, &point);
            let cand = Candidate {
                point,
                source_ball: l,
                projection: proj,
                distance_to_instance,
            };
            let pos = bcl
                .iter()
                .position(|c| {
                    c.distance_to_instance
                        .total_cmp(&cand.distance_to_instance)
                        .then(c.source_ball.cmp(&cand.source_ball))
                        .is_gt()
                })
                .unwrap_or(bcl.len());
            if pos < n {
                bcl.insert(pos, cand);
                bcl.truncate(n);
            }
        }
        Ok((accepted, bcl))
    }
}

/// One-shot convenience around [`Explainer`].
pub fn explain<P: Predictor + ?Sized>(
    req: &ExplanationRequest,
    coverage: &Coverage,
    data: &Dataset,
    predictor: &P,
) -> Result<ExplanationResult> {
    Explainer::new(coverage, data, predictor)?.explain(req)
}
