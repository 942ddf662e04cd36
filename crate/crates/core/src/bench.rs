//! Runs several counterfactual methods over the same factuals and collects
//! their metrics.

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baselines::{growing_spheres, nice_counterfactual, BaselineConfig, GrowingSpheresConfig, Method};
use crate::coverage::Coverage;
use crate::engine::{ExplanationRequest, Explainer, DEFAULT_MAX_STEPS, DEFAULT_STEP_RATIO};
use crate::error::{Error, Result};
use crate::metrics::{aggregate, Evaluator, MethodRow, MetricSummary, MetricVector};
use crate::predictor::Predictor;
use crate::tabular::Dataset;

/// Row ids drawn uniformly without replacement, in drawing order. Asking for
/// more rows than exist returns all of them.
pub fn sample_rows(n_rows: usize, k: usize, seed: u64) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    index::sample(&mut rng, n_rows, k.min(n_rows)).into_vec()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BenchConfig {
    pub step_ratio: f64,
    pub max_steps: usize,
    pub baselines: BaselineConfig,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            step_ratio: DEFAULT_STEP_RATIO,
            max_steps: DEFAULT_MAX_STEPS,
            baselines: BaselineConfig::default(),
        }
    }
}

/// Everything one method produced over the sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodRun {
    pub method: Method,
    /// Counterfactual per factual, aligned with the sample ids.
    pub counterfactuals: Vec<Option<Vec<f64>>>,
    pub metrics: Vec<MetricVector>,
    pub summary: Option<MetricSummary>,
    /// Set when the method aborted; its row is then reported as missing.
    pub error: Option<String>,
}

impl MethodRun {
    pub fn row(&self) -> MethodRow {
        match &self.summary {
            Some(s) => MethodRow::from_summary(self.method.name(), s),
            None => MethodRow::new(self.method.name(), [None; 8]),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRun {
    pub sample: Vec<usize>,
    pub runs: Vec<MethodRun>,
}

impl BenchRun {
    pub fn rows(&self) -> Vec<MethodRow> {
        self.runs.iter().map(MethodRun::row).collect()
    }

    pub fn run(&self, m: Method) -> Option<&MethodRun> {
        self.runs.iter().find(|r| r.method == m)
    }
}

/// One method's counterfactual for every sampled row; samples run in parallel.
pub fn run_method<P: Predictor + ?Sized>(
    method: Method,
    data: &Dataset,
    predictor: &P,
    coverage: &Coverage,
    evaluator: &Evaluator<'_, P>,
    sample: &[usize],
    cfg: &BenchConfig,
) -> Result<Vec<Option<Vec<f64>>>> {
    match method {
        Method::OnbMacf => {
            let explainer = Explainer::new(coverage, data, predictor)?;
            sample
                .par_iter()
                .map(|&id| {
                    let req = ExplanationRequest::new(data.row(id).to_vec())
                        .with_step_ratio(cfg.step_ratio)
                        .with_max_steps(cfg.max_steps);
                    match explainer.explain(&req) {
                        Ok(r) => Ok(r.best().map(|c| c.values.clone())),
                        Err(Error::NoOpposingBalls) => Ok(None),
                        Err(e) => Err(e),
                    }
                })
                .collect()
        }
        Method::GrowingSpheres => sample
            .par_iter()
            .map(|&id| {
                let gs = GrowingSpheresConfig {
                    seed: cfg.baselines.gs.seed.wrapping_add(id as u64),
                    ..cfg.baselines.gs
                };
                growing_spheres(data.row(id), predictor, data.space(), &gs)
            })
            .collect(),
        Method::Nice => sample
            .par_iter()
            .map(|&id| {
                nice_counterfactual(
                    data.row(id),
                    data,
                    evaluator.train_classes(),
                    predictor,
                    coverage.metric,
                    &cfg.baselines.nice,
                )
            })
            .collect(),
    }
}

/// Runs `methods` in order over the sampled rows of `data`. A method that
/// errors is kept with an empty summary rather than aborting the benchmark.
pub fn run_benchmark<P: Predictor + ?Sized>(
    data: &Dataset,
    predictor: &P,
    coverage: &Coverage,
    methods: &[Method],
    sample: &[usize],
    cfg: &BenchConfig,
) -> Result<BenchRun> {
    if methods.is_empty() {
        return Err(Error::InvalidConfig("no method to benchmark".into()));
    }
    let evaluator = Evaluator::new(data, predictor, coverage.metric)?;
    let mut runs = Vec::with_capacity(methods.len());
    for &method in methods {
        let outcome = run_method(method, data, predictor, coverage, &evaluator, sample, cfg).and_then(|cfs| {
            let pairs: Vec<(&[f64], Option<&Vec<f64>>)> =
                sample.iter().zip(&cfs).map(|(&id, cf)| (data.row(id), cf.as_ref())).collect();
            let metrics = evaluator.evaluate_all(&pairs)?;
            let summary = aggregate(&metrics)?;
            Ok((cfs, metrics, summary))
        });
        runs.push(match outcome {
            Ok((counterfactuals, metrics, summary)) => MethodRun {
                method,
                counterfactuals,
                metrics,
                summary: Some(summary),
                error: None,
            },
            Err(e) => MethodRun {
                method,
                counterfactuals: vec![],
                metrics: vec![],
                summary: None,
                error: Some(e.to_string()),
            },
        });
    }
    Ok(BenchRun {
        sample: sample.to_vec(),
        runs,
    })
}
