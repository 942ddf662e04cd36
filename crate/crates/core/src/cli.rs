//! The `morphocf` command-line tool.
//!
//! Exit codes: 0 success, 2 cache or fingerprint mismatch, 3 no ball of a
//! requested target class, 1 anything else.

use std::ffi::OsString;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::baselines::{BaselineConfig, GrowingSpheresConfig, Method, NiceConfig};
use crate::bench::{run_benchmark, sample_rows, BenchConfig, BenchRun};
use crate::coverage::Coverage;
use crate::engine::{ExplanationRequest, ExplanationResult, Explainer, DEFAULT_MAX_STEPS, DEFAULT_STEP_RATIO};
use crate::error::{Error, Result};
use crate::metrics::{distances, feature_change_table, scale_report, FeatureChangeTable};
use crate::predictor::{
    serve, ClassId, KnnPredictor, MlpPredictor, Predictor, SubprocessPredictor,
};
use crate::report::{
    feature_change_csv, feature_pairs_csv, radial_plot_svg, raw_metrics_csv, scaled_metrics_csv,
};
use crate::tabular::{load_dataset, Dataset, DistanceMatrix, Metric, RawValue};

/// Environment variable that takes precedence over `--cache-dir`.
pub const CACHE_ENV: &str = "MORPHOCF_CACHE";

#[derive(Debug, Parser)]
#[command(name = "morphocf", version, about = "Counterfactual explanations from class-pure ball coverings")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build (or reuse) the ball coverage of a dataset.
    Cover {
        #[command(flatten)]
        common: Common,
        /// Fail with exit code 2 instead of rebuilding a stale cache.
        #[arg(long)]
        no_rebuild: bool,
    },
    /// Explain selected instances.
    Explain {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        search: Search,
        /// Row ids and inclusive ranges, e.g. `0,4-7`.
        #[arg(long, conflicts_with = "sample")]
        rows: Option<String>,
        /// Explain this many rows drawn at random with `--seed`.
        #[arg(long)]
        sample: Option<usize>,
        /// Counterfactuals to return per instance.
        #[arg(long, default_value_t = 1)]
        n: usize,
        /// Comma-separated target class names; all other classes by default.
        #[arg(long, value_delimiter = ',')]
        targets: Vec<String>,
        #[arg(long)]
        no_rebuild: bool,
    },
    /// Compare methods on a random sample and write metric tables and a radial plot.
    Bench {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        search: Search,
        #[command(flatten)]
        methods: Methods,
        #[arg(long, default_value_t = 200)]
        sample: usize,
        #[arg(long)]
        no_rebuild: bool,
    },
    /// Count which features each method changes.
    Qualitative {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        search: Search,
        #[command(flatten)]
        methods: Methods,
        #[arg(long, default_value_t = 200)]
        sample: usize,
        #[arg(long)]
        no_rebuild: bool,
    },
    /// Answer prediction requests on stdin with a built-in model.
    #[command(hide = true)]
    Serve {
        #[arg(long)]
        predictor: String,
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long)]
        schema: Option<PathBuf>,
        #[arg(long, default_value = "manhattan")]
        metric: Metric,
    },
}

#[derive(Debug, Args)]
pub struct Common {
    /// CSV file with a header row.
    #[arg(long)]
    pub data: PathBuf,
    /// JSON feature schema.
    #[arg(long)]
    pub schema: PathBuf,
    /// `knn:k=5`, `mlp:<weights.json>` or `cmd:"<program and arguments>"`.
    #[arg(long, default_value = "knn:k=5")]
    pub predictor: String,
    #[arg(long, default_value = "manhattan")]
    pub metric: Metric,
    #[arg(long, default_value = ".morphocf-cache")]
    pub cache_dir: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct Search {
    /// Fraction of the remaining gap covered by each step of the line search.
    #[arg(long, default_value_t = DEFAULT_STEP_RATIO)]
    pub step_ratio: f64,
    #[arg(long, default_value_t = DEFAULT_MAX_STEPS)]
    pub max_steps: usize,
}

#[derive(Debug, Args)]
pub struct Methods {
    /// Comma-separated methods: onb-macf, growing-spheres, nice.
    #[arg(long, value_delimiter = ',', default_value = "onb-macf,growing-spheres,nice")]
    pub methods: Vec<Method>,
}

/// How to obtain the model being explained.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PredictorSpec {
    Knn { k: usize },
    Mlp(PathBuf),
    Command(Vec<String>),
}

impl FromStr for PredictorSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidConfig(format!("cannot parse predictor {s:?}"));
        let (kind, rest) = s.split_once(':').unwrap_or((s, ""));
        match kind {
            "knn" => {
                let k = match rest {
                    "" => 5,
                    r => r.strip_prefix("k=").and_then(|v| v.parse().ok()).ok_or_else(bad)?,
                };
                if k == 0 {
                    return Err(bad());
                }
                Ok(PredictorSpec::Knn { k })
            }
            "mlp" if !rest.is_empty() => Ok(PredictorSpec::Mlp(PathBuf::from(rest))),
            "cmd" => {
                let parts = shlex::split(rest).filter(|p| !p.is_empty()).ok_or_else(bad)?;
                Ok(PredictorSpec::Command(parts))
            }
            _ => Err(bad()),
        }
    }
}

impl PredictorSpec {
    /// kNN models are fitted on the label column of `data`.
    pub fn build(&self, data: Option<&Dataset>, metric: Metric) -> Result<Box<dyn Predictor>> {
        Ok(match self {
            PredictorSpec::Knn { k } => {
                let data = data.ok_or_else(|| Error::InvalidConfig("a kNN predictor needs --data and --schema".into()))?;
                Box::new(KnnPredictor::from_dataset_labels(data, *k, metric)?)
            }
            PredictorSpec::Mlp(path) => Box::new(MlpPredictor::from_file(path)?),
            PredictorSpec::Command(cmd) => Box::new(SubprocessPredictor::spawn(cmd)?),
        })
    }
}

/// Parses `0,3-5` into `[0, 3, 4, 5]`.
pub fn parse_rows(spec: &str, n_rows: usize) -> Result<Vec<usize>> {
    let bad = |part: &str| Error::InvalidRequest(format!("bad row selector {part:?}"));
    let mut rows = Vec::new();
    for part in spec.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let (lo, hi): (usize, usize) = match part.split_once('-') {
            Some((a, b)) => (a.trim().parse().map_err(|_| bad(part))?, b.trim().parse().map_err(|_| bad(part))?),
            None => {
                let v = part.parse().map_err(|_| bad(part))?;
                (v, v)
            }
        };
        if lo > hi {
            return Err(bad(part));
        }
        if hi >= n_rows {
            return Err(Error::InvalidRequest(format!("row {hi} outside a dataset of {n_rows} rows")));
        }
        rows.extend(lo..=hi);
    }
    if rows.is_empty() {
        return Err(Error::InvalidRequest("no rows selected".into()));
    }
    Ok(rows)
}

/// Everything loaded from the common flags.
struct Context {
    common: Common,
    data: Dataset,
    predictor: Box<dyn Predictor>,
    cache_dir: PathBuf,
    stem: String,
}

impl Context {
    fn load(common: Common) -> Result<Self> {
        let (data, _) = load_dataset(&common.data, &common.schema)?;
        let spec: PredictorSpec = common.predictor.parse()?;
        let predictor = spec.build(Some(&data), common.metric)?;
        let cache_dir = std::env::var_os(CACHE_ENV)
            .filter(|v| !v.is_empty())
            .map(PathBuf::from)
            .unwrap_or_else(|| common.cache_dir.clone());
        let stem = common
            .data
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "data".into());
        Ok(Self {
            common,
            data,
            predictor,
            cache_dir,
            stem,
        })
    }

    fn coverage_path(&self) -> PathBuf {
        self.cache_dir.join(format!("{}.coverage.json", self.stem))
    }

    fn matrix_path(&self) -> PathBuf {
        let fp = self.data.fingerprint();
        self.cache_dir
            .join(format!("{}-{}-{}.dm", self.stem, &fp[..12], self.common.metric))
    }

    fn distance_matrix(&self) -> Result<DistanceMatrix> {
        let path = self.matrix_path();
        if let Ok(dm) = DistanceMatrix::load(&path) {
            if dm.len() == self.data.len() {
                return Ok(dm);
            }
        }
        let dm = crate::tabular::pairwise_distances(self.data.instances(), self.common.metric)?;
        dm.save(&path)?;
        Ok(dm)
    }

    /// Loads the cached coverage if it matches the inputs, otherwise builds and
    /// caches a new one. Returns whether the cache was used.
    fn coverage(&self, no_rebuild: bool) -> Result<(Coverage, bool)> {
        let path = self.coverage_path();
        if path.exists() {
            let problem = match Coverage::read(&path) {
                Ok(cov) => match cov.verify(&self.data, self.predictor.as_ref()) {
                    Ok(()) if cov.metric == self.common.metric => return Ok((cov, true)),
                    Ok(()) => Error::FingerprintMismatch(format!(
                        "cached coverage uses the {} metric, {} requested",
                        cov.metric, self.common.metric
                    )),
                    Err(e) => e,
                },
                Err(e) => e,
            };
            if no_rebuild {
                return Err(match problem {
                    e @ (Error::FingerprintMismatch(_) | Error::CorruptFile { .. }) => e,
                    other => Error::FingerprintMismatch(other.to_string()),
                });
            }
            eprintln!("warning: rebuilding coverage: {problem}");
        }
        std::fs::create_dir_all(&self.cache_dir)?;
        let dm = self.distance_matrix()?;
        let cov = Coverage::build_with_matrix(&self.data, self.predictor.as_ref(), &dm, self.common.metric)?;
        cov.save(&path)?;
        Ok((cov, false))
    }

    fn out_file(&self, suffix: &str) -> Result<PathBuf> {
        std::fs::create_dir_all(&self.common.out)?;
        Ok(self.common.out.join(format!("{}-{suffix}", self.stem)))
    }
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text)?;
    println!("wrote {}", path.display());
    Ok(())
}

fn ball_summary(cov: &Coverage, predictor: &dyn Predictor) -> String {
    let per_class: Vec<String> = cov
        .class_counts()
        .into_iter()
        .map(|(c, n)| format!("{}:{n}", predictor.class_name(c)))
        .collect();
    format!("{} balls ({})", cov.len(), per_class.join(", "))
}

#[derive(Serialize)]
struct CounterfactualRecord {
    values: Vec<RawValue>,
    encoded: Vec<f64>,
    class: String,
    changed_features: Vec<String>,
    l0: usize,
    l1: f64,
    l2: f64,
    linf: f64,
    found_on_segment: bool,
}

#[derive(Serialize)]
struct ExplanationRecord {
    instance_id: usize,
    instance: Vec<RawValue>,
    class: String,
    success: bool,
    level: Option<&'static str>,
    recovered: bool,
    counterfactuals: Vec<CounterfactualRecord>,
    semifactual: Option<Vec<RawValue>>,
}

fn explanation_record(
    id: usize,
    data: &Dataset,
    predictor: &dyn Predictor,
    res: &ExplanationResult,
) -> Result<ExplanationRecord> {
    let space = data.space();
    let x = data.row(id);
    let counterfactuals = res
        .counterfactuals
        .iter()
        .map(|cf| {
            let (l1, l2, linf) = distances(x, &cf.values);
            Ok(CounterfactualRecord {
                values: space.decode(&cf.values)?,
                encoded: cf.values.clone(),
                class: predictor.class_name(cf.class).to_string(),
                l0: cf.changed_features.len(),
                changed_features: cf.changed_features.clone(),
                l1,
                l2,
                linf,
                found_on_segment: cf.found_on_segment,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ExplanationRecord {
        instance_id: id,
        instance: space.decode(x)?,
        class: predictor.class_name(res.instance_class).to_string(),
        success: res.success,
        level: res.level.map(|l| l.name()),
        recovered: res.recovered,
        counterfactuals,
        semifactual: res.semifactual.as_deref().map(|s| space.decode(s)).transpose()?,
    })
}

fn print_explanation(rec: &ExplanationRecord, data: &Dataset) {
    let names: Vec<&str> = data.schema().names().collect();
    let Some(best) = rec.counterfactuals.first() else {
        println!("row {}: {} -> no counterfactual", rec.instance_id, rec.class);
        return;
    };
    println!(
        "row {}: {} -> {} [{}]",
        rec.instance_id,
        rec.class,
        best.class,
        rec.level.unwrap_or("-")
    );
    for f in &best.changed_features {
        let i = names.iter().position(|n| n == f).expect("changed feature is in the schema");
        println!("  {f}: {} -> {}", rec.instance[i], best.values[i]);
    }
}

fn cmd_cover(common: Common, no_rebuild: bool) -> Result<()> {
    let ctx = Context::load(common)?;
    let started = Instant::now();
    let (cov, hit) = ctx.coverage(no_rebuild)?;
    if hit {
        println!("cache hit: {}", ctx.coverage_path().display());
    } else {
        println!(
            "built coverage in {:.3}s: {}",
            started.elapsed().as_secs_f64(),
            ctx.coverage_path().display()
        );
    }
    println!("{}", ball_summary(&cov, ctx.predictor.as_ref()));
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_explain(
    common: Common,
    search: Search,
    rows: Option<String>,
    sample: Option<usize>,
    n: usize,
    targets: Vec<String>,
    no_rebuild: bool,
) -> Result<()> {
    let ctx = Context::load(common)?;
    let ids = match (rows, sample) {
        (Some(spec), _) => parse_rows(&spec, ctx.data.len())?,
        (None, Some(k)) => sample_rows(ctx.data.len(), k, ctx.common.seed),
        (None, None) => return Err(Error::InvalidRequest("select instances with --rows or --sample".into())),
    };
    let predictor = ctx.predictor.as_ref();
    let targets = if targets.is_empty() {
        None
    } else {
        Some(
            targets
                .iter()
                .map(|t| {
                    predictor
                        .class_by_name(t.trim())
                        .ok_or_else(|| Error::InvalidRequest(format!("unknown class {t:?}")))
                })
                .collect::<Result<Vec<ClassId>>>()?,
        )
    };
    let (cov, _) = ctx.coverage(no_rebuild)?;
    let explainer = Explainer::new(&cov, &ctx.data, predictor)?;
    let mut records = Vec::with_capacity(ids.len());
    for &id in &ids {
        let mut req = ExplanationRequest::new(ctx.data.row(id).to_vec())
            .with_count(n)
            .with_step_ratio(search.step_ratio)
            .with_max_steps(search.max_steps);
        if let Some(t) = &targets {
            req = req.with_targets(t.clone());
        }
        let res = explainer.explain(&req)?;
        let rec = explanation_record(id, &ctx.data, predictor, &res)?;
        print_explanation(&rec, &ctx.data);
        records.push(rec);
    }
    let mut text = serde_json::to_string_pretty(&records)?;
    text.push('\n');
    write_file(&ctx.out_file("explanations.json")?, &text)
}

fn bench_config(search: &Search, seed: u64) -> BenchConfig {
    BenchConfig {
        step_ratio: search.step_ratio,
        max_steps: search.max_steps,
        baselines: BaselineConfig {
            gs: GrowingSpheresConfig { seed, ..Default::default() },
            nice: NiceConfig::default(),
        },
    }
}

fn run_sample(ctx: &Context, search: &Search, methods: &[Method], sample: usize, no_rebuild: bool) -> Result<BenchRun> {
    let (cov, _) = ctx.coverage(no_rebuild)?;
    let ids = sample_rows(ctx.data.len(), sample, ctx.common.seed);
    let run = run_benchmark(
        &ctx.data,
        ctx.predictor.as_ref(),
        &cov,
        methods,
        &ids,
        &bench_config(search, ctx.common.seed),
    )?;
    for r in &run.runs {
        if let Some(e) = &r.error {
            eprintln!("warning: {} failed: {e}", r.method);
        }
    }
    Ok(run)
}

#[derive(Serialize)]
struct BenchSummary<'a> {
    dataset: &'a str,
    sample: &'a [usize],
    methods: Vec<serde_json::Value>,
}

fn cmd_bench(common: Common, search: Search, methods: Methods, sample: usize, no_rebuild: bool) -> Result<()> {
    let ctx = Context::load(common)?;
    let run = run_sample(&ctx, &search, &methods.methods, sample, no_rebuild)?;
    let rows = run.rows();
    let scaled = scale_report(&rows);
    write_file(&ctx.out_file("raw.csv")?, &raw_metrics_csv(&rows)?)?;
    write_file(&ctx.out_file("scaled.csv")?, &scaled_metrics_csv(&scaled)?)?;
    write_file(&ctx.out_file("radial.svg")?, &radial_plot_svg(&ctx.stem, &scaled))?;
    let summary = BenchSummary {
        dataset: &ctx.stem,
        sample: &run.sample,
        methods: run
            .runs
            .iter()
            .zip(&scaled)
            .map(|(r, s)| {
                serde_json::json!({
                    "method": r.method,
                    "summary": r.summary,
                    "scaled": s.values,
                    "overall": s.overall,
                    "error": r.error,
                })
            })
            .collect(),
    };
    let mut text = serde_json::to_string_pretty(&summary)?;
    text.push('\n');
    write_file(&ctx.out_file("metrics.json")?, &text)?;
    for s in &scaled {
        println!("{:<16} overall {:.3}", s.method, s.overall);
    }
    Ok(())
}

fn cmd_qualitative(common: Common, search: Search, methods: Methods, sample: usize, no_rebuild: bool) -> Result<()> {
    let ctx = Context::load(common)?;
    let run = run_sample(&ctx, &search, &methods.methods, sample, no_rebuild)?;
    let tables: Vec<(String, FeatureChangeTable)> = run
        .runs
        .iter()
        .map(|r| {
            let pairs: Vec<(&[f64], Option<&Vec<f64>>)> = run
                .sample
                .iter()
                .enumerate()
                .map(|(k, &id)| (ctx.data.row(id), r.counterfactuals.get(k).and_then(Option::as_ref)))
                .collect();
            (r.method.name().to_string(), feature_change_table(&pairs, ctx.data.space()))
        })
        .collect();
    let changes = feature_change_csv(&tables)?;
    print!("{changes}");
    write_file(&ctx.out_file("feature-changes.csv")?, &changes)?;
    write_file(&ctx.out_file("feature-pairs.csv")?, &feature_pairs_csv(&tables)?)
}

fn cmd_serve(predictor: String, data: Option<PathBuf>, schema: Option<PathBuf>, metric: Metric) -> Result<()> {
    let data = match (data, schema) {
        (Some(d), Some(s)) => Some(load_dataset(&d, &s)?.0),
        (None, None) => None,
        _ => return Err(Error::InvalidConfig("--data and --schema go together".into())),
    };
    let p = predictor.parse::<PredictorSpec>()?.build(data.as_ref(), metric)?;
    let stdin = std::io::stdin();
    let stdout = std::io::stdout();
    serve(p.as_ref(), stdin.lock(), stdout.lock())
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Cover { common, no_rebuild } => cmd_cover(common, no_rebuild),
        Command::Explain {
            common,
            search,
            rows,
            sample,
            n,
            targets,
            no_rebuild,
        } => cmd_explain(common, search, rows, sample, n, targets, no_rebuild),
        Command::Bench {
            common,
            search,
            methods,
            sample,
            no_rebuild,
        } => cmd_bench(common, search, methods, sample, no_rebuild),
        Command::Qualitative {
            common,
            search,
            methods,
            sample,
            no_rebuild,
        } => cmd_qualitative(common, search, methods, sample, no_rebuild),
        Command::Serve {
            predictor,
            data,
            schema,
            metric,
        } => cmd_serve(predictor, data, schema, metric),
    }
}

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::FingerprintMismatch(_) | Error::CoverageMismatch(_) | Error::CorruptFile { .. } => 2,
        Error::NoOpposingBalls => 3,
        _ => 1,
    }
}

/// Parses arguments, runs, and returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match run(cli) {
        Ok(()) => {
            let _ = std::io::stdout().flush();
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}
