//! Multi-seed experiment runner, stability reports and output files.
//!
//! Run `i` of an experiment uses seed `base_seed + i`. Runs execute on a
//! dedicated thread pool; every random draw is keyed by seed and stream, so
//! the emitted files do not depend on the job count.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::StepParams;
use crate::error::{Error, Result};
use crate::metrics::{delta_p, median_iqr, MedianIqr};
use crate::model::ObjectiveVector;
use crate::nsga2::{run_nsga2, Nsga2Config};
use crate::problems::ProblemConfig;
use crate::ssw::{run_ssw, RunResult, SswConfig};
use crate::stability::{
    check_assumption_a, check_assumption_b, check_drift_condition, ergodic_average, estimate_growth,
    estimate_hitting_time, field_from_spec, generator_v, radial_sweep, AssumptionReport,
    DriftConditionReport, GrowthEstimate, HittingTimeEstimate,
};

pub const TOOLKIT_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Header of the per-run CSV.
pub const RUNS_CSV_HEADER: &str = "seed,delta_p,gd_p,igd_p,evaluations,wall_time_s";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "lowercase")]
pub enum AlgorithmConfig {
    Ssw(SswConfig),
    Nsga2(Nsga2Config),
}

impl Default for AlgorithmConfig {
    fn default() -> Self {
        AlgorithmConfig::Ssw(SswConfig::default())
    }
}

impl AlgorithmConfig {
    pub fn name(&self) -> &'static str {
        match self {
            AlgorithmConfig::Ssw(_) => "ssw",
            AlgorithmConfig::Nsga2(_) => "nsga2",
        }
    }

    pub fn from_name(name: &str) -> Result<Self> {
        match name {
            "ssw" => Ok(AlgorithmConfig::Ssw(SswConfig::default())),
            "nsga2" => Ok(AlgorithmConfig::Nsga2(Nsga2Config::default())),
            other => Err(Error::Config(format!(
                "unknown algorithm '{other}' (known: ssw, nsga2)"
            ))),
        }
    }

    fn with_seed(&self, seed: u64) -> Self {
        match self {
            AlgorithmConfig::Ssw(c) => AlgorithmConfig::Ssw(SswConfig { seed, ..c.clone() }),
            AlgorithmConfig::Nsga2(c) => AlgorithmConfig::Nsga2(Nsga2Config { seed, ..c.clone() }),
        }
    }
}

/// Which point set of a run the indicator is computed on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IndicatorSet {
    /// The set each algorithm returns: the archive for SSW, the
    /// non-dominated part of the final population for NSGA-II.
    #[default]
    Returned,
    Archive,
    /// Non-dominated, de-duplicated part of the final population.
    FinalPopulation,
}

impl IndicatorSet {
    /// Resolves `Returned` for a given algorithm.
    pub fn resolve(self, algorithm: &AlgorithmConfig) -> IndicatorSet {
        match (self, algorithm) {
            (IndicatorSet::Returned, AlgorithmConfig::Ssw(_)) => IndicatorSet::Archive,
            (IndicatorSet::Returned, AlgorithmConfig::Nsga2(_)) => IndicatorSet::FinalPopulation,
            (other, _) => other,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            IndicatorSet::Returned => "returned",
            IndicatorSet::Archive => "archive",
            IndicatorSet::FinalPopulation => "final_population",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MetricConfig {
    pub p: f64,
    /// `None` uses the problem's default size.
    pub reference_front_size: Option<usize>,
    pub reference_seed: u64,
    pub indicator_set: IndicatorSet,
}

impl Default for MetricConfig {
    fn default() -> Self {
        Self {
            p: 1.0,
            reference_front_size: None,
            reference_seed: 0,
            indicator_set: IndicatorSet::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub problem: ProblemConfig,
    pub algorithm: AlgorithmConfig,
    pub runs: usize,
    pub base_seed: u64,
    pub metric: MetricConfig,
    pub output_dir: Option<PathBuf>,
    /// Wall-clock times are left out of the per-run CSV unless set, which
    /// keeps that file byte-identical across re-runs.
    pub record_wall_time: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            problem: ProblemConfig::default(),
            algorithm: AlgorithmConfig::default(),
            runs: 30,
            base_seed: 1,
            metric: MetricConfig::default(),
            output_dir: None,
            record_wall_time: false,
        }
    }
}

impl ExperimentConfig {
    pub fn from_json_file(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn validate(&self) -> Result<()> {
        if self.runs == 0 {
            return Err(Error::Config("runs must be at least 1".into()));
        }
        if !(self.metric.p >= 1.0) {
            return Err(Error::Config("metric order p must be >= 1".into()));
        }
        self.problem.build()?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub run: usize,
    pub seed: u64,
    pub delta_p: f64,
    pub gd_p: f64,
    pub igd_p: f64,
    pub evaluations: u64,
    pub generations: usize,
    pub archive_size: usize,
    pub wall_time_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceFrontInfo {
    pub size: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSummary {
    pub toolkit_version: String,
    pub config: ExperimentConfig,
    /// Which point set the indicator is computed on.
    pub indicator_set: String,
    pub reference_front: ReferenceFrontInfo,
    pub per_run: Vec<RunRecord>,
    pub aggregate: MedianIqr,
    #[serde(skip)]
    pub archives: Vec<Vec<ObjectiveVector>>,
    /// Scored point sets, when they differ from the archives.
    #[serde(skip)]
    pub scored: Option<Vec<Vec<ObjectiveVector>>>,
}

/// Non-dominated points of `points`, first occurrence kept among duplicates.
pub fn nondominated_subset(points: &[ObjectiveVector]) -> Vec<ObjectiveVector> {
    points
        .iter()
        .enumerate()
        .filter(|&(i, f)| {
            !points.iter().enumerate().any(|(j, g)| {
                crate::archive::dominates_unchecked(g, f) || (j < i && g.as_slice() == f.as_slice())
            })
        })
        .map(|(_, f)| f.clone())
        .collect()
}

fn run_algorithm(problem: &dyn crate::model::Problem, algorithm: &AlgorithmConfig) -> Result<RunResult> {
    match algorithm {
        AlgorithmConfig::Ssw(c) => run_ssw(problem, c),
        AlgorithmConfig::Nsga2(c) => run_nsga2(problem, c),
    }
}

fn thread_pool(jobs: Option<usize>) -> Result<rayon::ThreadPool> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(j) = jobs {
        if j == 0 {
            return Err(Error::Config("--jobs must be at least 1".into()));
        }
        builder = builder.num_threads(j);
    }
    builder
        .build()
        .map_err(|e| Error::Config(format!("cannot build thread pool: {e}")))
}

/// Executes all runs, computes the indicator on each final archive, and
/// writes the output files when `output_dir` is set.
pub fn run_experiment(config: &ExperimentConfig, jobs: Option<usize>) -> Result<ExperimentSummary> {
    config.validate()?;
    let bench = config.problem.build()?;
    let front_size = config
        .metric
        .reference_front_size
        .unwrap_or_else(|| bench.default_front_size());
    let reference = bench.reference_front(front_size, config.metric.reference_seed)?;

    let set = config.metric.indicator_set.resolve(&config.algorithm);
    let pool = thread_pool(jobs)?;
    type Outcome = (RunRecord, Vec<ObjectiveVector>, Option<Vec<ObjectiveVector>>);
    let outcomes: Vec<Outcome> = pool.install(|| {
        (0..config.runs)
            .into_par_iter()
            .map(|run| {
                let seed = config.base_seed.wrapping_add(run as u64);
                let result = run_algorithm(bench.problem(), &config.algorithm.with_seed(seed))?;
                let front: Vec<ObjectiveVector> =
                    result.archive.entries().iter().map(|e| e.f.clone()).collect();
                let scored = match set {
                    IndicatorSet::FinalPopulation => Some(nondominated_subset(&result.final_population)),
                    _ => None,
                };
                let ind = delta_p(scored.as_ref().unwrap_or(&front), &reference, config.metric.p)?;
                Ok((
                    RunRecord {
                        run,
                        seed,
                        delta_p: ind.delta_p,
                        gd_p: ind.gd_p,
                        igd_p: ind.igd_p,
                        evaluations: result.evaluations_used,
                        generations: result.generations_completed,
                        archive_size: front.len(),
                        wall_time_s: result.wall_time_s,
                    },
                    front,
                    scored,
                ))
            })
            .collect::<Result<Vec<_>>>()
    })?;

    let mut per_run = Vec::with_capacity(outcomes.len());
    let mut archives = Vec::with_capacity(outcomes.len());
    let mut scored = Vec::with_capacity(outcomes.len());
    for (record, archive, s) in outcomes {
        per_run.push(record);
        archives.push(archive);
        scored.extend(s);
    }
    let scored = (set == IndicatorSet::FinalPopulation).then_some(scored);
    let deltas: Vec<f64> = per_run.iter().map(|r| r.delta_p).collect();
    let summary = ExperimentSummary {
        toolkit_version: TOOLKIT_VERSION.to_string(),
        config: config.clone(),
        indicator_set: set.name().into(),
        reference_front: ReferenceFrontInfo {
            size: front_size,
            seed: config.metric.reference_seed,
        },
        aggregate: median_iqr(&deltas)?,
        per_run,
        archives,
        scored,
    };
    if let Some(dir) = &config.output_dir {
        write_outputs(&summary, dir)?;
    }
    Ok(summary)
}

/// Comment line carrying the toolkit version, base seed and resolved config.
/// The output directory is left out: it does not affect any result.
fn provenance_line(config: &ExperimentConfig) -> Result<String> {
    let config = ExperimentConfig {
        output_dir: None,
        ..config.clone()
    };
    Ok(format!(
        "# toolkit {TOOLKIT_VERSION} base_seed {} config {}\n",
        config.base_seed,
        serde_json::to_string(&config)?
    ))
}

/// Per-run CSV: one provenance comment line, the header, then one row per run.
pub fn runs_csv(summary: &ExperimentSummary) -> Result<String> {
    let mut out = provenance_line(&summary.config)?;
    out.push_str(RUNS_CSV_HEADER);
    out.push('\n');
    for r in &summary.per_run {
        let wall = if summary.config.record_wall_time {
            r.wall_time_s.to_string()
        } else {
            String::new()
        };
        writeln!(out, "{},{},{},{},{},{}", r.seed, r.delta_p, r.gd_p, r.igd_p, r.evaluations, wall)
            .expect("writing to a String cannot fail");
    }
    Ok(out)
}

fn points_csv(config: &ExperimentConfig, header_prefix: &str, points: &[ObjectiveVector]) -> Result<String> {
    let mut out = provenance_line(config)?;
    let m = points.first().map_or(0, |p| p.len());
    let header: Vec<String> = (1..=m).map(|j| format!("{header_prefix}{j}")).collect();
    out.push_str(&header.join(","));
    out.push('\n');
    for p in points {
        let row: Vec<String> = p.iter().map(|v| v.to_string()).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    Ok(out)
}

/// Writes `runs.csv`, `summary.json`, `archives/run_<i>_seed_<s>.csv` and,
/// when the indicator is computed on the final population, the scored sets
/// under `scored/`.
pub fn write_outputs(summary: &ExperimentSummary, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join("runs.csv"), runs_csv(summary)?)?;
    fs::write(dir.join("summary.json"), serde_json::to_string_pretty(summary)? + "\n")?;
    write_point_sets(summary, &dir.join("archives"), &summary.archives)?;
    if let Some(scored) = &summary.scored {
        write_point_sets(summary, &dir.join("scored"), scored)?;
    }
    Ok(())
}

fn write_point_sets(summary: &ExperimentSummary, dir: &Path, sets: &[Vec<ObjectiveVector>]) -> Result<()> {
    fs::create_dir_all(dir)?;
    for (record, front) in summary.per_run.iter().zip(sets) {
        let name = format!("run_{:03}_seed_{}.csv", record.run, record.seed);
        fs::write(dir.join(name), points_csv(&summary.config, "f", front)?)?;
    }
    Ok(())
}

/// Parses the `delta_p` column back out of a per-run CSV.
pub fn read_runs_csv_delta(text: &str) -> Result<Vec<f64>> {
    let mut lines = text.lines().filter(|l| !l.starts_with('#'));
    match lines.next() {
        Some(h) if h == RUNS_CSV_HEADER => {}
        other => {
            return Err(Error::Config(format!("unexpected runs.csv header {other:?}")));
        }
    }
    lines
        .map(|l| {
            l.split(',')
                .nth(1)
                .and_then(|v| v.parse::<f64>().ok())
                .ok_or_else(|| Error::Config(format!("malformed runs.csv row '{l}'")))
        })
        .collect()
}

/// Emits a reference front as CSV.
pub fn reference_front_csv(problem: &ProblemConfig, count: usize, seed: u64) -> Result<String> {
    let bench = problem.build()?;
    let front = bench.reference_front(count, seed)?;
    let config = ExperimentConfig {
        problem: problem.clone(),
        metric: MetricConfig {
            reference_front_size: Some(count),
            reference_seed: seed,
            ..Default::default()
        },
        ..Default::default()
    };
    points_csv(&config, "f", &front)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HittingProbe {
    /// Start point is `x0_norm * e_1`.
    pub x0_norm: f64,
    pub p: f64,
    pub replicas: usize,
    pub max_steps: u64,
}

impl Default for HittingProbe {
    fn default() -> Self {
        Self {
            x0_norm: 5.0,
            p: 1.0,
            replicas: 1_000,
            max_steps: 100_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ErgodicProbe {
    pub horizon_steps: u64,
    pub burn_in_steps: u64,
}

impl Default for ErgodicProbe {
    fn default() -> Self {
        Self {
            horizon_steps: 2_000_000,
            burn_in_steps: 100_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StabilityProbes {
    pub dim: usize,
    pub theta0: f64,
    pub r: f64,
    pub mu: f64,
    pub eps: f64,
    pub sigma: f64,
    /// Foster-Lyapunov threshold and exclusion radius for the drift check on W.
    pub lambda: f64,
    pub drift_radius: f64,
    pub seed: u64,
    pub hitting: HittingProbe,
    pub ergodic: ErgodicProbe,
}

impl Default for StabilityProbes {
    fn default() -> Self {
        Self {
            dim: 2,
            theta0: 1.0,
            r: 2.0,
            mu: 0.5,
            eps: 0.15,
            sigma: 0.01,
            lambda: 0.1,
            drift_radius: 2.0,
            seed: 1,
            hitting: HittingProbe::default(),
            ergodic: ErgodicProbe::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErgodicAverages {
    /// Time average of `x_1^2`.
    pub first_coordinate_sq: f64,
    /// Time average of `||x||^2`.
    pub norm_sq: f64,
    /// Time average of each drift component; near zero under a stationary law.
    pub mean_drift: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    pub toolkit_version: String,
    pub field: String,
    pub descriptor: String,
    pub probes: StabilityProbes,
    pub assumption_a: AssumptionReport,
    pub assumption_b: AssumptionReport,
    pub growth: GrowthEstimate,
    /// Largest generator value on `||x||^2` over the radial sweep.
    pub generator_v_max: f64,
    pub drift_condition: DriftConditionReport,
    pub hitting_time: HittingTimeEstimate,
    pub ergodic: ErgodicAverages,
}

/// Runs every stability probe on the named field and optionally writes the
/// report as JSON.
pub fn run_stability_report(field_name: &str, probes: &StabilityProbes, out: Option<&Path>) -> Result<StabilityReport> {
    let field = field_from_spec(field_name, probes.dim)?;
    let params = StepParams::new(probes.sigma, probes.eps).map_err(|e| Error::Config(e.to_string()))?;
    if !(probes.r >= 1.0 && probes.theta0 > 0.0 && probes.mu > 0.0) {
        return Err(Error::Config("stability probes need r >= 1, theta0 > 0 and mu > 0".into()));
    }
    let samples = radial_sweep(probes.dim, probes.r, probes.seed);
    let assumption_a = check_assumption_a(field.as_ref(), probes.theta0, probes.r, &samples)?;
    let assumption_b = check_assumption_b(field.as_ref(), probes.mu, probes.r, &samples)?;
    let growth = estimate_growth(field.as_ref(), &samples, probes.eps, probes.dim)?;
    let generator_v_max = samples
        .iter()
        .map(|x| generator_v(field.as_ref(), x, probes.eps))
        .fold(f64::NEG_INFINITY, f64::max);
    let origin = vec![0.0; probes.dim];
    let drift_condition = check_drift_condition(
        field.as_ref(),
        &origin,
        probes.eps,
        probes.lambda,
        probes.drift_radius,
        &samples,
    );

    let mut x0 = origin.clone();
    x0[0] = probes.hitting.x0_norm;
    let hitting_time = estimate_hitting_time(
        field.as_ref(),
        &x0,
        &origin,
        probes.hitting.p,
        params,
        probes.hitting.replicas,
        probes.hitting.max_steps,
        probes.seed,
    )?;

    let ergo = |phi: &dyn Fn(&[f64]) -> f64| {
        ergodic_average(
            field.as_ref(),
            &origin,
            params,
            probes.ergodic.horizon_steps,
            probes.ergodic.burn_in_steps,
            phi,
            probes.seed,
        )
    };
    let first_coordinate_sq = ergo(&|x| x[0] * x[0])?;
    let norm_sq = ergo(&|x| x.iter().map(|v| v * v).sum())?;
    let mean_drift = (0..probes.dim)
        .map(|i| ergo(&|x| field.drift(x)[i]))
        .collect::<Result<Vec<_>>>()?;

    let report = StabilityReport {
        toolkit_version: TOOLKIT_VERSION.to_string(),
        field: field_name.to_string(),
        descriptor: field.descriptor(),
        probes: probes.clone(),
        assumption_a,
        assumption_b,
        growth,
        generator_v_max,
        drift_condition,
        hitting_time,
        ergodic: ErgodicAverages {
            first_coordinate_sq,
            norm_sq,
            mean_drift,
        },
    };
    if let Some(path) = out {
        if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
            fs::create_dir_all(parent)?;
        }
        fs::write(path, serde_json::to_string_pretty(&report)? + "\n")?;
    }
    Ok(report)
}

/// Command-line overrides applied on top of a loaded or default config.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub problem: Option<String>,
    pub m: Option<usize>,
    pub k: Option<usize>,
    pub algo: Option<String>,
    pub pop: Option<usize>,
    pub sigma: Option<f64>,
    pub eps: Option<f64>,
    pub budget: Option<u64>,
    pub runs: Option<usize>,
    pub seed: Option<u64>,
    pub p: Option<f64>,
    pub out: Option<PathBuf>,
}

pub fn apply_overrides(mut config: ExperimentConfig, o: &Overrides) -> Result<ExperimentConfig> {
    if o.problem.is_some() || o.m.is_some() || o.k.is_some() {
        let (name, m, size) = match &config.problem {
            ProblemConfig::Dtlz2 { m, k } => ("dtlz2", Some(*m), Some(*k)),
            ProblemConfig::Quad2 { n } => ("quad2", None, Some(*n)),
        };
        let name = o.problem.as_deref().unwrap_or(name);
        let keep_size = o.problem.as_deref().is_none_or(|p| p == config_problem_name(&config));
        config.problem = ProblemConfig::from_name(
            name,
            o.m.or(m),
            o.k.or(if keep_size { size } else { None }),
        )?;
    }
    if let Some(algo) = &o.algo {
        if algo != config.algorithm.name() {
            config.algorithm = AlgorithmConfig::from_name(algo)?;
        }
    }
    match &mut config.algorithm {
        AlgorithmConfig::Ssw(c) => {
            if let Some(v) = o.pop {
                c.population = v;
            }
            if let Some(v) = o.sigma {
                c.sigma = v;
            }
            if let Some(v) = o.eps {
                c.eps = v;
            }
            if let Some(v) = o.budget {
                c.budget = v;
            }
        }
        AlgorithmConfig::Nsga2(c) => {
            if o.sigma.is_some() || o.eps.is_some() {
                return Err(Error::Config("--sigma and --eps apply to ssw only".into()));
            }
            if let Some(v) = o.pop {
                c.population = v;
            }
            if let Some(v) = o.budget {
                c.budget = v;
            }
        }
    }
    if let Some(v) = o.runs {
        config.runs = v;
    }
    if let Some(v) = o.seed {
        config.base_seed = v;
    }
    if let Some(v) = o.p {
        config.metric.p = v;
    }
    if let Some(v) = &o.out {
        config.output_dir = Some(v.clone());
    }
    Ok(config)
}

fn config_problem_name(config: &ExperimentConfig) -> &'static str {
    match config.problem {
        ProblemConfig::Dtlz2 { .. } => "dtlz2",
        ProblemConfig::Quad2 { .. } => "quad2",
    }
}
