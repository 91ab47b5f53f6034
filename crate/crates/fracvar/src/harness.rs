//! Experiment engine: runs many realizations of a diffusion, estimates the
//! Hurst index and noise coefficients at several observation levels, and
//! aggregates normalized errors into box-plot statistics.
//!
//! Per realization the engine samples a driving fBm path at the fine level,
//! produces the trajectory (exactly for the commuting linear example, with
//! the Heun solver otherwise), and for each observation level `n` records
//! three normalized errors:
//!
//! * `hurst` — `log2 |(H - H_n) / (H delta_n^H)|`, sign kept separately;
//! * `theta_known` — `log2 (|theta - theta_n| / delta_n^H)`;
//! * `theta_unknown` — `log2 (|theta - theta_n| / (n delta_n^H))`,
//!
//! where `delta_n` is [`convergence_rate`]. Estimator failures are recorded
//! per cell and excluded from the statistics. Every realization draws from
//! its own deterministic seed, so reports are identical regardless of thread
//! count.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::estimators::{
    convergence_rate, estimate_hurst, estimate_theta_known_hurst, estimate_theta_unknown_hurst,
    TestFunction, TestFunctionSet,
};
use crate::fbm::{sample_fbm, FbmSampleRequest, HurstIndex};
use crate::rde::{solve_2d_linear_exact, solve_heun3, FieldFn, RdeProblem, VectorFieldSet};
use crate::variation::subsample;
use crate::{Error, Result, SampledPath};

/// How a builtin example turns a driving path into a trajectory.
pub enum TrajectoryMethod {
    /// Third-order Runge-Kutta on the fine grid.
    Heun3,
    /// Matrix-exponential solution of the commuting 2d linear system.
    Linear2dExact { a1: [[f64; 2]; 2], a2: [[f64; 2]; 2] },
}

/// A fully wired estimation problem: dynamics, true coefficients, initial
/// state, observables, and the trajectory method.
pub struct ExampleDefinition {
    pub name: &'static str,
    pub fields: VectorFieldSet,
    pub test_functions: TestFunctionSet,
    pub true_theta: Vec<f64>,
    pub y0: Vec<f64>,
    pub method: TrajectoryMethod,
}

impl ExampleDefinition {
    pub fn num_noise_components(&self) -> usize {
        self.fields.num_fields()
    }

    /// Produces the trajectory driven by `driver`.
    pub fn trajectory(&self, driver: &SampledPath) -> Result<SampledPath> {
        match &self.method {
            TrajectoryMethod::Heun3 => {
                let problem = RdeProblem::new(&self.fields, driver, self.y0.clone())?;
                solve_heun3(&problem)
            }
            TrajectoryMethod::Linear2dExact { a1, a2 } => solve_2d_linear_exact(
                *a1,
                *a2,
                [self.true_theta[0], self.true_theta[1]],
                driver,
                [self.y0[0], self.y0[1]],
            ),
        }
    }
}

fn scalar_field(f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Box<FieldFn> {
    Box::new(move |y: &[f64], out: &mut [f64]| out[0] = f(y[0]))
}

fn nonlinear_1d() -> ExampleDefinition {
    let fields = VectorFieldSet::without_drift(
        1,
        vec![scalar_field(f64::sin), scalar_field(f64::cos)],
        vec![0.5, 0.8],
    )
    .expect("static definition is valid");
    let test_functions = TestFunctionSet::new(vec![
        TestFunction::new(|y| y[0].sin(), |y, g| g[0] = y[0].cos()),
        TestFunction::new(|y| y[0].cos(), |y, g| g[0] = -y[0].sin()),
    ]);
    ExampleDefinition {
        name: "nonlinear1d",
        fields,
        test_functions,
        true_theta: vec![0.5, 0.8],
        y0: vec![1.0],
        method: TrajectoryMethod::Heun3,
    }
}

const LINEAR_A1: [[f64; 2]; 2] = [[1.0, 0.5], [0.5, 1.0]];
const LINEAR_A2: [[f64; 2]; 2] = [[2.0, -1.0], [-1.0, 2.0]];

fn linear_2d() -> ExampleDefinition {
    let matrix_field = |a: [[f64; 2]; 2]| -> Box<FieldFn> {
        Box::new(move |y: &[f64], out: &mut [f64]| {
            out[0] = a[0][0] * y[0] + a[0][1] * y[1];
            out[1] = a[1][0] * y[0] + a[1][1] * y[1];
        })
    };
    let fields = VectorFieldSet::without_drift(
        2,
        vec![matrix_field(LINEAR_A1), matrix_field(LINEAR_A2)],
        vec![0.1, 0.1],
    )
    .expect("static definition is valid");
    let test_functions = TestFunctionSet::new(vec![
        TestFunction::new(
            |y| y[0],
            |_, g| {
                g[0] = 1.0;
                g[1] = 0.0;
            },
        ),
        TestFunction::new(
            |y| y[1],
            |_, g| {
                g[0] = 0.0;
                g[1] = 1.0;
            },
        ),
    ]);
    ExampleDefinition {
        name: "linear2d",
        fields,
        test_functions,
        true_theta: vec![0.1, 0.1],
        y0: vec![0.5, 1.0],
        method: TrajectoryMethod::Linear2dExact { a1: LINEAR_A1, a2: LINEAR_A2 },
    }
}

fn nonlinear_2d() -> ExampleDefinition {
    let fields = VectorFieldSet::without_drift(
        2,
        vec![
            Box::new(|y: &[f64], out: &mut [f64]| {
                out[0] = y[0].sin() * y[1].cos();
                out[1] = 0.0;
            }) as Box<FieldFn>,
            Box::new(|y: &[f64], out: &mut [f64]| {
                out[0] = 0.0;
                out[1] = y[0].cos() * y[1].sin();
            }),
        ],
        vec![0.5, 0.8],
    )
    .expect("static definition is valid");
    let test_functions = TestFunctionSet::new(vec![
        TestFunction::new(
            |y| y[0],
            |_, g| {
                g[0] = 1.0;
                g[1] = 0.0;
            },
        ),
        TestFunction::new(
            |y| y[1],
            |_, g| {
                g[0] = 0.0;
                g[1] = 1.0;
            },
        ),
    ]);
    ExampleDefinition {
        name: "nonlinear2d",
        fields,
        test_functions,
        true_theta: vec![0.5, 0.8],
        y0: vec![0.5, 0.5],
        method: TrajectoryMethod::Heun3,
    }
}

/// The three builtin estimation problems.
pub fn builtin_examples() -> Vec<ExampleDefinition> {
    vec![nonlinear_1d(), linear_2d(), nonlinear_2d()]
}

/// Looks up a builtin example by id.
pub fn builtin_example(id: &str) -> Result<ExampleDefinition> {
    match id {
        "nonlinear1d" => Ok(nonlinear_1d()),
        "linear2d" => Ok(linear_2d()),
        "nonlinear2d" => Ok(nonlinear_2d()),
        other => Err(Error::UnknownExample(other.to_string())),
    }
}

/// SplitMix64 finalizer: derives a well-mixed child seed from a master seed
/// and an index, so parallel work items get independent streams in any order.
pub fn derive_seed(master: u64, index: u64) -> u64 {
    let mut z = master.wrapping_add(index.wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Configuration of one experiment run.
#[derive(Clone, Debug)]
pub struct ExperimentConfig {
    /// Builtin example id, or a free-form label when used with
    /// [`run_experiment_with`].
    pub example: String,
    pub hurst: Vec<f64>,
    pub fine_level: u32,
    pub sub_levels: Vec<u32>,
    pub realizations: usize,
    pub master_seed: u64,
    pub horizon: f64,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.hurst.is_empty() {
            return Err(Error::Config("need at least one Hurst value".into()));
        }
        for &h in &self.hurst {
            if !h.is_finite() || h <= 0.0 || h >= 1.0 {
                return Err(Error::Config(format!("Hurst value {h} outside (0, 1)")));
            }
        }
        if self.realizations == 0 {
            return Err(Error::Config("need at least one realization".into()));
        }
        if self.fine_level == 0 || self.fine_level > SampledPath::MAX_LEVEL {
            return Err(Error::Config(format!(
                "fine level must lie in 1..={}, got {}",
                SampledPath::MAX_LEVEL,
                self.fine_level
            )));
        }
        if let Some(&max_level) = self.sub_levels.iter().max() {
            // The Hurst estimator reads level n + 1.
            if max_level + 1 > self.fine_level {
                return Err(Error::Config(format!(
                    "observation level {max_level} needs fine level >= {}, got {}",
                    max_level + 1,
                    self.fine_level
                )));
            }
        }
        if !self.horizon.is_finite() || self.horizon <= 0.0 {
            return Err(Error::Config(format!("horizon must be positive, got {}", self.horizon)));
        }
        Ok(())
    }
}

/// Error metric recorded per realization and observation level.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    Hurst,
    ThetaKnown,
    ThetaUnknown,
}

impl Metric {
    pub const ALL: [Metric; 3] = [Metric::Hurst, Metric::ThetaKnown, Metric::ThetaUnknown];

    pub fn as_str(self) -> &'static str {
        match self {
            Metric::Hurst => "hurst",
            Metric::ThetaKnown => "theta_known",
            Metric::ThetaUnknown => "theta_unknown",
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "hurst" => Ok(Metric::Hurst),
            "theta_known" => Ok(Metric::ThetaKnown),
            "theta_unknown" => Ok(Metric::ThetaUnknown),
            other => Err(Error::Parse(format!("unknown metric `{other}`"))),
        }
    }
}

/// One normalized-error sample: `log2` of the absolute normalized error plus
/// the sign of the underlying error (the plot convention for negative errors
/// keeps magnitude and sign separate).
#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq)]
pub struct MetricSample {
    pub realization: usize,
    pub log2_error: f64,
    pub negative: bool,
}

/// Five-number summary of a sample vector; whiskers are the extremes.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoxPlotStats {
    pub q25: f64,
    pub median: f64,
    pub q75: f64,
    pub whisker_low: f64,
    pub whisker_high: f64,
    pub count: usize,
}

impl BoxPlotStats {
    /// Percentiles use linear interpolation between order statistics
    /// (the type-7 convention). Returns `None` on an empty sample.
    pub fn from_samples(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let mut sorted = values.to_vec();
        sorted.sort_by(f64::total_cmp);
        Some(BoxPlotStats {
            q25: quantile_sorted(&sorted, 0.25),
            median: quantile_sorted(&sorted, 0.5),
            q75: quantile_sorted(&sorted, 0.75),
            whisker_low: sorted[0],
            whisker_high: sorted[sorted.len() - 1],
            count: sorted.len(),
        })
    }
}

fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let position = p * (sorted.len() - 1) as f64;
    let low = position.floor() as usize;
    let high = position.ceil() as usize;
    let fraction = position - low as f64;
    sorted[low] + (sorted[high] - sorted[low]) * fraction
}

/// Samples and statistics for one (Hurst, level, metric) cell.
#[derive(Clone, Debug)]
pub struct ReportCell {
    pub hurst: f64,
    pub level: u32,
    pub metric: Metric,
    pub samples: Vec<MetricSample>,
    pub failures: usize,
}

impl ReportCell {
    pub fn stats(&self) -> Option<BoxPlotStats> {
        let values: Vec<f64> = self.samples.iter().map(|s| s.log2_error).collect();
        BoxPlotStats::from_samples(&values)
    }
}

/// Output of [`run_experiment`]: one cell per (Hurst, level, metric).
#[derive(Clone, Debug)]
pub struct ExperimentReport {
    pub example: String,
    pub fine_level: u32,
    pub horizon: f64,
    pub realizations: usize,
    pub master_seed: u64,
    pub cells: Vec<ReportCell>,
}

impl ExperimentReport {
    pub fn cell(&self, hurst: f64, level: u32, metric: Metric) -> Option<&ReportCell> {
        self.cells
            .iter()
            .find(|c| c.hurst == hurst && c.level == level && c.metric == metric)
    }
}

/// Flat row mirroring the CSV schema
/// `example,H,n,metric,q25,median,q75,whisker_low,whisker_high,count`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StatsRow {
    pub example: String,
    #[serde(rename = "H")]
    pub hurst: f64,
    pub n: u32,
    pub metric: Metric,
    pub q25: Option<f64>,
    pub median: Option<f64>,
    pub q75: Option<f64>,
    pub whisker_low: Option<f64>,
    pub whisker_high: Option<f64>,
    pub count: usize,
}

/// Raw per-realization row, emitted alongside the statistics on request.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RawRow {
    pub example: String,
    #[serde(rename = "H")]
    pub hurst: f64,
    pub n: u32,
    pub metric: Metric,
    pub realization: usize,
    pub log2_error: f64,
    pub sign: i8,
}

type CellValue = Option<(f64, bool)>;

fn run_realization(
    cfg: &ExperimentConfig,
    example: &ExampleDefinition,
    hurst: f64,
    seed: u64,
) -> Vec<[CellValue; 3]> {
    let request = FbmSampleRequest {
        hurst: HurstIndex::new(hurst).expect("validated by config"),
        num_components: example.num_noise_components(),
        fine_level: cfg.fine_level,
        horizon: cfg.horizon,
        seed,
    };
    let empty = vec![[None, None, None]; cfg.sub_levels.len()];
    let Ok(driver) = sample_fbm(&request) else {
        return empty;
    };
    let Ok(trajectory) = example.trajectory(&driver) else {
        return empty;
    };

    let theta_norm = |theta: &[f64]| -> f64 {
        theta
            .iter()
            .zip(&example.true_theta)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    };

    cfg.sub_levels
        .iter()
        .map(|&level| {
            let delta_h = convergence_rate(hurst, level).powf(hurst);
            let normalized_log =
                |err: f64, scale: f64| -> CellValue {
                    let value = (err.abs() / scale).log2();
                    value.is_finite().then_some((value, err < 0.0))
                };

            let hurst_cell = estimate_hurst(&trajectory, level)
                .ok()
                .and_then(|est| normalized_log(hurst - est.value, hurst * delta_h));

            let observed = subsample(&trajectory, level).expect("level validated against fine level");
            let known_cell = estimate_theta_known_hurst(
                &observed,
                &example.fields,
                &example.test_functions,
                hurst,
            )
            .ok()
            .and_then(|est| normalized_log(theta_norm(&est.theta), delta_h));

            let unknown_cell = estimate_theta_unknown_hurst(
                &trajectory,
                &example.fields,
                &example.test_functions,
                level,
            )
            .ok()
            .and_then(|est| normalized_log(theta_norm(&est.theta), level as f64 * delta_h));

            [hurst_cell, known_cell, unknown_cell]
        })
        .collect()
}

/// Runs the experiment for a builtin example named in the configuration.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    let example = builtin_example(&cfg.example)?;
    run_experiment_with(cfg, &example)
}

/// Runs the experiment for an arbitrary example definition; the label in the
/// report comes from the configuration.
pub fn run_experiment_with(
    cfg: &ExperimentConfig,
    example: &ExampleDefinition,
) -> Result<ExperimentReport> {
    cfg.validate()?;
    let mut cells = Vec::with_capacity(cfg.hurst.len() * cfg.sub_levels.len() * 3);
    for (hurst_index, &hurst) in cfg.hurst.iter().enumerate() {
        let outcomes: Vec<Vec<[CellValue; 3]>> = (0..cfg.realizations)
            .into_par_iter()
            .map(|realization| {
                let seed = derive_seed(
                    cfg.master_seed,
                    ((hurst_index as u64) << 32) | realization as u64,
                );
                run_realization(cfg, example, hurst, seed)
            })
            .collect();
        for (level_index, &level) in cfg.sub_levels.iter().enumerate() {
            for (metric_index, metric) in Metric::ALL.into_iter().enumerate() {
                let mut samples = Vec::with_capacity(cfg.realizations);
                let mut failures = 0;
                for (realization, outcome) in outcomes.iter().enumerate() {
                    match outcome[level_index][metric_index] {
                        Some((log2_error, negative)) => {
                            samples.push(MetricSample { realization, log2_error, negative })
                        }
                        None => failures += 1,
                    }
                }
                cells.push(ReportCell { hurst, level, metric, samples, failures });
            }
        }
    }
    Ok(ExperimentReport {
        example: cfg.example.clone(),
        fine_level: cfg.fine_level,
        horizon: cfg.horizon,
        realizations: cfg.realizations,
        master_seed: cfg.master_seed,
        cells,
    })
}

/// Flattens a report into schema rows, preserving cell order.
pub fn stats_rows(report: &ExperimentReport) -> Vec<StatsRow> {
    report
        .cells
        .iter()
        .map(|cell| {
            let stats = cell.stats();
            StatsRow {
                example: report.example.clone(),
                hurst: cell.hurst,
                n: cell.level,
                metric: cell.metric,
                q25: stats.map(|s| s.q25),
                median: stats.map(|s| s.median),
                q75: stats.map(|s| s.q75),
                whisker_low: stats.map(|s| s.whisker_low),
                whisker_high: stats.map(|s| s.whisker_high),
                count: stats.map_or(0, |s| s.count),
            }
        })
        .collect()
}

pub fn raw_rows(report: &ExperimentReport) -> Vec<RawRow> {
    let mut rows = Vec::new();
    for cell in &report.cells {
        for sample in &cell.samples {
            rows.push(RawRow {
                example: report.example.clone(),
                hurst: cell.hurst,
                n: cell.level,
                metric: cell.metric,
                realization: sample.realization,
                log2_error: sample.log2_error,
                sign: if sample.negative { -1 } else { 1 },
            });
        }
    }
    rows
}

pub const CSV_HEADER: &str = "example,H,n,metric,q25,median,q75,whisker_low,whisker_high,count";
pub const RAW_CSV_HEADER: &str = "example,H,n,metric,realization,log2_error,sign";

fn format_opt(value: Option<f64>) -> String {
    value.map_or_else(|| "nan".to_string(), |v| v.to_string())
}

/// Renders statistics rows as CSV. Numbers use the shortest representation
/// that round-trips, so identical reports render byte-identically.
pub fn render_csv(rows: &[StatsRow]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for row in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{}\n",
            row.example,
            row.hurst,
            row.n,
            row.metric,
            format_opt(row.q25),
            format_opt(row.median),
            format_opt(row.q75),
            format_opt(row.whisker_low),
            format_opt(row.whisker_high),
            row.count
        ));
    }
    out
}

pub fn render_raw_csv(rows: &[RawRow]) -> String {
    let mut out = String::from(RAW_CSV_HEADER);
    out.push('\n');
    for row in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            row.example, row.hurst, row.n, row.metric, row.realization, row.log2_error, row.sign
        ));
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ReportFormat {
    Csv,
    Json,
}

fn sibling_raw_path(path: &Path) -> PathBuf {
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("report");
    let extension = path.extension().and_then(|s| s.to_str()).unwrap_or("csv");
    path.with_file_name(format!("{stem}.raw.{extension}"))
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|source| Error::Io { path: path.to_path_buf(), source })
}

/// Writes the statistics to `path` in the requested format; with `raw` also
/// writes the per-realization samples to a `.raw` sibling file.
pub fn emit_report(
    report: &ExperimentReport,
    path: &Path,
    format: ReportFormat,
    raw: bool,
) -> Result<()> {
    let rows = stats_rows(report);
    match format {
        ReportFormat::Csv => write_file(path, &render_csv(&rows))?,
        ReportFormat::Json => {
            let body = serde_json::to_string_pretty(&rows)
                .map_err(|e| Error::Parse(format!("serializing report: {e}")))?;
            write_file(path, &(body + "\n"))?;
        }
    }
    if raw {
        let raw_path = sibling_raw_path(path);
        let samples = raw_rows(report);
        match format {
            ReportFormat::Csv => write_file(&raw_path, &render_raw_csv(&samples))?,
            ReportFormat::Json => {
                let body = serde_json::to_string_pretty(&samples)
                    .map_err(|e| Error::Parse(format!("serializing raw samples: {e}")))?;
                write_file(&raw_path, &(body + "\n"))?;
            }
        }
    }
    Ok(())
}
