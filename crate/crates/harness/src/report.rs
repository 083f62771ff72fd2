//! Running an experiment and writing its per-run files, aggregate JSON and
//! summary table.
//!
//! Layout of an output directory:
//!
//! ```text
//! aggregate.json      config echo, seeds, per-task statistics
//! summary.csv         engine,task_id,metric,value,n_runs,stderr
//! run-000/trace.csv   generation,task_id,best_fitness,evaluations
//! run-000/result.json full run result
//! run-000/transfer.csv    generation,i,j,w_ij        (adaptive engine)
//! run-000/migrations.csv  one row per migrant        (explicit engine)
//! run-000/episode-task0.csv  step,state...,force      (pole balancing, opt-in)
//! ```
//!
//! All statistics are computed from the same trace rows that are written
//! to `trace.csv`, so [`recompute_tasks`] reproduces them exactly.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use emt_core::multix::{solve_bilevel, BilevelConfig, BilevelResult};
use emt_core::polecart::{simulate_episode_traced, ControllerNetwork, PoleCartParams};
use emt_core::search::TaskTrace;
use emt_core::transfer::MultitaskRunResult;
use emt_core::{EngineSpec, MultitaskProblem};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{ExperimentConfig, Problem};
use crate::error::{HarnessError, Result};

pub const AGGREGATE_FILE: &str = "aggregate.json";
pub const SUMMARY_FILE: &str = "summary.csv";
pub const TRACE_FILE: &str = "trace.csv";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub generation: usize,
    pub task_id: usize,
    pub best_fitness: f64,
    pub evaluations: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct TransferRow {
    generation: usize,
    i: usize,
    j: usize,
    w_ij: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct EpisodeRow {
    step: usize,
    x: f64,
    x_dot: f64,
    theta1: f64,
    theta1_dot: f64,
    theta2: f64,
    theta2_dot: f64,
    force: f64,
}

/// Frozen summary CSV schema.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub engine: String,
    pub task_id: usize,
    pub metric: String,
    pub value: f64,
    pub n_runs: usize,
    pub stderr: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskAggregate {
    pub task_id: usize,
    pub name: String,
    pub n_runs: usize,
    pub mean_best_fitness: f64,
    pub stderr_best_fitness: f64,
    pub median_best_fitness: f64,
    pub mean_evaluations: f64,
    pub success_threshold: Option<f64>,
    pub successes: Option<usize>,
    /// Percentage of runs whose best fitness reached the success threshold.
    pub success_rate: Option<f64>,
    pub stderr_success_rate: Option<f64>,
    pub target: Option<f64>,
    pub target_hits: Option<usize>,
    /// Median over the runs that reached the target.
    pub median_evaluations_to_target: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BilevelAggregate {
    pub mean_f_u: f64,
    pub median_f_u: f64,
    pub mean_upper_evaluations: f64,
    pub mean_lower_evaluations: f64,
    pub flagged_candidates: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateReport {
    pub tool: String,
    /// Seconds since the Unix epoch; the only field that differs between
    /// reruns of one config.
    pub created_unix: u64,
    pub config: ExperimentConfig,
    pub engine: String,
    pub seeds: Vec<u64>,
    pub run_dirs: Vec<String>,
    pub tasks: Vec<TaskAggregate>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bilevel: Option<BilevelAggregate>,
}

impl AggregateReport {
    pub fn load(dir: &Path) -> Result<Self> {
        let path = dir.join(AGGREGATE_FILE);
        let text = fs::read_to_string(&path).map_err(HarnessError::io(&path))?;
        serde_json::from_str(&text).map_err(HarnessError::json(&path))
    }

    pub fn summary_rows(&self) -> Vec<SummaryRow> {
        let mut rows = Vec::new();
        for t in &self.tasks {
            let mut push = |metric: &str, value: f64, stderr: Option<f64>| {
                rows.push(SummaryRow {
                    engine: self.engine.clone(),
                    task_id: t.task_id,
                    metric: metric.into(),
                    value,
                    n_runs: t.n_runs,
                    stderr,
                })
            };
            push("mean_best_fitness", t.mean_best_fitness, Some(t.stderr_best_fitness));
            push("median_best_fitness", t.median_best_fitness, None);
            push("mean_evaluations", t.mean_evaluations, None);
            if let Some(rate) = t.success_rate {
                push("success_rate", rate, t.stderr_success_rate);
            }
            if let Some(median) = t.median_evaluations_to_target {
                push("median_evaluations_to_target", median, None);
            }
        }
        rows
    }
}

/// Per-run, per-task quantities every statistic is computed from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TaskOutcome {
    pub best_fitness: f64,
    pub evaluations: u64,
    pub evaluations_to_target: Option<u64>,
}

fn outcomes(rows: &[TraceRow], n_tasks: usize, target: Option<f64>) -> Vec<TaskOutcome> {
    (0..n_tasks)
        .map(|task| {
            let mine: Vec<&TraceRow> = rows.iter().filter(|r| r.task_id == task).collect();
            let last = mine.last().expect("every task has a trace row");
            let evaluations_to_target =
                target.and_then(|t| mine.iter().find(|r| r.best_fitness >= t).map(|r| r.evaluations));
            TaskOutcome { best_fitness: last.best_fitness, evaluations: last.evaluations, evaluations_to_target }
        })
        .collect()
}

pub fn trace_rows(traces: &[TaskTrace]) -> Vec<TraceRow> {
    let mut rows = Vec::new();
    for (task_id, trace) in traces.iter().enumerate() {
        for (generation, (best, evals)) in trace.best_fitness.iter().zip(&trace.evaluations).enumerate() {
            rows.push(TraceRow { generation, task_id, best_fitness: *best, evaluations: *evals });
        }
    }
    rows
}

pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    Some(if v.len() % 2 == 1 { v[m] } else { 0.5 * (v[m - 1] + v[m]) })
}

fn mean_and_stderr(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Statistics over runs (outer index) for each task.
pub fn aggregate_tasks(
    names: &[String],
    thresholds: &[Option<f64>],
    target: Option<f64>,
    runs: &[Vec<TaskOutcome>],
) -> Vec<TaskAggregate> {
    let n = runs.len();
    (0..names.len())
        .map(|task| {
            let best: Vec<f64> = runs.iter().map(|r| r[task].best_fitness).collect();
            let (mean_best, stderr_best) = mean_and_stderr(&best);
            let evals: Vec<f64> = runs.iter().map(|r| r[task].evaluations as f64).collect();
            let successes = thresholds[task].map(|s| best.iter().filter(|&&b| b >= s).count());
            let rate = successes.map(|k| k as f64 / n as f64);
            let hits: Vec<f64> = runs.iter().filter_map(|r| r[task].evaluations_to_target.map(|e| e as f64)).collect();
            TaskAggregate {
                task_id: task,
                name: names[task].clone(),
                n_runs: n,
                mean_best_fitness: mean_best,
                stderr_best_fitness: stderr_best,
                median_best_fitness: median(&best).unwrap_or(f64::NAN),
                mean_evaluations: mean_and_stderr(&evals).0,
                success_threshold: thresholds[task],
                successes,
                success_rate: rate.map(|p| 100.0 * p),
                stderr_success_rate: rate.map(|p| 100.0 * (p * (1.0 - p) / n as f64).sqrt()),
                target,
                target_hits: target.map(|_| hits.len()),
                median_evaluations_to_target: median(&hits),
            }
        })
        .collect()
}

fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(HarnessError::csv(path))?;
    for row in rows {
        w.serialize(row).map_err(HarnessError::csv(path))?;
    }
    w.flush().map_err(HarnessError::io(path))
}

fn read_csv<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>> {
    let mut r = csv::Reader::from_path(path).map_err(HarnessError::csv(path))?;
    r.deserialize().collect::<std::result::Result<_, _>>().map_err(HarnessError::csv(path))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(HarnessError::json(path))?;
    text.push('\n');
    fs::write(path, text).map_err(HarnessError::io(path))
}

pub fn run_dir_name(run: usize) -> String {
    format!("run-{run:03}")
}

struct RunOutput {
    rows: Vec<TraceRow>,
    bilevel: Option<BilevelResult>,
}

fn run_one(config: &ExperimentConfig, run: usize, out: &Path) -> Result<RunOutput> {
    let dir = out.join(run_dir_name(run));
    fs::create_dir_all(&dir).map_err(HarnessError::io(&dir))?;
    let mut evolver = config.evolver.clone();
    evolver.seed = config.seed(run);
    let problem = config
        .problem
        .build()
        .map_err(|message| HarnessError::Config { path: dir.clone(), message })?;
    let failed = |source| HarnessError::Run { run, source };
    match problem {
        Problem::Multitask { problem, polecart } => {
            let result = config.engine.run(&problem, &evolver).map_err(failed)?;
            let rows = trace_rows(&result.run.traces);
            write_csv(&dir.join(TRACE_FILE), &rows)?;
            write_json(&dir.join("result.json"), &result)?;
            write_engine_logs(&dir, &result)?;
            if let (true, Some((lengths, base))) = (config.dump_episodes, polecart) {
                write_episodes(&dir, &problem, &result, &lengths, &base).map_err(|e| match e {
                    EpisodeError::Core(source) => failed(source),
                    EpisodeError::Harness(h) => h,
                })?;
            }
            Ok(RunOutput { rows, bilevel: None })
        }
        Problem::Bilevel { problem, lower } => {
            let EngineSpec::Adaptive(options) = &config.engine else {
                unreachable!("validated config");
            };
            let bilevel_config = BilevelConfig { upper: evolver, lower, lower_options: options.clone() };
            let result = solve_bilevel(&problem, &bilevel_config).map_err(failed)?;
            let mut spent = 0;
            let rows: Vec<TraceRow> = result
                .upper_trace
                .iter()
                .zip(&result.lower_batch_sizes)
                .enumerate()
                .map(|(generation, (f_u, batch))| {
                    spent += *batch as u64;
                    TraceRow { generation, task_id: 0, best_fitness: -f_u, evaluations: spent }
                })
                .collect();
            write_csv(&dir.join(TRACE_FILE), &rows)?;
            write_json(&dir.join("result.json"), &result)?;
            Ok(RunOutput { rows, bilevel: Some(result) })
        }
    }
}

fn write_engine_logs(dir: &Path, result: &MultitaskRunResult) -> Result<()> {
    if !result.transfer_trace.is_empty() {
        let mut rows = Vec::new();
        for (generation, w) in result.transfer_trace.iter().enumerate() {
            for i in 0..w.num_tasks() {
                for j in 0..w.num_tasks() {
                    rows.push(TransferRow { generation, i, j, w_ij: w.get(i, j) });
                }
            }
        }
        write_csv(&dir.join("transfer.csv"), &rows)?;
    }
    if !result.migration_log.is_empty() {
        write_csv(&dir.join("migrations.csv"), &result.migration_log)?;
    }
    Ok(())
}

enum EpisodeError {
    Core(emt_core::Error),
    Harness(HarnessError),
}

fn write_episodes(
    dir: &Path,
    problem: &MultitaskProblem,
    result: &MultitaskRunResult,
    lengths: &[f64],
    base: &PoleCartParams,
) -> std::result::Result<(), EpisodeError> {
    for (task, (genome, &length)) in result.run.best_solutions.iter().zip(lengths).enumerate() {
        let weights = problem.task(task).decode(genome).map_err(EpisodeError::Core)?;
        let network = ControllerNetwork::from_params(&weights).map_err(EpisodeError::Core)?;
        let params = PoleCartParams { short_pole_length: length, ..base.clone() };
        let (_, steps) = simulate_episode_traced(&network, &params, &params.initial_state());
        let rows: Vec<EpisodeRow> = steps
            .iter()
            .map(|s| EpisodeRow {
                step: s.step,
                x: s.state.x,
                x_dot: s.state.x_dot,
                theta1: s.state.theta1,
                theta1_dot: s.state.theta1_dot,
                theta2: s.state.theta2,
                theta2_dot: s.state.theta2_dot,
                force: s.force,
            })
            .collect();
        write_csv(&dir.join(format!("episode-task{task}.csv")), &rows).map_err(EpisodeError::Harness)?;
    }
    Ok(())
}

fn task_metadata(config: &ExperimentConfig) -> Result<(Vec<String>, Vec<Option<f64>>)> {
    let problem = config.problem.build().map_err(|message| HarnessError::Config { path: PathBuf::new(), message })?;
    Ok(match problem {
        Problem::Multitask { problem, .. } => (
            problem.tasks().iter().map(|t| t.name().to_string()).collect(),
            problem.tasks().iter().map(|t| t.success_threshold()).collect(),
        ),
        Problem::Bilevel { .. } => (vec!["upper".into()], vec![None]),
    })
}

/// Runs every seed of `config` (in parallel on `jobs` workers, all cores
/// when `None`) and writes the report under `out`.
pub fn run_experiment(config: &ExperimentConfig, out: &Path, jobs: Option<usize>) -> Result<AggregateReport> {
    fs::create_dir_all(out).map_err(HarnessError::io(out))?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.unwrap_or(0))
        .build()
        .map_err(|e| HarnessError::Compare(format!("thread pool: {e}")))?;
    let outputs: Vec<Result<RunOutput>> = pool.install(|| {
        (0..config.n_runs)
            .into_par_iter()
            .map(|r| {
                log::info!("run {r} (seed {})", config.seed(r));
                run_one(config, r, out)
            })
            .collect()
    });
    let outputs = outputs.into_iter().collect::<Result<Vec<_>>>()?;

    let (names, thresholds) = task_metadata(config)?;
    let runs: Vec<Vec<TaskOutcome>> =
        outputs.iter().map(|o| outcomes(&o.rows, names.len(), config.evolver.target)).collect();
    let bilevel = bilevel_aggregate(&outputs);
    let report = AggregateReport {
        tool: format!("emt-harness {}", env!("CARGO_PKG_VERSION")),
        created_unix: SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs()),
        config: config.clone(),
        engine: engine_label(config),
        seeds: (0..config.n_runs).map(|r| config.seed(r)).collect(),
        run_dirs: (0..config.n_runs).map(run_dir_name).collect(),
        tasks: aggregate_tasks(&names, &thresholds, config.evolver.target, &runs),
        bilevel,
    };
    write_json(&out.join(AGGREGATE_FILE), &report)?;
    write_csv(&out.join(SUMMARY_FILE), &report.summary_rows())?;
    Ok(report)
}

fn engine_label(config: &ExperimentConfig) -> String {
    match config.problem.build() {
        Ok(Problem::Bilevel { .. }) => format!("bilevel-{}", config.engine.label()),
        _ => config.engine.label(),
    }
}

fn bilevel_aggregate(outputs: &[RunOutput]) -> Option<BilevelAggregate> {
    let results: Vec<&BilevelResult> = outputs.iter().filter_map(|o| o.bilevel.as_ref()).collect();
    if results.is_empty() {
        return None;
    }
    let n = results.len() as f64;
    let f_u: Vec<f64> = results.iter().map(|r| r.f_u_best).collect();
    Some(BilevelAggregate {
        mean_f_u: f_u.iter().sum::<f64>() / n,
        median_f_u: median(&f_u).unwrap_or(f64::NAN),
        mean_upper_evaluations: results.iter().map(|r| r.upper_level_evaluations as f64).sum::<f64>() / n,
        mean_lower_evaluations: results.iter().map(|r| r.lower_level_evaluations as f64).sum::<f64>() / n,
        flagged_candidates: results.iter().map(|r| r.flagged_candidates).sum(),
    })
}

/// Recomputes the per-task statistics of a report directory from its
/// per-run trace files.
pub fn recompute_tasks(dir: &Path) -> Result<Vec<TaskAggregate>> {
    let report = AggregateReport::load(dir)?;
    let names: Vec<String> = report.tasks.iter().map(|t| t.name.clone()).collect();
    let thresholds: Vec<Option<f64>> = report.tasks.iter().map(|t| t.success_threshold).collect();
    let mut runs = Vec::with_capacity(report.run_dirs.len());
    for run_dir in &report.run_dirs {
        let rows: Vec<TraceRow> = read_csv(&dir.join(run_dir).join(TRACE_FILE))?;
        runs.push(outcomes(&rows, names.len(), report.config.evolver.target));
    }
    Ok(aggregate_tasks(&names, &thresholds, report.config.evolver.target, &runs))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn medians() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), Some(2.0));
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), Some(2.5));
        assert_eq!(median(&[]), None);
    }

    #[test]
    fn success_statistics() {
        let run = |b: f64| vec![TaskOutcome { best_fitness: b, evaluations: 10, evaluations_to_target: None }];
        let runs = vec![run(5.0), run(1.0), run(5.0), run(2.0)];
        let agg = aggregate_tasks(&["t".into()], &[Some(5.0)], None, &runs);
        assert_eq!(agg[0].successes, Some(2));
        assert_eq!(agg[0].success_rate, Some(50.0));
        assert!((agg[0].stderr_success_rate.unwrap() - 25.0).abs() < 1e-12);
        assert_eq!(agg[0].target_hits, None);
    }
}
