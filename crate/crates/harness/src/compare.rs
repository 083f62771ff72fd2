//! Side-by-side comparison of report directories over one problem.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::error::{HarnessError, Result};
use crate::report::AggregateReport;

#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    /// One label per report: engine name and directory name.
    pub labels: Vec<String>,
    /// `(task_id, metric, value per report)`.
    pub rows: Vec<(usize, String, Vec<Option<f64>>)>,
}

pub fn compare(dirs: &[PathBuf]) -> Result<Comparison> {
    if dirs.len() < 2 {
        return Err(HarnessError::Compare("compare needs at least two report directories".into()));
    }
    let reports = dirs.iter().map(|d| AggregateReport::load(d)).collect::<Result<Vec<_>>>()?;
    let problem = |r: &AggregateReport| r.config.problem.resolve().unwrap_or_else(|_| r.config.problem.clone());
    let reference = problem(&reports[0]);
    for (dir, report) in dirs.iter().zip(&reports).skip(1) {
        if problem(report) != reference {
            return Err(HarnessError::Compare(format!(
                "{} was run on a different problem than {}",
                dir.display(),
                dirs[0].display()
            )));
        }
    }
    let labels = dirs
        .iter()
        .zip(&reports)
        .map(|(d, r)| format!("{}@{}", r.engine, d.file_name().map_or_else(|| d.display().to_string(), |n| n.to_string_lossy().into_owned())))
        .collect();

    let has = |pick: &dyn Fn(&AggregateReport) -> bool| reports.iter().any(pick);
    let with_success = has(&|r| r.tasks.iter().any(|t| t.success_rate.is_some()));
    let with_target = has(&|r| r.tasks.iter().any(|t| t.target.is_some()));
    let n_tasks = reports.iter().map(|r| r.tasks.len()).max().unwrap_or(0);
    let mut rows = Vec::new();
    for task in 0..n_tasks {
        let column = |f: &dyn Fn(&crate::report::TaskAggregate) -> Option<f64>| -> Vec<Option<f64>> {
            reports.iter().map(|r| r.tasks.get(task).and_then(f)).collect()
        };
        rows.push((task, "n_runs".into(), column(&|t| Some(t.n_runs as f64))));
        if with_success {
            rows.push((task, "success_rate".into(), column(&|t| t.success_rate)));
        }
        rows.push((task, "mean_best_fitness".into(), column(&|t| Some(t.mean_best_fitness))));
        rows.push((task, "median_best_fitness".into(), column(&|t| Some(t.median_best_fitness))));
        if with_target {
            rows.push((task, "median_evaluations_to_target".into(), column(&|t| t.median_evaluations_to_target)));
        }
    }
    Ok(Comparison { labels, rows })
}

fn cell(v: Option<f64>) -> String {
    v.map_or_else(|| "-".into(), |x| format!("{x}"))
}

impl Comparison {
    pub fn metrics(&self) -> Vec<&str> {
        let mut seen: Vec<&str> = Vec::new();
        for (_, m, _) in &self.rows {
            if !seen.contains(&m.as_str()) {
                seen.push(m);
            }
        }
        seen
    }

    /// Aligned plain-text table.
    pub fn to_table(&self) -> String {
        let mut header = vec!["task_id".to_string(), "metric".to_string()];
        header.extend(self.labels.iter().cloned());
        let mut lines = vec![header];
        for (task, metric, values) in &self.rows {
            let mut line = vec![task.to_string(), metric.clone()];
            line.extend(values.iter().map(|v| cell(*v)));
            lines.push(line);
        }
        let widths: Vec<usize> =
            (0..lines[0].len()).map(|c| lines.iter().map(|l| l[c].len()).max().unwrap_or(0)).collect();
        let mut out = String::new();
        for line in lines {
            let padded: Vec<String> = line.iter().zip(&widths).map(|(s, w)| format!("{s:<w$}")).collect();
            let _ = writeln!(out, "{}", padded.join("  ").trim_end());
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path).map_err(HarnessError::csv(path))?;
        let mut header = vec!["task_id".to_string(), "metric".to_string()];
        header.extend(self.labels.iter().cloned());
        w.write_record(&header).map_err(HarnessError::csv(path))?;
        for (task, metric, values) in &self.rows {
            let mut record = vec![task.to_string(), metric.clone()];
            record.extend(values.iter().map(|v| v.map(|x| x.to_string()).unwrap_or_default()));
            w.write_record(&record).map_err(HarnessError::csv(path))?;
        }
        w.flush().map_err(HarnessError::io(path))
    }
}
