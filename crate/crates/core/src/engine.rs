//! Engine descriptor: one entry point for the baseline and the three
//! multitask engines.

use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::problem::MultitaskProblem;
use crate::rng::task_rng;
use crate::search::{run_cea_with_rng, EvolverConfig, RunResult};
use crate::transfer::{
    map_unified, run_adaptive_emt_warm, run_explicit_emt_injected, run_mfea_injected, AdaptiveOptions,
    ExplicitOptions, MultitaskRunResult,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum EngineSpec {
    /// Independent single-task CEA per task; task `i` uses stream `i` of the seed.
    Cea {},
    Mfea { rmp: f64 },
    Adaptive(AdaptiveOptions),
    Explicit(ExplicitOptions),
}

impl EngineSpec {
    pub fn label(&self) -> String {
        match self {
            EngineSpec::Cea {} => "cea".into(),
            EngineSpec::Mfea { .. } => "mfea".into(),
            EngineSpec::Adaptive(_) => "adaptive".into(),
            EngineSpec::Explicit(_) => "explicit".into(),
        }
    }

    pub fn run(&self, problem: &MultitaskProblem, config: &EvolverConfig) -> Result<MultitaskRunResult> {
        self.run_injected(problem, config, &[])
    }

    /// Runs with `injected` unified genomes placed in the initial
    /// population of every task (MFEA: the first members overall).
    pub fn run_injected(
        &self,
        problem: &MultitaskProblem,
        config: &EvolverConfig,
        injected: &[Vec<f64>],
    ) -> Result<MultitaskRunResult> {
        match self {
            EngineSpec::Cea {} => run_independent_cea(problem, config, injected),
            EngineSpec::Mfea { rmp } => run_mfea_injected(problem, config, *rmp, injected),
            EngineSpec::Adaptive(options) => {
                let warm: Vec<Vec<Vec<f64>>> = (0..problem.num_tasks()).map(|_| injected.to_vec()).collect();
                run_adaptive_emt_warm(problem, config, options, &warm)
            }
            EngineSpec::Explicit(options) => run_explicit_emt_injected(problem, config, options, injected),
        }
    }
}

fn run_independent_cea(
    problem: &MultitaskProblem,
    config: &EvolverConfig,
    injected: &[Vec<f64>],
) -> Result<MultitaskRunResult> {
    let mut run = RunResult {
        traces: Vec::new(),
        best_solutions: Vec::new(),
        best_fitness: Vec::new(),
        evaluations: Vec::new(),
        seed: config.seed,
    };
    for (i, task) in problem.tasks().iter().enumerate() {
        let seeds: Vec<Vec<f64>> = injected.iter().map(|g| map_unified(g, task.dim())).collect();
        let r = run_cea_with_rng(task, config, task_rng(config.seed, i as u64), &seeds)?;
        run.traces.extend(r.traces);
        run.best_solutions.extend(r.best_solutions);
        run.best_fitness.extend(r.best_fitness);
        run.evaluations.extend(r.evaluations);
    }
    Ok(MultitaskRunResult::from_run(run))
}

/// Whether each task's best fitness reached its success threshold. Tasks
/// without a threshold report `false`.
pub fn task_successes(problem: &MultitaskProblem, result: &RunResult) -> Vec<bool> {
    problem
        .tasks()
        .iter()
        .zip(&result.best_fitness)
        .map(|(t, f)| t.success_threshold().is_some_and(|s| *f >= s))
        .collect()
}

/// Percentage of `n_runs` seeded runs (seeds `config.seed + r`) in which each
/// task succeeded.
pub fn success_rate(
    engine: &EngineSpec,
    problem: &MultitaskProblem,
    n_runs: usize,
    config: &EvolverConfig,
) -> Result<Vec<f64>> {
    success_rate_injected(engine, problem, n_runs, config, &[])
}

pub fn success_rate_injected(
    engine: &EngineSpec,
    problem: &MultitaskProblem,
    n_runs: usize,
    config: &EvolverConfig,
    injected: &[Vec<f64>],
) -> Result<Vec<f64>> {
    if n_runs == 0 {
        return Err(crate::Error::InvalidConfig("n_runs must be at least 1".into()));
    }
    let mut wins = alloc::vec![0usize; problem.num_tasks()];
    for r in 0..n_runs {
        let mut c = config.clone();
        c.seed = config.seed.wrapping_add(r as u64);
        let result = engine.run_injected(problem, &c, injected)?;
        for (w, ok) in wins.iter_mut().zip(task_successes(problem, &result.run)) {
            *w += usize::from(ok);
        }
    }
    Ok(wins.into_iter().map(|w| 100.0 * w as f64 / n_runs as f64).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn engine_spec_json() {
        let e: EngineSpec = serde_json::from_str(r#"{"kind":"mfea","rmp":0.3}"#).unwrap();
        assert_eq!(e, EngineSpec::Mfea { rmp: 0.3 });
        let e: EngineSpec = serde_json::from_str(r#"{"kind":"adaptive"}"#).unwrap();
        assert_eq!(e, EngineSpec::Adaptive(AdaptiveOptions::default()));
        let e: EngineSpec = serde_json::from_str(r#"{"kind":"explicit","transfer_interval":5,"n_migrants":2}"#).unwrap();
        assert_eq!(e.label(), "explicit");
        assert!(serde_json::from_str::<EngineSpec>(r#"{"kind":"mfea","rmp":0.3,"extra":1}"#).is_err());
        assert!(serde_json::from_str::<EngineSpec>(r#"{"kind":"adaptive","mixture":0.2}"#).is_err());
        assert!(serde_json::from_str::<EngineSpec>(r#"{"kind":"cea","x":1}"#).is_err());
    }
}
