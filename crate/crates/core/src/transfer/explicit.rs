//! Island-model transfer: one CEA per task in its own space, with periodic
//! best-out / replace-worst migration between every ordered task pair.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::MultitaskRunResult;
use crate::error::{Error, Result};
use crate::problem::{MultitaskProblem, PADDING};
use crate::rng::task_rng;
use crate::search::{task_evaluator, EvolverConfig, RunResult, SingleTaskRun};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExplicitOptions {
    /// Generations between migration events.
    pub transfer_interval: usize,
    /// Migrants each task sends to every other task per event.
    pub n_migrants: usize,
}

/// One migrant placed into a destination task.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MigrationEvent {
    pub generation: usize,
    pub source_task: usize,
    pub dest_task: usize,
    /// 0-based rank of the migrant in its source population.
    pub migrant_rank: usize,
    /// Fitness of the destination member the migrant replaced.
    pub fitness_before: f64,
    /// Fitness of the migrant on the destination task.
    pub fitness_after: f64,
}

/// Normalized coordinates of one task expressed in another task's
/// normalized space: shared coordinates are kept, extra ones sit at the
/// midpoint and surplus ones are dropped.
pub fn map_unified(genome: &[f64], dest_dim: usize) -> Vec<f64> {
    let mut out: Vec<f64> = genome.iter().copied().take(dest_dim).collect();
    out.resize(dest_dim, PADDING);
    out
}

pub fn run_explicit_emt(
    problem: &MultitaskProblem,
    config: &EvolverConfig,
    options: &ExplicitOptions,
) -> Result<MultitaskRunResult> {
    run_explicit_emt_injected(problem, config, options, &[])
}

/// Island engine. Task `i` evolves with generator stream `i` of
/// `config.seed`, so without migration each island replays an independent
/// CEA run exactly. `injected` unified genomes seed every island.
pub fn run_explicit_emt_injected(
    problem: &MultitaskProblem,
    config: &EvolverConfig,
    options: &ExplicitOptions,
    injected: &[Vec<f64>],
) -> Result<MultitaskRunResult> {
    config.validate()?;
    let k = problem.num_tasks();
    if k < 2 {
        return Err(Error::InvalidConfig("explicit transfer needs at least two tasks".into()));
    }
    if options.transfer_interval == 0 {
        return Err(Error::InvalidConfig("transfer_interval must be at least 1".into()));
    }
    if options.n_migrants == 0 || (k - 1) * options.n_migrants >= config.pop_size {
        return Err(Error::InvalidConfig(
            "n_migrants must be positive and (K - 1) * n_migrants smaller than pop_size".into(),
        ));
    }

    let mut islands = Vec::with_capacity(k);
    for (i, task) in problem.tasks().iter().enumerate() {
        let seeds: Vec<Vec<f64>> = injected.iter().map(|g| map_unified(g, task.dim())).collect();
        let mut eval = task_evaluator(task);
        islands.push(SingleTaskRun::start(task.dim(), config, task_rng(config.seed, i as u64), &seeds, &mut eval)?);
    }

    let mut log = Vec::new();
    loop {
        let generation = islands[0].generation();
        let all_reached = config.target.is_some() && islands.iter().all(SingleTaskRun::reached_target);
        let over_budget = config
            .max_evaluations
            .is_some_and(|b| islands.iter().all(|run| run.evaluations() >= b));
        if generation >= config.generations || all_reached || over_budget {
            break;
        }
        for (task, run) in problem.tasks().iter().zip(islands.iter_mut()) {
            run.step(&mut task_evaluator(task))?;
        }
        let generation = generation + 1;
        if generation % options.transfer_interval == 0 {
            migrate(problem, &mut islands, options.n_migrants, generation, &mut log)?;
        }
    }

    let mut run = RunResult {
        traces: Vec::with_capacity(k),
        best_solutions: Vec::with_capacity(k),
        best_fitness: Vec::with_capacity(k),
        evaluations: Vec::with_capacity(k),
        seed: config.seed,
    };
    let mut populations = Vec::with_capacity(k);
    for island in islands {
        populations.push(island.population().clone());
        let r = island.into_result(config.seed);
        run.traces.extend(r.traces);
        run.best_solutions.extend(r.best_solutions);
        run.best_fitness.extend(r.best_fitness);
        run.evaluations.extend(r.evaluations);
    }
    let mut result = MultitaskRunResult::from_run(run);
    result.migration_log = log;
    result.final_populations = populations;
    Ok(result)
}

fn migrate(
    problem: &MultitaskProblem,
    islands: &mut [SingleTaskRun],
    n_migrants: usize,
    generation: usize,
    log: &mut Vec<MigrationEvent>,
) -> Result<()> {
    let outgoing: Vec<Vec<(Vec<f64>, f64)>> = islands.iter().map(|run| run.top(n_migrants)).collect();
    for (dest, task) in problem.tasks().iter().enumerate() {
        let mut origin = Vec::new();
        let mut incoming = Vec::new();
        for (source, migrants) in outgoing.iter().enumerate().filter(|(s, _)| *s != dest) {
            for (rank, (genome, _)) in migrants.iter().enumerate() {
                let mapped = map_unified(genome, task.dim());
                let fitness = task.evaluate(&mapped)?;
                origin.push((source, rank, fitness));
                incoming.push((mapped, fitness));
            }
        }
        let replaced = islands[dest].replace_worst(incoming);
        for ((source, rank, fitness_after), fitness_before) in origin.into_iter().zip(replaced) {
            log.push(MigrationEvent {
                generation,
                source_task: source,
                dest_task: dest,
                migrant_rank: rank,
                fitness_before,
                fitness_after,
            });
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::benchmark::{make_benchmark, BaseFunction, BenchmarkSpec};
    use alloc::vec;

    #[test]
    fn mapping_pads_and_truncates() {
        assert_eq!(map_unified(&[0.1], 3), vec![0.1, 0.5, 0.5]);
        assert_eq!(map_unified(&[0.1, 0.2, 0.3], 2), vec![0.1, 0.2]);
    }

    #[test]
    fn migrations_per_event_and_sizes() {
        let p = make_benchmark(&BenchmarkSpec::new(BaseFunction::Sphere, vec![2, 3], 0.5, 0)).unwrap();
        let config = EvolverConfig::new(10, 20).with_seed(4);
        let r = run_explicit_emt(&p, &config, &ExplicitOptions { transfer_interval: 5, n_migrants: 1 }).unwrap();
        assert_eq!(r.migration_log.len(), 4 * 2);
        assert!(r.final_populations.iter().all(|pop| pop.len() == 10));
        assert_eq!(r.run.evaluations, vec![10 + 20 * 9 + 4; 2]);
        assert_eq!(p.evaluation_counts(), r.run.evaluations);
    }

    #[test]
    fn rejects_bad_options() {
        let p = make_benchmark(&BenchmarkSpec::new(BaseFunction::Sphere, vec![2, 2], 0.5, 0)).unwrap();
        let config = EvolverConfig::new(10, 5);
        assert!(run_explicit_emt(&p, &config, &ExplicitOptions { transfer_interval: 0, n_migrants: 1 }).is_err());
        assert!(run_explicit_emt(&p, &config, &ExplicitOptions { transfer_interval: 2, n_migrants: 10 }).is_err());
        let single = make_benchmark(&BenchmarkSpec::new(BaseFunction::Sphere, vec![2], 0.5, 0)).unwrap();
        assert!(run_explicit_emt(&single, &config, &ExplicitOptions { transfer_interval: 2, n_migrants: 1 }).is_err());
    }
}
