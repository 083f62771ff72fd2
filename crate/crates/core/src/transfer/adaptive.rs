//! Adaptive mixture-model transfer.
//!
//! Each task keeps its own subpopulation in the unified space. Every
//! generation the engine fits a diagonal Gaussian to each task's elites,
//! samples part of task `i`'s offspring from the mixture
//! `sum_j w_ij p_j` (source `j` with probability `w_ij`, then a draw from
//! `p_j`), produces the rest by within-task SBX and mutation, and finally
//! moves the weights by one EM step towards the mixture that best explains
//! the new elites of task `i`. Unhelpful sources thereby lose weight.

use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;
use serde::{Deserialize, Serialize};

use super::matrix::{update_transfer_matrix, TransferMatrix, DIAGONAL_FLOOR};
use super::model::{fit_task_model, sample_source, GaussianModel, SIGMA_MIN};
use super::MultitaskRunResult;
use crate::error::{Error, Result};
use crate::problem::MultitaskProblem;
use crate::rng::seeded_rng;
use crate::search::{
    assign_scalar_fitness, binary_tournament, elite_indices, init_population, inject, EvolverConfig, Individual,
    Population, RunResult, TaskTrace,
};

fn half() -> f64 {
    0.5
}

fn one() -> usize {
    1
}

fn default_floor() -> f64 {
    DIAGONAL_FLOOR
}

fn default_sigma_min() -> f64 {
    SIGMA_MIN
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdaptiveOptions {
    /// Share of each task's offspring drawn from its mixture row.
    #[serde(default = "half")]
    pub mixture_fraction: f64,
    /// Share of a subpopulation used to fit its model and update weights.
    #[serde(default = "half")]
    pub elite_fraction: f64,
    #[serde(default = "default_sigma_min")]
    pub sigma_min: f64,
    #[serde(default = "default_floor")]
    pub diagonal_floor: f64,
    /// EM steps on the weights per generation.
    #[serde(default = "one")]
    pub em_steps: usize,
}

impl Default for AdaptiveOptions {
    fn default() -> Self {
        Self {
            mixture_fraction: half(),
            elite_fraction: half(),
            sigma_min: SIGMA_MIN,
            diagonal_floor: DIAGONAL_FLOOR,
            em_steps: 1,
        }
    }
}

impl AdaptiveOptions {
    pub fn validate(&self) -> Result<()> {
        let fail = |msg: &str| Err(Error::InvalidConfig(msg.into()));
        if !(0.0..=1.0).contains(&self.mixture_fraction) {
            return fail("mixture_fraction must lie in [0, 1]");
        }
        if !(self.elite_fraction > 0.0 && self.elite_fraction <= 1.0) {
            return fail("elite_fraction must lie in (0, 1]");
        }
        if !(self.sigma_min > 0.0) {
            return fail("sigma_min must be positive");
        }
        if !(0.0..=1.0).contains(&self.diagonal_floor) {
            return fail("diagonal_floor must lie in [0, 1]");
        }
        Ok(())
    }

    fn elite_count(&self, pop_size: usize) -> usize {
        ((self.elite_fraction * pop_size as f64).ceil() as usize).clamp(2, pop_size)
    }
}

pub fn run_adaptive_emt(
    problem: &MultitaskProblem,
    config: &EvolverConfig,
    options: &AdaptiveOptions,
) -> Result<MultitaskRunResult> {
    run_adaptive_emt_warm(problem, config, options, &[])
}

/// Adaptive engine whose task subpopulations start from `warm_start[i]`
/// (possibly fewer genomes than `pop_size`; the rest are random).
pub fn run_adaptive_emt_warm(
    problem: &MultitaskProblem,
    config: &EvolverConfig,
    options: &AdaptiveOptions,
    warm_start: &[Vec<Vec<f64>>],
) -> Result<MultitaskRunResult> {
    config.validate()?;
    options.validate()?;
    if config.pop_size < 2 {
        return Err(Error::InvalidConfig("subpopulations need at least two members".into()));
    }
    let k = problem.num_tasks();
    let dim = problem.unified_dim();
    let n = config.pop_size;
    let variation = config.variation(dim);
    let mut rng = seeded_rng(config.seed);

    let mut subpops = Vec::with_capacity(k);
    let mut evaluations = alloc::vec![0u64; k];
    for task in 0..k {
        let mut pop = init_population(n, dim, &mut rng)?;
        if let Some(seeds) = warm_start.get(task) {
            let take = seeds.len().min(n);
            inject(&mut pop.members, &seeds[..take], dim)?;
        }
        for m in pop.members.iter_mut() {
            m.skill_factor = task;
            m.fitness = Some(problem.task(task).evaluate(&m.genome)?);
        }
        evaluations[task] += n as u64;
        rank(&mut pop.members, task);
        subpops.push(pop);
    }

    let mut traces = alloc::vec![TaskTrace::default(); k];
    record(&subpops, &evaluations, &mut traces);
    let mut w = TransferMatrix::uniform(k);
    let mut transfer_trace = alloc::vec![w.clone()];

    let n_elite_fit = options.elite_count(n);
    let n_offspring = n - config.elitism;
    let n_mixture = ((options.mixture_fraction * n_offspring as f64).round() as usize).min(n_offspring);
    let mut generation = 0;
    while !finished(&subpops, config, &evaluations, generation) {
        let models = subpops
            .iter()
            .map(|p| fit_task_model(&top_genomes(p, n_elite_fit), options.sigma_min))
            .collect::<Result<Vec<GaussianModel>>>()?;

        for (task, pop) in subpops.iter_mut().enumerate() {
            let members = &pop.members;
            let mut children: Vec<Vec<f64>> = Vec::with_capacity(n_offspring + 1);
            let row = w.row(task);
            for _ in 0..n_mixture {
                let source = sample_source(row, &mut rng);
                children.push(models[source].sample(&mut rng));
            }
            while children.len() < n_offspring {
                let a = binary_tournament(members, &mut rng);
                let b = binary_tournament(members, &mut rng);
                let (c1, c2) = variation.offspring_pair(&members[a].genome, &members[b].genome, &mut rng);
                children.push(c1);
                children.push(c2);
            }
            children.truncate(n_offspring);

            let mut next: Vec<Individual> =
                elite_indices(members, config.elitism).into_iter().map(|i| members[i].clone()).collect();
            for genome in children {
                let fitness = problem.task(task).evaluate(&genome)?;
                next.push(Individual::evaluated(genome, task, fitness));
            }
            evaluations[task] += n_offspring as u64;
            rank(&mut next, task);
            pop.members = next;
            pop.generation += 1;
        }

        let elites: Vec<Vec<Vec<f64>>> = subpops.iter().map(|p| top_genomes(p, n_elite_fit)).collect();
        w = update_transfer_matrix(&w, &elites, &models, options.em_steps, options.diagonal_floor)?;
        transfer_trace.push(w.clone());
        generation += 1;
        record(&subpops, &evaluations, &mut traces);
    }

    let mut best_solutions = Vec::with_capacity(k);
    let mut best_fitness = Vec::with_capacity(k);
    for (task, pop) in subpops.iter().enumerate() {
        let best = pop.best_on(task).expect("subpopulation is evaluated");
        best_solutions.push(best.genome.clone());
        best_fitness.push(best.fitness.unwrap_or(f64::NEG_INFINITY));
    }
    let run = RunResult { traces, best_solutions, best_fitness, evaluations, seed: config.seed };
    let mut result = MultitaskRunResult::from_run(run);
    result.transfer_trace = transfer_trace;
    result.final_populations = subpops;
    Ok(result)
}

/// Ranks a single-task subpopulation; members carry `skill_factor = task`.
fn rank(members: &mut [Individual], task: usize) {
    for m in members.iter_mut() {
        m.skill_factor = 0;
    }
    assign_scalar_fitness(members, 1);
    for m in members.iter_mut() {
        m.skill_factor = task;
    }
}

fn top_genomes(pop: &Population, count: usize) -> Vec<Vec<f64>> {
    elite_indices(&pop.members, count).into_iter().map(|i| pop.members[i].genome.clone()).collect()
}

fn record(subpops: &[Population], evaluations: &[u64], traces: &mut [TaskTrace]) {
    for (task, (pop, trace)) in subpops.iter().zip(traces.iter_mut()).enumerate() {
        let best = pop.best_on(task).and_then(|b| b.fitness).unwrap_or(f64::NEG_INFINITY);
        trace.best_fitness.push(best);
        trace.evaluations.push(evaluations[task]);
    }
}

fn finished(subpops: &[Population], config: &EvolverConfig, evaluations: &[u64], generation: usize) -> bool {
    if generation >= config.generations {
        return true;
    }
    if let Some(target) = config.target {
        let all = subpops
            .iter()
            .enumerate()
            .all(|(t, p)| p.best_on(t).and_then(|b| b.fitness).is_some_and(|f| f >= target));
        if all {
            return true;
        }
    }
    config.max_evaluations.is_some_and(|b| evaluations.iter().all(|&e| e >= b))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::benchmark::{make_benchmark, BaseFunction, BenchmarkSpec};
    use alloc::vec;

    #[test]
    fn single_task_keeps_unit_weight() {
        let p = make_benchmark(&BenchmarkSpec::new(BaseFunction::Sphere, vec![3], 1.0, 0)).unwrap();
        let r = run_adaptive_emt(&p, &EvolverConfig::new(20, 10).with_seed(1), &AdaptiveOptions::default()).unwrap();
        assert_eq!(r.transfer_trace.len(), 11);
        assert!(r.transfer_trace.iter().all(|w| w.row(0) == [1.0]));
    }

    #[test]
    fn exact_per_task_budget() {
        let p = make_benchmark(&BenchmarkSpec::new(BaseFunction::Sphere, vec![3, 5], 0.5, 0)).unwrap();
        let config = EvolverConfig::new(20, 12).with_seed(2).with_elitism(2);
        let r = run_adaptive_emt(&p, &config, &AdaptiveOptions::default()).unwrap();
        assert_eq!(r.run.evaluations, vec![20 + 12 * 18; 2]);
        assert_eq!(p.evaluation_counts(), r.run.evaluations);
        for w in &r.transfer_trace {
            assert!(w.is_stochastic(1e-9));
            assert!((0..2).all(|i| w.get(i, i) >= DIAGONAL_FLOOR - 1e-15));
        }
    }

    #[test]
    fn warm_start_genomes_are_used() {
        let mut spec = BenchmarkSpec::new(BaseFunction::Sphere, vec![2], 1.0, 0);
        spec.shifts = vec![vec![1.0, 1.0]];
        let p = make_benchmark(&spec).unwrap();
        let optimum = p.task(0).encode(&[1.0, 1.0], 2).unwrap();
        let r = run_adaptive_emt_warm(&p, &EvolverConfig::new(10, 1), &AdaptiveOptions::default(), &[vec![optimum]])
            .unwrap();
        assert_eq!(r.run.traces[0].best_fitness[0], 0.0);
    }
}
