//! Single-population multifactorial EA: implicit transfer through crossover
//! between parents of different skill factors.

use alloc::vec::Vec;

use rand::Rng;

use super::MultitaskRunResult;
use crate::error::{Error, Result};
use crate::problem::MultitaskProblem;
use crate::rng::seeded_rng;
use crate::search::{
    assign_scalar_fitness, binary_tournament, elite_indices, init_population, inject, EvolverConfig, Individual,
    Population, RunResult, TaskTrace, Variation,
};

/// Child genome with the task it will be evaluated on.
#[derive(Debug, Clone, PartialEq)]
pub struct Offspring {
    pub genome: Vec<f64>,
    pub skill_factor: usize,
}

/// Produces two children from two parents. The flag reports whether an
/// inter-task crossover happened.
///
/// Equal skill factors always cross over and the children keep the skill.
/// Different skill factors cross over with probability `rmp`, each child
/// then imitating either parent at random; otherwise each parent is only
/// mutated and its child keeps the parent's skill.
pub fn assortative_mating<R: Rng + ?Sized>(
    parent_a: &Individual,
    parent_b: &Individual,
    rmp: f64,
    variation: &Variation,
    rng: &mut R,
) -> (Offspring, Offspring, bool) {
    let (sa, sb) = (parent_a.skill_factor, parent_b.skill_factor);
    if sa == sb {
        let (c1, c2) = variation.offspring_pair(&parent_a.genome, &parent_b.genome, rng);
        return (Offspring { genome: c1, skill_factor: sa }, Offspring { genome: c2, skill_factor: sa }, false);
    }
    if rng.random::<f64>() < rmp {
        let (c1, c2) = variation.offspring_pair(&parent_a.genome, &parent_b.genome, rng);
        let s1 = if rng.random_bool(0.5) { sa } else { sb };
        let s2 = if rng.random_bool(0.5) { sa } else { sb };
        (Offspring { genome: c1, skill_factor: s1 }, Offspring { genome: c2, skill_factor: s2 }, true)
    } else {
        let c1 = variation.mutate(&parent_a.genome, rng);
        let c2 = variation.mutate(&parent_b.genome, rng);
        (Offspring { genome: c1, skill_factor: sa }, Offspring { genome: c2, skill_factor: sb }, false)
    }
}

pub fn run_mfea(problem: &MultitaskProblem, config: &EvolverConfig, rmp: f64) -> Result<MultitaskRunResult> {
    run_mfea_injected(problem, config, rmp, &[])
}

/// MFEA whose first initial members are replaced by `injected` genomes.
///
/// Skill factors are assigned round-robin. Each individual is evaluated on
/// its skill-factor task only. Survivors are the `elitism` best of every
/// task (ranked by scalar fitness) plus the offspring.
pub fn run_mfea_injected(
    problem: &MultitaskProblem,
    config: &EvolverConfig,
    rmp: f64,
    injected: &[Vec<f64>],
) -> Result<MultitaskRunResult> {
    config.validate()?;
    if !(0.0..=1.0).contains(&rmp) {
        return Err(Error::InvalidConfig("rmp must lie in [0, 1]".into()));
    }
    let k = problem.num_tasks();
    let dim = problem.unified_dim();
    let n_elite = config.elitism * k;
    if n_elite >= config.pop_size {
        return Err(Error::InvalidConfig("elitism * tasks must be smaller than pop_size".into()));
    }
    let variation = config.variation(dim);
    let mut rng = seeded_rng(config.seed);

    let mut population = init_population(config.pop_size, dim, &mut rng)?;
    inject(&mut population.members, injected, dim)?;
    let mut evaluations = alloc::vec![0u64; k];
    for (i, m) in population.members.iter_mut().enumerate() {
        m.skill_factor = i % k;
        m.fitness = Some(problem.task(m.skill_factor).evaluate(&m.genome)?);
        evaluations[m.skill_factor] += 1;
    }
    assign_scalar_fitness(&mut population.members, k);

    let mut traces = alloc::vec![TaskTrace::default(); k];
    record(&population, &evaluations, &mut traces);
    let mut crossovers = 0u64;

    let n_offspring = config.pop_size - n_elite;
    while !finished(&population, config, &evaluations, k) {
        let members = &population.members;
        let mut offspring: Vec<Offspring> = Vec::with_capacity(n_offspring + 1);
        while offspring.len() < n_offspring {
            let a = binary_tournament(members, &mut rng);
            let b = binary_tournament(members, &mut rng);
            let (c1, c2, crossed) = assortative_mating(&members[a], &members[b], rmp, &variation, &mut rng);
            crossovers += u64::from(crossed);
            offspring.push(c1);
            offspring.push(c2);
        }
        offspring.truncate(n_offspring);

        let mut next: Vec<Individual> = elite_indices(members, n_elite).into_iter().map(|i| members[i].clone()).collect();
        for child in offspring {
            let fitness = problem.task(child.skill_factor).evaluate(&child.genome)?;
            evaluations[child.skill_factor] += 1;
            next.push(Individual::evaluated(child.genome, child.skill_factor, fitness));
        }
        assign_scalar_fitness(&mut next, k);
        population.members = next;
        population.generation += 1;
        record(&population, &evaluations, &mut traces);
    }

    let mut best_solutions = Vec::with_capacity(k);
    let mut best_fitness = Vec::with_capacity(k);
    for t in 0..k {
        match population.best_on(t) {
            Some(b) => {
                best_solutions.push(b.genome.clone());
                best_fitness.push(b.fitness.unwrap_or(f64::NEG_INFINITY));
            }
            None => {
                best_solutions.push(Vec::new());
                best_fitness.push(f64::NEG_INFINITY);
            }
        }
    }
    let run = RunResult { traces, best_solutions, best_fitness, evaluations, seed: config.seed };
    let mut result = MultitaskRunResult::from_run(run);
    result.inter_task_crossovers = crossovers;
    result.final_populations = alloc::vec![population];
    Ok(result)
}

fn record(population: &Population, evaluations: &[u64], traces: &mut [TaskTrace]) {
    for (t, trace) in traces.iter_mut().enumerate() {
        let best = population.best_on(t).and_then(|b| b.fitness).unwrap_or(f64::NEG_INFINITY);
        trace.best_fitness.push(best);
        trace.evaluations.push(evaluations[t]);
    }
}

fn finished(population: &Population, config: &EvolverConfig, evaluations: &[u64], k: usize) -> bool {
    if population.generation >= config.generations {
        return true;
    }
    if let Some(target) = config.target {
        let all = (0..k).all(|t| population.best_on(t).and_then(|b| b.fitness).is_some_and(|f| f >= target));
        if all {
            return true;
        }
    }
    config.max_evaluations.is_some_and(|b| evaluations.iter().sum::<u64>() >= b * k as u64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::benchmark::{make_benchmark, BaseFunction, BenchmarkSpec};
    use crate::rng::seeded_rng;
    use alloc::vec;

    fn variation() -> Variation {
        Variation { eta: 10.0, mutation_rate: 0.5, mutation_sigma: 0.05 }
    }

    fn parent(skill: usize, g: f64) -> Individual {
        Individual::new(vec![g; 3], skill)
    }

    #[test]
    fn same_skill_children_share_it() {
        let mut rng = seeded_rng(0);
        for _ in 0..50 {
            let (c1, c2, crossed) = assortative_mating(&parent(1, 0.2), &parent(1, 0.8), 0.0, &variation(), &mut rng);
            assert_eq!((c1.skill_factor, c2.skill_factor, crossed), (1, 1, false));
        }
    }

    #[test]
    fn rmp_gates_inter_task_crossover() {
        let mut rng = seeded_rng(1);
        for _ in 0..50 {
            let (_, _, crossed) = assortative_mating(&parent(0, 0.2), &parent(1, 0.8), 1.0, &variation(), &mut rng);
            assert!(crossed);
        }
        let v = Variation { eta: 10.0, mutation_rate: 0.0, mutation_sigma: 0.05 };
        for _ in 0..50 {
            let (c1, c2, crossed) = assortative_mating(&parent(0, 0.2), &parent(1, 0.8), 0.0, &v, &mut rng);
            assert!(!crossed);
            assert_eq!((c1.skill_factor, c2.skill_factor), (0, 1));
            assert_eq!((c1.genome, c2.genome), (vec![0.2; 3], vec![0.8; 3]));
        }
    }

    #[test]
    fn closed_gate_logs_no_crossovers() {
        let p = make_benchmark(&BenchmarkSpec::new(BaseFunction::Sphere, vec![3, 3], 0.5, 1)).unwrap();
        let r = run_mfea(&p, &EvolverConfig::new(20, 10).with_seed(3), 0.0).unwrap();
        assert_eq!(r.inter_task_crossovers, 0);
        let r = run_mfea(&p, &EvolverConfig::new(20, 10).with_seed(3), 0.5).unwrap();
        assert!(r.inter_task_crossovers > 0);
    }

    #[test]
    fn evaluations_add_up() {
        let p = make_benchmark(&BenchmarkSpec::new(BaseFunction::Sphere, vec![2, 4], 0.5, 1)).unwrap();
        let config = EvolverConfig::new(20, 15).with_seed(9).with_elitism(2);
        let r = run_mfea(&p, &config, 0.3).unwrap();
        assert_eq!(r.run.total_evaluations(), 20 + 15 * (20 - 2 * 2));
        assert_eq!(p.evaluation_counts(), r.run.evaluations);
        for trace in &r.run.traces {
            assert!(trace.best_fitness.windows(2).all(|w| w[1] >= w[0]));
        }
    }
}
