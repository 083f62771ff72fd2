//! Population, variation operators, factorial ranking and the single-task
//! canonical EA (CEA).
//!
//! Variation is SBX crossover followed by per-coordinate Gaussian mutation;
//! every operator clamps to the unit box. Parent selection is a binary
//! tournament on `(scalar_fitness, fitness)`, survivor selection keeps the
//! `elitism` best members and fills the rest with offspring. Every tie is
//! broken by the lower member index.

use alloc::vec::Vec;
use core::cmp::Ordering;

#[allow(unused_imports)]
use num_traits::Float;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::problem::{check_unit_box, TaskDefinition};
use crate::rng::{seeded_rng, EngineRng};

fn default_eta() -> f64 {
    10.0
}

fn default_sigma() -> f64 {
    0.05
}

fn default_elitism() -> usize {
    1
}

/// Evolutionary run parameters shared by every engine.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvolverConfig {
    /// Population size (per task for the multi-population engines).
    pub pop_size: usize,
    pub generations: usize,
    #[serde(default = "default_eta")]
    pub sbx_eta: f64,
    /// Per-coordinate mutation probability; `None` means `1 / D`.
    #[serde(default)]
    pub mutation_rate: Option<f64>,
    #[serde(default = "default_sigma")]
    pub mutation_sigma: f64,
    #[serde(default = "default_elitism")]
    pub elitism: usize,
    #[serde(default)]
    pub seed: u64,
    /// Stop after the generation in which every task reaches this fitness.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target: Option<f64>,
    /// Per-task evaluation budget, checked at generation boundaries.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_evaluations: Option<u64>,
}

impl EvolverConfig {
    pub fn new(pop_size: usize, generations: usize) -> Self {
        Self {
            pop_size,
            generations,
            sbx_eta: default_eta(),
            mutation_rate: None,
            mutation_sigma: default_sigma(),
            elitism: default_elitism(),
            seed: 0,
            target: None,
            max_evaluations: None,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_target(mut self, target: f64) -> Self {
        self.target = Some(target);
        self
    }

    pub fn with_elitism(mut self, elitism: usize) -> Self {
        self.elitism = elitism;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: &str| Err(Error::InvalidConfig(msg.into()));
        if self.pop_size == 0 || !self.pop_size.is_multiple_of(2) {
            return fail("pop_size must be even and positive");
        }
        if self.generations == 0 {
            return fail("generations must be positive");
        }
        if !(self.sbx_eta > 0.0) {
            return fail("sbx_eta must be positive");
        }
        if let Some(rate) = self.mutation_rate {
            if !(0.0..=1.0).contains(&rate) {
                return fail("mutation_rate must lie in [0, 1]");
            }
        }
        if !(self.mutation_sigma > 0.0) {
            return fail("mutation_sigma must be positive");
        }
        if self.elitism >= self.pop_size {
            return fail("elitism must be smaller than pop_size");
        }
        Ok(())
    }

    pub(crate) fn variation(&self, dim: usize) -> Variation {
        Variation {
            eta: self.sbx_eta,
            mutation_rate: self.mutation_rate.unwrap_or(1.0 / dim as f64),
            mutation_sigma: self.mutation_sigma,
        }
    }
}

/// A point of the unified space with its multifactorial bookkeeping.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Individual {
    pub genome: Vec<f64>,
    pub skill_factor: usize,
    /// Fitness on the skill-factor task, once evaluated.
    pub fitness: Option<f64>,
    /// Rank per task; unevaluated tasks hold `m + 1`.
    pub factorial_ranks: Vec<usize>,
    pub scalar_fitness: f64,
}

impl Individual {
    pub fn new(genome: Vec<f64>, skill_factor: usize) -> Self {
        Self { genome, skill_factor, fitness: None, factorial_ranks: Vec::new(), scalar_fitness: 0.0 }
    }

    pub fn evaluated(genome: Vec<f64>, skill_factor: usize, fitness: f64) -> Self {
        Self { fitness: Some(fitness), ..Self::new(genome, skill_factor) }
    }

    fn fitness_or_worst(&self) -> f64 {
        self.fitness.unwrap_or(f64::NEG_INFINITY)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Population {
    pub members: Vec<Individual>,
    pub generation: usize,
}

impl Population {
    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    /// Best evaluated member on `task`, lowest index on ties.
    pub fn best_on(&self, task: usize) -> Option<&Individual> {
        self.members
            .iter()
            .filter(|m| m.skill_factor == task && m.fitness.is_some())
            .fold(None, |best: Option<&Individual>, m| match best {
                Some(b) if b.fitness_or_worst() >= m.fitness_or_worst() => Some(b),
                _ => Some(m),
            })
    }
}

/// `n` genomes drawn uniformly from `[0, 1]^dim`.
pub fn init_population<R: Rng + ?Sized>(n: usize, dim: usize, rng: &mut R) -> Result<Population> {
    if n == 0 || !n.is_multiple_of(2) {
        return Err(Error::InvalidConfig("population size must be even and positive".into()));
    }
    if dim == 0 {
        return Err(Error::InvalidConfig("dimension must be positive".into()));
    }
    let members = (0..n)
        .map(|_| Individual::new((0..dim).map(|_| rng.random::<f64>()).collect(), 0))
        .collect();
    Ok(Population { members, generation: 0 })
}

/// SBX spread factor for a uniform draw `u` in `[0, 1)`.
pub fn sbx_beta(u: f64, eta: f64) -> f64 {
    let exponent = 1.0 / (eta + 1.0);
    if u <= 0.5 {
        (2.0 * u).powf(exponent)
    } else {
        (1.0 / (2.0 * (1.0 - u))).powf(exponent)
    }
}

/// SBX children before clamping; the pair mean equals the parent mean.
pub fn sbx_raw<R: Rng + ?Sized>(p1: &[f64], p2: &[f64], eta: f64, rng: &mut R) -> Result<(Vec<f64>, Vec<f64>)> {
    if p1.len() != p2.len() {
        return Err(Error::DimensionMismatch { expected: p1.len(), got: p2.len() });
    }
    let mut c1 = Vec::with_capacity(p1.len());
    let mut c2 = Vec::with_capacity(p1.len());
    for (a, b) in p1.iter().zip(p2) {
        let beta = sbx_beta(rng.random::<f64>(), eta);
        let (mean, half_gap) = (0.5 * (a + b), 0.5 * (a - b));
        c1.push(mean + beta * half_gap);
        c2.push(mean - beta * half_gap);
    }
    Ok((c1, c2))
}

/// Simulated binary crossover, children clamped to the unit box.
pub fn sbx_crossover<R: Rng + ?Sized>(p1: &[f64], p2: &[f64], eta: f64, rng: &mut R) -> Result<(Vec<f64>, Vec<f64>)> {
    let (mut c1, mut c2) = sbx_raw(p1, p2, eta, rng)?;
    clamp_unit(&mut c1);
    clamp_unit(&mut c2);
    Ok((c1, c2))
}

/// Perturbs each coordinate with probability `rate` by `N(0, sigma)`.
pub fn gaussian_mutation<R: Rng + ?Sized>(u: &[f64], sigma: f64, rate: f64, rng: &mut R) -> Vec<f64> {
    u.iter()
        .map(|&t| {
            if rng.random::<f64>() < rate {
                let z: f64 = rng.sample(StandardNormal);
                (t + sigma * z).clamp(0.0, 1.0)
            } else {
                t
            }
        })
        .collect()
}

pub(crate) fn clamp_unit(v: &mut [f64]) {
    v.iter_mut().for_each(|t| *t = t.clamp(0.0, 1.0));
}

#[derive(Debug, Clone, Copy)]
pub struct Variation {
    pub eta: f64,
    pub mutation_rate: f64,
    pub mutation_sigma: f64,
}

impl Variation {
    pub fn mutate<R: Rng + ?Sized>(&self, u: &[f64], rng: &mut R) -> Vec<f64> {
        gaussian_mutation(u, self.mutation_sigma, self.mutation_rate, rng)
    }

    /// SBX followed by mutation of both children.
    pub fn offspring_pair<R: Rng + ?Sized>(&self, p1: &[f64], p2: &[f64], rng: &mut R) -> (Vec<f64>, Vec<f64>) {
        let (c1, c2) = sbx_crossover(p1, p2, self.eta, rng).expect("parents share the unified dimension");
        let c1 = self.mutate(&c1, rng);
        let c2 = self.mutate(&c2, rng);
        (c1, c2)
    }
}

fn by_fitness_desc(members: &[Individual], a: usize, b: usize) -> Ordering {
    members[b]
        .fitness_or_worst()
        .total_cmp(&members[a].fitness_or_worst())
        .then(a.cmp(&b))
}

/// Ranks members evaluated on `task_id` as `1..=m` (1 = best, lower index
/// first on ties); everyone else gets `m + 1`.
pub fn factorial_ranks(members: &[Individual], task_id: usize) -> Vec<usize> {
    let mut evaluated: Vec<usize> = (0..members.len())
        .filter(|&i| members[i].skill_factor == task_id && members[i].fitness.is_some())
        .collect();
    evaluated.sort_by(|&a, &b| by_fitness_desc(members, a, b));
    let mut ranks = alloc::vec![evaluated.len() + 1; members.len()];
    for (r, &i) in evaluated.iter().enumerate() {
        ranks[i] = r + 1;
    }
    ranks
}

/// Fills factorial ranks for all `num_tasks` tasks and sets
/// `scalar_fitness = 1 / best rank`.
pub fn assign_scalar_fitness(members: &mut [Individual], num_tasks: usize) {
    for m in members.iter_mut() {
        m.factorial_ranks.clear();
    }
    for task in 0..num_tasks {
        let ranks = factorial_ranks(members, task);
        for (m, r) in members.iter_mut().zip(ranks) {
            m.factorial_ranks.push(r);
        }
    }
    for m in members.iter_mut() {
        let best = m
            .factorial_ranks
            .iter()
            .enumerate()
            .filter(|(t, _)| *t == m.skill_factor && m.fitness.is_some())
            .map(|(_, &r)| r)
            .min();
        m.scalar_fitness = best.map_or(0.0, |r| 1.0 / r as f64);
    }
}

fn better(members: &[Individual], a: usize, b: usize) -> bool {
    let (x, y) = (&members[a], &members[b]);
    match x.scalar_fitness.total_cmp(&y.scalar_fitness) {
        Ordering::Greater => true,
        Ordering::Less => false,
        Ordering::Equal => match x.fitness_or_worst().total_cmp(&y.fitness_or_worst()) {
            Ordering::Greater => true,
            Ordering::Less => false,
            Ordering::Equal => a <= b,
        },
    }
}

/// Binary tournament on `(scalar_fitness, fitness)`.
pub fn binary_tournament<R: Rng + ?Sized>(members: &[Individual], rng: &mut R) -> usize {
    let a = rng.random_range(0..members.len());
    let b = rng.random_range(0..members.len());
    if better(members, a, b) {
        a
    } else {
        b
    }
}

/// Indices of the `count` best members by `(scalar_fitness, fitness)`.
pub fn elite_indices(members: &[Individual], count: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..members.len()).collect();
    order.sort_by(|&a, &b| {
        members[b]
            .scalar_fitness
            .total_cmp(&members[a].scalar_fitness)
            .then_with(|| by_fitness_desc(members, a, b))
    });
    order.truncate(count);
    order
}

/// Per-generation record for one task. Index 0 is the initial population.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TaskTrace {
    /// Best fitness in the population after each generation.
    pub best_fitness: Vec<f64>,
    /// Cumulative evaluations charged to the task after each generation.
    pub evaluations: Vec<u64>,
}

impl TaskTrace {
    pub(crate) fn push(&mut self, best: f64, evaluations: u64) {
        self.best_fitness.push(best);
        self.evaluations.push(evaluations);
    }

    /// First generation whose best fitness reaches `target`.
    pub fn generation_reaching(&self, target: f64) -> Option<usize> {
        self.best_fitness.iter().position(|&f| f >= target)
    }

    pub fn evaluations_to_target(&self, target: f64) -> Option<u64> {
        self.generation_reaching(target).map(|g| self.evaluations[g])
    }
}

/// Outcome of one seeded run, one entry per task.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub traces: Vec<TaskTrace>,
    /// Best genome per task in unified coordinates.
    pub best_solutions: Vec<Vec<f64>>,
    pub best_fitness: Vec<f64>,
    pub evaluations: Vec<u64>,
    pub seed: u64,
}

impl RunResult {
    pub fn num_tasks(&self) -> usize {
        self.traces.len()
    }

    pub fn evaluations_to_target(&self, task: usize, target: f64) -> Option<u64> {
        self.traces[task].evaluations_to_target(target)
    }

    /// Cost-weighted evaluations over all tasks up to the generation in which
    /// `task` first reaches `target`.
    pub fn weighted_cost_to_target(&self, task: usize, target: f64, weights: &[f64]) -> Option<f64> {
        let generation = self.traces[task].generation_reaching(target)?;
        Some(
            self.traces
                .iter()
                .zip(weights)
                .map(|(t, w)| {
                    let g = generation.min(t.evaluations.len() - 1);
                    t.evaluations[g] as f64 * w
                })
                .sum(),
        )
    }

    pub fn total_evaluations(&self) -> u64 {
        self.evaluations.iter().sum()
    }
}

/// Evaluates a batch of unified genomes, returning one fitness each.
pub trait BatchEvaluator {
    fn evaluate_batch(&mut self, genomes: &[Vec<f64>]) -> Result<Vec<f64>>;
}

impl<F> BatchEvaluator for F
where
    F: FnMut(&[Vec<f64>]) -> Result<Vec<f64>>,
{
    fn evaluate_batch(&mut self, genomes: &[Vec<f64>]) -> Result<Vec<f64>> {
        self(genomes)
    }
}

/// Evaluator that charges every genome to `task`.
pub fn task_evaluator(task: &TaskDefinition) -> impl FnMut(&[Vec<f64>]) -> Result<Vec<f64>> + '_ {
    move |genomes: &[Vec<f64>]| genomes.iter().map(|g| task.evaluate(g)).collect()
}

/// Overwrites the first members with injected genomes.
pub(crate) fn inject(members: &mut [Individual], injected: &[Vec<f64>], dim: usize) -> Result<()> {
    if injected.len() > members.len() {
        return Err(Error::InvalidConfig("more injected genomes than population members".into()));
    }
    for (m, g) in members.iter_mut().zip(injected) {
        if g.len() != dim {
            return Err(Error::DimensionMismatch { expected: dim, got: g.len() });
        }
        check_unit_box(g)?;
        m.genome.clone_from(g);
    }
    Ok(())
}

/// Steppable single-task generational EA. Used directly by [`run_cea`], by
/// the island engine (one per task) and by the bilevel upper level.
#[derive(Debug, Clone)]
pub struct SingleTaskRun<R = EngineRng> {
    config: EvolverConfig,
    variation: Variation,
    rng: R,
    population: Population,
    trace: TaskTrace,
    evaluations: u64,
}

impl<R: Rng> SingleTaskRun<R> {
    pub fn start<E: BatchEvaluator + ?Sized>(
        dim: usize,
        config: &EvolverConfig,
        mut rng: R,
        injected: &[Vec<f64>],
        eval: &mut E,
    ) -> Result<Self> {
        config.validate()?;
        let mut population = init_population(config.pop_size, dim, &mut rng)?;
        inject(&mut population.members, injected, dim)?;
        let genomes: Vec<Vec<f64>> = population.members.iter().map(|m| m.genome.clone()).collect();
        let fitness = eval.evaluate_batch(&genomes)?;
        for (m, f) in population.members.iter_mut().zip(fitness) {
            m.fitness = Some(f);
        }
        assign_scalar_fitness(&mut population.members, 1);
        let mut run = Self {
            config: config.clone(),
            variation: config.variation(dim),
            rng,
            population,
            trace: TaskTrace::default(),
            evaluations: config.pop_size as u64,
        };
        run.record();
        Ok(run)
    }

    fn record(&mut self) {
        let best = self.best().fitness_or_worst();
        self.trace.push(best, self.evaluations);
    }

    pub fn generation(&self) -> usize {
        self.population.generation
    }

    pub fn best(&self) -> &Individual {
        self.population.best_on(0).expect("population is evaluated")
    }

    pub fn population(&self) -> &Population {
        &self.population
    }

    pub fn trace(&self) -> &TaskTrace {
        &self.trace
    }

    pub fn evaluations(&self) -> u64 {
        self.evaluations
    }

    pub fn reached_target(&self) -> bool {
        self.config.target.is_some_and(|t| self.best().fitness_or_worst() >= t)
    }

    pub fn finished(&self) -> bool {
        self.population.generation >= self.config.generations
            || self.reached_target()
            || self.config.max_evaluations.is_some_and(|b| self.evaluations >= b)
    }

    /// One generation: tournament, variation, evaluation, elitist replacement.
    pub fn step<E: BatchEvaluator + ?Sized>(&mut self, eval: &mut E) -> Result<()> {
        let n = self.config.pop_size;
        let n_offspring = n - self.config.elitism;
        let members = &self.population.members;
        let mut offspring: Vec<Vec<f64>> = Vec::with_capacity(n_offspring + 1);
        while offspring.len() < n_offspring {
            let a = binary_tournament(members, &mut self.rng);
            let b = binary_tournament(members, &mut self.rng);
            let (c1, c2) = self.variation.offspring_pair(&members[a].genome, &members[b].genome, &mut self.rng);
            offspring.push(c1);
            offspring.push(c2);
        }
        offspring.truncate(n_offspring);
        let fitness = eval.evaluate_batch(&offspring)?;
        self.evaluations += offspring.len() as u64;

        let mut next: Vec<Individual> = elite_indices(members, self.config.elitism)
            .into_iter()
            .map(|i| members[i].clone())
            .collect();
        next.extend(offspring.into_iter().zip(fitness).map(|(g, f)| Individual::evaluated(g, 0, f)));
        assign_scalar_fitness(&mut next, 1);
        self.population.members = next;
        self.population.generation += 1;
        self.record();
        Ok(())
    }

    /// Replaces the worst members with already evaluated genomes. Returns the
    /// fitness of each replaced member, in the order of `incoming`.
    pub fn replace_worst(&mut self, incoming: Vec<(Vec<f64>, f64)>) -> Vec<f64> {
        let members = &mut self.population.members;
        let mut order: Vec<usize> = (0..members.len()).collect();
        order.sort_by(|&a, &b| by_fitness_desc(members, a, b));
        let mut replaced = Vec::with_capacity(incoming.len());
        for ((genome, fitness), slot) in incoming.into_iter().zip(order.into_iter().rev()) {
            replaced.push(members[slot].fitness_or_worst());
            members[slot] = Individual::evaluated(genome, 0, fitness);
        }
        self.evaluations += replaced.len() as u64;
        assign_scalar_fitness(members, 1);
        let best = self.best().fitness_or_worst();
        if let (Some(b), Some(e)) = (self.trace.best_fitness.last_mut(), self.trace.evaluations.last_mut()) {
            *b = best;
            *e = self.evaluations;
        }
        replaced
    }

    /// The best `count` genomes with their fitness, best first.
    pub fn top(&self, count: usize) -> Vec<(Vec<f64>, f64)> {
        let members = &self.population.members;
        elite_indices(members, count)
            .into_iter()
            .map(|i| (members[i].genome.clone(), members[i].fitness_or_worst()))
            .collect()
    }

    pub fn into_result(self, seed: u64) -> RunResult {
        let best = self.best().clone();
        RunResult {
            traces: alloc::vec![self.trace],
            best_fitness: alloc::vec![best.fitness_or_worst()],
            best_solutions: alloc::vec![best.genome],
            evaluations: alloc::vec![self.evaluations],
            seed,
        }
    }

    pub fn run_to_end<E: BatchEvaluator + ?Sized>(&mut self, eval: &mut E) -> Result<()> {
        while !self.finished() {
            self.step(eval)?;
        }
        Ok(())
    }
}

/// Single-task canonical EA seeded from `config.seed`.
pub fn run_cea(task: &TaskDefinition, config: &EvolverConfig) -> Result<RunResult> {
    run_cea_with_rng(task, config, seeded_rng(config.seed), &[])
}

/// CEA with an explicit generator and optional injected initial genomes.
pub fn run_cea_with_rng<R: Rng>(
    task: &TaskDefinition,
    config: &EvolverConfig,
    rng: R,
    injected: &[Vec<f64>],
) -> Result<RunResult> {
    let mut eval = task_evaluator(task);
    let mut run = SingleTaskRun::start(task.dim(), config, rng, injected, &mut eval)?;
    run.run_to_end(&mut eval)?;
    Ok(run.into_result(config.seed))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded_rng;
    use alloc::sync::Arc;
    use alloc::vec;

    fn sphere(dim: usize) -> TaskDefinition {
        TaskDefinition::symmetric("sphere", dim, 5.0, Arc::new(|x: &[f64]| -x.iter().map(|v| v * v).sum::<f64>()))
    }

    fn member(fitness: f64) -> Individual {
        Individual::evaluated(vec![0.5], 0, fitness)
    }

    #[test]
    fn init_population_is_deterministic_and_in_box() {
        let a = init_population(4, 2, &mut seeded_rng(3)).unwrap();
        let b = init_population(4, 2, &mut seeded_rng(3)).unwrap();
        assert_eq!(a, b);
        assert!(a.members.iter().flat_map(|m| &m.genome).all(|t| (0.0..=1.0).contains(t)));
        assert!(init_population(0, 2, &mut seeded_rng(3)).is_err());
        assert!(init_population(3, 2, &mut seeded_rng(3)).is_err());
    }

    #[test]
    fn sbx_examples() {
        let mut rng = seeded_rng(1);
        let p = [0.3, 0.7, 0.1];
        let (c1, c2) = sbx_crossover(&p, &p, 10.0, &mut rng).unwrap();
        assert_eq!(c1, p);
        assert_eq!(c2, p);
        assert_eq!(sbx_beta(0.5, 2.0), 1.0);
        let (c1, c2) = (0.5 * (2.0 * 0.2 + 0.0 * 0.8), 0.5 * (0.0 * 0.2 + 2.0 * 0.8));
        assert_eq!((c1, c2), (0.2, 0.8));
        assert!(sbx_crossover(&[0.1], &[0.1, 0.2], 2.0, &mut rng).is_err());
    }

    #[test]
    fn large_eta_keeps_children_near_parents() {
        let mut rng = seeded_rng(2);
        let (p1, p2) = ([0.2, 0.4], [0.8, 0.6]);
        let (c1, c2) = sbx_crossover(&p1, &p2, 1e6, &mut rng).unwrap();
        for k in 0..2 {
            let near = |c: f64| (c - p1[k]).abs() < 1e-3 || (c - p2[k]).abs() < 1e-3;
            assert!(near(c1[k]) && near(c2[k]));
        }
    }

    #[test]
    fn mutation_identities() {
        let mut rng = seeded_rng(5);
        let u = vec![0.0, 0.3, 1.0];
        assert_eq!(gaussian_mutation(&u, 0.5, 0.0, &mut rng), u);
        assert_eq!(gaussian_mutation(&u, 0.0, 1.0, &mut rng), u);
        let m = gaussian_mutation(&u, 3.0, 1.0, &mut rng);
        assert!(m.iter().all(|t| (0.0..=1.0).contains(t)));
    }

    #[test]
    fn factorial_rank_examples() {
        let pop = vec![member(3.0), member(9.0), member(1.0)];
        assert_eq!(factorial_ranks(&pop, 0), vec![2, 1, 3]);
        let pop = vec![member(2.0), member(2.0), member(2.0)];
        assert_eq!(factorial_ranks(&pop, 0), vec![1, 2, 3]);
        let mut pop = vec![member(4.0), Individual::new(vec![0.1], 0)];
        pop.push(Individual::evaluated(vec![0.2], 1, 7.0));
        assert_eq!(factorial_ranks(&pop, 0), vec![1, 2, 2]);
        assert_eq!(factorial_ranks(&pop, 1), vec![2, 2, 1]);
    }

    #[test]
    fn scalar_fitness_is_inverse_best_rank() {
        let mut pop = vec![
            Individual::evaluated(vec![0.1], 0, 1.0),
            Individual::evaluated(vec![0.2], 1, -3.0),
            Individual::evaluated(vec![0.3], 0, 5.0),
            Individual::evaluated(vec![0.4], 1, -9.0),
        ];
        assign_scalar_fitness(&mut pop, 2);
        let scalars: Vec<f64> = pop.iter().map(|m| m.scalar_fitness).collect();
        assert_eq!(scalars, vec![0.5, 1.0, 1.0, 0.5]);
        assert_eq!(pop[0].factorial_ranks, vec![2, 3]);
        assert_eq!(elite_indices(&pop, 2), vec![2, 1]);
    }

    #[test]
    fn cea_solves_small_sphere() {
        let task = sphere(2);
        let config = EvolverConfig::new(20, 50).with_seed(7);
        let result = run_cea(&task, &config).unwrap();
        assert!(result.best_fitness[0] >= -0.01, "{}", result.best_fitness[0]);
        assert_eq!(result.evaluations[0], 20 + 50 * 19);
        assert_eq!(task.evaluations(), result.evaluations[0]);
        let trace = &result.traces[0].best_fitness;
        assert!(trace.windows(2).all(|w| w[1] >= w[0]));
        assert_eq!(run_cea(&task, &config).unwrap(), result);
    }

    #[test]
    fn cea_stops_at_target_and_budget() {
        let task = sphere(2);
        let mut config = EvolverConfig::new(20, 500).with_seed(1).with_target(-0.1);
        let r = run_cea(&task, &config).unwrap();
        let last = *r.traces[0].best_fitness.last().unwrap();
        assert!(last >= -0.1);
        assert!(r.traces[0].best_fitness[..r.traces[0].best_fitness.len() - 1].iter().all(|&f| f < -0.1));
        config.target = None;
        config.max_evaluations = Some(100);
        let r = run_cea(&task, &config).unwrap();
        assert_eq!(r.evaluations[0], 20 + 5 * 19);
    }

    #[test]
    fn config_validation() {
        assert!(EvolverConfig::new(10, 5).validate().is_ok());
        assert!(EvolverConfig::new(11, 5).validate().is_err());
        assert!(EvolverConfig::new(10, 0).validate().is_err());
        assert!(EvolverConfig::new(10, 5).with_elitism(10).validate().is_err());
    }
}
