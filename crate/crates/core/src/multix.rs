//! Recipes that recast multi-fidelity, bilevel and multi-scenario problems
//! as multitask problems for any engine.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;
use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::benchmark::{shifted_task, BaseFunction};
use crate::error::{Error, Result};
use crate::problem::{MultitaskProblem, TaskDefinition};
use crate::rng::{seeded_rng, task_rng};
use crate::search::{elite_indices, EvolverConfig, RunResult, SingleTaskRun};
use crate::transfer::{run_adaptive_emt_warm, AdaptiveOptions};

fn same_space(a: &TaskDefinition, b: &TaskDefinition) -> bool {
    a.lower() == b.lower() && a.upper() == b.upper()
}

/// Objectives of one design space at several accuracies.
#[derive(Debug, Clone)]
pub struct FidelityStack {
    /// The target objective.
    pub high: TaskDefinition,
    /// Cheaper approximations, in order.
    pub lows: Vec<TaskDefinition>,
    /// Cost of one evaluation of each low-fidelity task, in high-fidelity
    /// evaluations.
    pub cost_ratios: Vec<f64>,
}

/// Low-fidelity tasks first, the high-fidelity task last. Each task's cost
/// weight is its cost ratio, so [`MultitaskProblem::weighted_cost`] reports
/// high-fidelity-equivalent evaluations.
pub fn build_multifidelity(stack: &FidelityStack) -> Result<MultitaskProblem> {
    if stack.lows.len() != stack.cost_ratios.len() {
        return Err(Error::InvalidConfig(format!(
            "{} low-fidelity tasks but {} cost ratios",
            stack.lows.len(),
            stack.cost_ratios.len()
        )));
    }
    let mut tasks = Vec::with_capacity(stack.lows.len() + 1);
    for (k, (low, &ratio)) in stack.lows.iter().zip(&stack.cost_ratios).enumerate() {
        if !same_space(low, &stack.high) {
            return Err(Error::MismatchedSpaces(format!("low-fidelity task {k} differs from the high-fidelity box")));
        }
        if !(ratio > 0.0 && ratio <= 1.0) {
            return Err(Error::InvalidConfig(format!("cost ratio {ratio} outside (0, 1]")));
        }
        tasks.push(low.clone().with_cost_weight(ratio));
    }
    tasks.push(stack.high.clone().with_cost_weight(1.0));
    MultitaskProblem::new(tasks)
}

fn default_amplitude() -> f64 {
    0.1
}

fn default_frequency() -> f64 {
    3.0
}

/// Shifted sphere as the high-fidelity task with one cosine-perturbed
/// sphere `sum (x - s)^2 + a sum cos(f (x - s))` as its cheap approximation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SphereFidelitySpec {
    pub shift: Vec<f64>,
    pub cost_ratio: f64,
    #[serde(default = "default_amplitude")]
    pub amplitude: f64,
    #[serde(default = "default_frequency")]
    pub frequency: f64,
}

impl SphereFidelitySpec {
    pub fn new(shift: Vec<f64>, cost_ratio: f64) -> Self {
        Self { shift, cost_ratio, amplitude: default_amplitude(), frequency: default_frequency() }
    }

    pub fn stack(&self) -> Result<FidelityStack> {
        if self.shift.is_empty() {
            return Err(Error::InvalidConfig("empty shift".into()));
        }
        let high = shifted_task(BaseFunction::Sphere, self.shift.clone());
        let (shift, a, f) = (self.shift.clone(), self.amplitude, self.frequency);
        let objective = Arc::new(move |x: &[f64]| {
            -x.iter().zip(&shift).map(|(v, s)| (v - s) * (v - s) + a * (f * (v - s)).cos()).sum::<f64>()
        });
        let low = TaskDefinition::new("perturbed-sphere", high.lower().to_vec(), high.upper().to_vec(), objective);
        Ok(FidelityStack { high, lows: alloc::vec![low], cost_ratios: alloc::vec![self.cost_ratio] })
    }

    pub fn build(&self) -> Result<MultitaskProblem> {
        build_multifidelity(&self.stack()?)
    }
}

/// Objective of one level of a bilevel program, called as `f(x_u, x_l)`.
pub type LevelObjective = Arc<dyn Fn(&[f64], &[f64]) -> f64 + Send + Sync>;

/// `min_{x_u} f_u(x_u, x_l*)` where `x_l*` maximizes `f_l(x_u, .)`.
#[derive(Clone)]
pub struct BilevelProblem {
    upper_objective: LevelObjective,
    lower_objective: LevelObjective,
    upper_space: TaskDefinition,
    lower_space: TaskDefinition,
}

impl core::fmt::Debug for BilevelProblem {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.debug_struct("BilevelProblem")
            .field("upper_space", &self.upper_space)
            .field("lower_space", &self.lower_space)
            .finish_non_exhaustive()
    }
}

fn space(name: &str, lower: Vec<f64>, upper: Vec<f64>) -> Result<TaskDefinition> {
    let t = TaskDefinition::new(name, lower, upper, Arc::new(|_: &[f64]| 0.0));
    t.validate()?;
    Ok(t)
}

impl BilevelProblem {
    /// `upper_box` and `lower_box` are `(lower bounds, upper bounds)`.
    pub fn new(
        upper_objective: LevelObjective,
        lower_objective: LevelObjective,
        upper_box: (Vec<f64>, Vec<f64>),
        lower_box: (Vec<f64>, Vec<f64>),
    ) -> Result<Self> {
        Ok(Self {
            upper_objective,
            lower_objective,
            upper_space: space("upper", upper_box.0, upper_box.1)?,
            lower_space: space("lower", lower_box.0, lower_box.1)?,
        })
    }

    /// `min_{x_u} max_{x_l} f(x_u, x_l)`.
    pub fn minimax(f: LevelObjective, upper_box: (Vec<f64>, Vec<f64>), lower_box: (Vec<f64>, Vec<f64>)) -> Result<Self> {
        Self::new(f.clone(), f, upper_box, lower_box)
    }

    pub fn upper_value(&self, x_u: &[f64], x_l: &[f64]) -> f64 {
        (self.upper_objective)(x_u, x_l)
    }

    pub fn lower_value(&self, x_u: &[f64], x_l: &[f64]) -> f64 {
        (self.lower_objective)(x_u, x_l)
    }

    pub fn upper_bounds(&self) -> (&[f64], &[f64]) {
        (self.upper_space.lower(), self.upper_space.upper())
    }

    pub fn lower_bounds(&self) -> (&[f64], &[f64]) {
        (self.lower_space.lower(), self.lower_space.upper())
    }

    /// Lower-level task of one upper candidate: maximize `f_l(x_u, .)`.
    pub fn lower_task(&self, x_u: &[f64]) -> TaskDefinition {
        let f = self.lower_objective.clone();
        let x_u = x_u.to_vec();
        TaskDefinition::new(
            "lower",
            self.lower_space.lower().to_vec(),
            self.lower_space.upper().to_vec(),
            Arc::new(move |x_l: &[f64]| f(&x_u, x_l)),
        )
    }
}

/// Built-in bilevel instances, addressable from configuration files.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BilevelPreset {
    /// `f_l = -(x_l - x_u)^2`, `f_u = (x_u - 0.5)^2 + x_l^2` on `[0, 1]^2`;
    /// optimum `x_u = x_l = 0.25`, `f_u = 0.125`.
    CoupledQuadratic,
    /// `f_u` ignores the lower level: `f_u = (x_u - 0.3)^2`.
    Decoupled,
}

impl BilevelPreset {
    pub fn problem(self) -> BilevelProblem {
        let unit = || (alloc::vec![0.0], alloc::vec![1.0]);
        let f_l: LevelObjective = Arc::new(|x_u: &[f64], x_l: &[f64]| -(x_l[0] - x_u[0]) * (x_l[0] - x_u[0]));
        let f_u: LevelObjective = match self {
            BilevelPreset::CoupledQuadratic => {
                Arc::new(|x_u: &[f64], x_l: &[f64]| (x_u[0] - 0.5) * (x_u[0] - 0.5) + x_l[0] * x_l[0])
            }
            BilevelPreset::Decoupled => Arc::new(|x_u: &[f64], _: &[f64]| (x_u[0] - 0.3) * (x_u[0] - 0.3)),
        };
        BilevelProblem::new(f_u, f_l, unit(), unit()).expect("preset boxes are valid")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BilevelConfig {
    /// Upper-level EA; its seed drives the whole solve.
    pub upper: EvolverConfig,
    /// Per-batch settings of the lower-level multitask runs. Its `seed` is
    /// mixed with a per-batch seed drawn from the upper seed.
    pub lower: EvolverConfig,
    #[serde(default)]
    pub lower_options: AdaptiveOptions,
}

impl BilevelConfig {
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.upper.seed = seed;
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BilevelResult {
    pub x_u_best: Vec<f64>,
    pub x_l_best: Vec<f64>,
    pub f_u_best: f64,
    pub f_l_best: f64,
    pub upper_level_evaluations: u64,
    pub lower_level_evaluations: u64,
    /// Upper candidates for which no feasible lower solution was found.
    pub flagged_candidates: u64,
    /// Number of lower-level tasks solved jointly per upper generation.
    pub lower_batch_sizes: Vec<usize>,
    /// Best `f_u` after each upper generation.
    pub upper_trace: Vec<f64>,
}

/// Lower-level solutions for one batch of upper candidates.
#[derive(Debug, Clone, PartialEq)]
pub struct LowerLevelBatch {
    /// Best lower solution of each candidate in the lower box, `None` when
    /// the candidate's lower problem failed.
    pub solutions: Vec<Option<Vec<f64>>>,
    /// `f_l` at each solution (`-inf` when failed).
    pub values: Vec<f64>,
    /// Final lower subpopulation of each candidate, unified genomes ordered
    /// best first.
    pub final_populations: Vec<Vec<Vec<f64>>>,
    pub evaluations: u64,
}

/// Solves the lower problems of all `candidates` as one multitask problem
/// with the adaptive engine, starting candidate `i` from `warm_start[i]`.
/// If the joint run fails, each candidate is retried alone.
pub fn solve_lower_batch(
    problem: &BilevelProblem,
    candidates: &[Vec<f64>],
    config: &EvolverConfig,
    options: &AdaptiveOptions,
    warm_start: &[Vec<Vec<f64>>],
) -> Result<LowerLevelBatch> {
    let tasks: Vec<TaskDefinition> = candidates.iter().map(|x_u| problem.lower_task(x_u)).collect();
    let mto = MultitaskProblem::new(tasks)?;
    let joint = run_adaptive_emt_warm(&mto, config, options, warm_start);
    let mut evaluations: u64 = mto.evaluation_counts().iter().sum();
    let mut batch = LowerLevelBatch {
        solutions: Vec::with_capacity(candidates.len()),
        values: Vec::with_capacity(candidates.len()),
        final_populations: Vec::with_capacity(candidates.len()),
        evaluations: 0,
    };
    match joint {
        Ok(result) => {
            for (task, pop) in mto.tasks().iter().zip(&result.final_populations) {
                push_solution(&mut batch, task, pop);
            }
        }
        Err(_) => {
            for (i, x_u) in candidates.iter().enumerate() {
                let single = MultitaskProblem::new(alloc::vec![problem.lower_task(x_u)])?;
                let warm = warm_start.get(i).map(core::slice::from_ref).unwrap_or(&[]);
                let outcome = run_adaptive_emt_warm(&single, config, options, warm);
                evaluations += single.task(0).evaluations();
                match outcome {
                    Ok(result) => push_solution(&mut batch, single.task(0), &result.final_populations[0]),
                    Err(_) => {
                        batch.solutions.push(None);
                        batch.values.push(f64::NEG_INFINITY);
                        batch.final_populations.push(Vec::new());
                    }
                }
            }
        }
    }
    batch.evaluations = evaluations;
    Ok(batch)
}

fn push_solution(batch: &mut LowerLevelBatch, task: &TaskDefinition, pop: &crate::search::Population) {
    let order = elite_indices(&pop.members, pop.members.len());
    let best = &pop.members[order[0]];
    match (task.decode(&best.genome), best.fitness) {
        (Ok(x_l), Some(value)) if value.is_finite() => {
            batch.solutions.push(Some(x_l));
            batch.values.push(value);
        }
        _ => {
            batch.solutions.push(None);
            batch.values.push(f64::NEG_INFINITY);
        }
    }
    batch.final_populations.push(order.into_iter().map(|i| pop.members[i].genome.clone()).collect());
}

type GenomeKey = Vec<u64>;

fn key(genome: &[f64]) -> GenomeKey {
    genome.iter().map(|v| v.to_bits()).collect()
}

struct BilevelState<'a> {
    problem: &'a BilevelProblem,
    config: &'a BilevelConfig,
    seeds: crate::rng::EngineRng,
    /// Upper genomes of the previous batch and their final lower populations.
    previous: Vec<(Vec<f64>, Vec<Vec<f64>>)>,
    /// Lower solution chosen for every evaluated upper genome.
    archive: BTreeMap<GenomeKey, (Vec<f64>, f64)>,
    best: Option<(Vec<f64>, Vec<f64>, f64, f64)>,
    upper_evaluations: u64,
    lower_evaluations: u64,
    flagged: u64,
    batch_sizes: Vec<usize>,
}

impl BilevelState<'_> {
    fn warm_start(&self, genome: &[f64]) -> Vec<Vec<f64>> {
        let distance = |other: &[f64]| genome.iter().zip(other).map(|(a, b)| (a - b) * (a - b)).sum::<f64>();
        let nearest = self
            .previous
            .iter()
            .min_by(|a, b| distance(&a.0).total_cmp(&distance(&b.0)));
        let keep = (self.config.lower_options.elite_fraction * self.config.lower.pop_size as f64).ceil() as usize;
        nearest.map(|(_, pop)| pop.iter().take(keep).cloned().collect()).unwrap_or_default()
    }

    /// Upper fitness (`-f_u`, maximized) of each genome in the batch.
    fn evaluate(&mut self, genomes: &[Vec<f64>]) -> Result<Vec<f64>> {
        let candidates: Vec<Vec<f64>> =
            genomes.iter().map(|g| self.problem.upper_space.decode(g)).collect::<Result<_>>()?;
        let warm: Vec<Vec<Vec<f64>>> = genomes.iter().map(|g| self.warm_start(g)).collect();
        let mut lower = self.config.lower.clone();
        lower.seed ^= self.seeds.next_u64();
        let batch = solve_lower_batch(self.problem, &candidates, &lower, &self.config.lower_options, &warm)?;
        self.lower_evaluations += batch.evaluations;
        self.batch_sizes.push(genomes.len());

        let mut fitness = Vec::with_capacity(genomes.len());
        for ((x_u, solution), value) in candidates.iter().zip(&batch.solutions).zip(&batch.values) {
            self.upper_evaluations += 1;
            let f_u = solution.as_ref().map(|x_l| self.problem.upper_value(x_u, x_l));
            match (solution, f_u) {
                (Some(x_l), Some(f_u)) if f_u.is_finite() => {
                    if self.best.as_ref().is_none_or(|b| f_u < b.2) {
                        self.best = Some((x_u.clone(), x_l.clone(), f_u, *value));
                    }
                    fitness.push(-f_u);
                }
                _ => {
                    self.flagged += 1;
                    fitness.push(f64::MIN);
                }
            }
        }
        for ((g, solution), value) in genomes.iter().zip(&batch.solutions).zip(&batch.values) {
            if let Some(x_l) = solution {
                self.archive.insert(key(g), (x_l.clone(), *value));
            }
        }
        self.previous = genomes.iter().cloned().zip(batch.final_populations).collect();
        Ok(fitness)
    }
}

/// Nested solve: an upper-level EA proposes candidates; each generation's
/// lower problems are solved jointly as one multitask problem, warm-started
/// from the lower population of the nearest previous candidate; `f_u` is
/// then evaluated at each candidate's best lower solution.
pub fn solve_bilevel(problem: &BilevelProblem, config: &BilevelConfig) -> Result<BilevelResult> {
    config.upper.validate()?;
    config.lower.validate()?;
    config.lower_options.validate()?;
    let mut state = BilevelState {
        problem,
        config,
        seeds: task_rng(config.upper.seed, 1),
        previous: Vec::new(),
        archive: BTreeMap::new(),
        best: None,
        upper_evaluations: 0,
        lower_evaluations: 0,
        flagged: 0,
        batch_sizes: Vec::new(),
    };
    let mut eval = |genomes: &[Vec<f64>]| state.evaluate(genomes);
    let dim = problem.upper_space.dim();
    let mut upper = SingleTaskRun::start(dim, &config.upper, seeded_rng(config.upper.seed), &[], &mut eval)?;
    upper.run_to_end(&mut eval)?;

    let upper_trace = upper.trace().best_fitness.iter().map(|f| -f).collect();
    let best_genome = upper.best().genome.clone();
    let (x_u_best, x_l_best, f_u_best, f_l_best) = match state.archive.get(&key(&best_genome)) {
        Some((x_l, f_l)) => {
            let x_u = problem.upper_space.decode(&best_genome)?;
            let f_u = problem.upper_value(&x_u, x_l);
            (x_u, x_l.clone(), f_u, *f_l)
        }
        None => state
            .best
            .clone()
            .ok_or_else(|| Error::InvalidConfig("no upper candidate had a feasible lower-level solution".into()))?,
    };
    Ok(BilevelResult {
        x_u_best,
        x_l_best,
        f_u_best,
        f_l_best,
        upper_level_evaluations: state.upper_evaluations,
        lower_level_evaluations: state.lower_evaluations,
        flagged_candidates: state.flagged,
        lower_batch_sizes: state.batch_sizes,
        upper_trace,
    })
}

/// The same objective instantiated under several scenarios, one task each.
#[derive(Debug, Clone)]
pub struct ScenarioSet {
    pub scenarios: Vec<TaskDefinition>,
}

pub fn build_multiscenario(set: &ScenarioSet) -> Result<MultitaskProblem> {
    let first = set.scenarios.first().ok_or(Error::NoTasks)?;
    if let Some(k) = set.scenarios.iter().position(|s| !same_space(s, first)) {
        return Err(Error::MismatchedSpaces(format!("scenario {k} differs from scenario 0")));
    }
    MultitaskProblem::new(set.scenarios.clone())
}

/// Best solution of each scenario, decoded into the shared space.
pub fn scenario_bests(problem: &MultitaskProblem, result: &RunResult) -> Result<Vec<Vec<f64>>> {
    problem
        .tasks()
        .iter()
        .zip(&result.best_solutions)
        .map(|(task, genome)| task.decode(genome))
        .collect()
}

/// Shifted copies of one base function, one per scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSpec {
    pub function: BaseFunction,
    pub shifts: Vec<Vec<f64>>,
}

impl ScenarioSpec {
    pub fn set(&self) -> Result<ScenarioSet> {
        let dim = self.shifts.first().map_or(0, Vec::len);
        if dim == 0 || self.shifts.iter().any(|s| s.len() != dim) {
            return Err(Error::MismatchedSpaces("scenario shifts must share one nonzero length".into()));
        }
        let scenarios = self
            .shifts
            .iter()
            .enumerate()
            .map(|(k, s)| {
                let task = shifted_task(self.function, s.clone());
                let name: String = format!("scenario-{k}");
                TaskDefinition::new(name, task.lower().to_vec(), task.upper().to_vec(), task.objective().clone())
            })
            .collect();
        Ok(ScenarioSet { scenarios })
    }

    pub fn build(&self) -> Result<MultitaskProblem> {
        build_multiscenario(&self.set()?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::benchmark::shifted_task;
    use alloc::vec;

    #[test]
    fn high_fidelity_task_is_last() {
        let p = SphereFidelitySpec::new(vec![1.0, -1.0], 0.1).build().unwrap();
        assert_eq!(p.num_tasks(), 2);
        assert_eq!(p.task(1).name(), "sphere-2d");
        assert_eq!(p.cost_weights(), vec![0.1, 1.0]);
    }

    #[test]
    fn low_fidelity_charges_are_weighted() {
        let p = SphereFidelitySpec::new(vec![0.0, 0.0], 0.1).build().unwrap();
        let u = vec![0.5, 0.5];
        for _ in 0..100 {
            p.task(0).evaluate(&u).unwrap();
        }
        assert!((p.weighted_cost() - 10.0).abs() < 1e-12);
    }

    #[test]
    fn mismatched_fidelity_spaces() {
        let high = shifted_task(BaseFunction::Sphere, vec![0.0, 0.0]);
        let low = shifted_task(BaseFunction::Rastrigin, vec![0.0, 0.0]);
        let stack = FidelityStack { high, lows: vec![low], cost_ratios: vec![0.5] };
        assert!(matches!(build_multifidelity(&stack), Err(Error::MismatchedSpaces(_))));
    }

    #[test]
    fn scenario_construction() {
        let spec = ScenarioSpec { function: BaseFunction::Sphere, shifts: vec![vec![1.0, 2.0], vec![0.0, 0.0]] };
        assert_eq!(spec.build().unwrap().num_tasks(), 2);
        let bad = ScenarioSpec { function: BaseFunction::Sphere, shifts: vec![vec![1.0], vec![0.0, 0.0]] };
        assert!(bad.build().is_err());
        assert!(matches!(build_multiscenario(&ScenarioSet { scenarios: vec![] }), Err(Error::NoTasks)));
    }

    #[test]
    fn first_lower_batch_covers_whole_upper_population() {
        let config = BilevelConfig {
            upper: EvolverConfig::new(8, 2).with_seed(3),
            lower: EvolverConfig::new(6, 3),
            lower_options: AdaptiveOptions::default(),
        };
        let r = solve_bilevel(&BilevelPreset::CoupledQuadratic.problem(), &config).unwrap();
        assert_eq!(r.lower_batch_sizes, vec![8, 7, 7]);
        assert_eq!(r.upper_level_evaluations, 8 + 2 * 7);
        assert_eq!(r.lower_level_evaluations, 22 * (6 + 3 * 5));
        assert_eq!(r.flagged_candidates, 0);
    }
}
