//! Tasks, multitask problems and the random-key unified space.
//!
//! Every task `i` owns a box `[lower, upper]` of dimension `d_i`. The unified
//! space is `[0, 1]^D` with `D = max_i d_i`; a task point is encoded by the
//! affine map onto the unit box, and the unused trailing coordinates are
//! padded with `0.5`. Decoding reads only the first `d_i` coordinates.
//!
//! Fitness is always maximized. Wrap minimization objectives by negation.

use alloc::format;
use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec::Vec;
use core::fmt;
use core::sync::atomic::{AtomicU64, Ordering};

use crate::error::{Error, Result};

/// Value written into unified coordinates a task does not use.
pub const PADDING: f64 = 0.5;

/// Pure objective over a task's own search space (maximized).
pub type Objective = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

/// One black-box task: objective, box bounds and an evaluation counter.
pub struct TaskDefinition {
    id: usize,
    name: String,
    objective: Objective,
    lower: Vec<f64>,
    upper: Vec<f64>,
    cost_weight: f64,
    success_threshold: Option<f64>,
    evaluations: AtomicU64,
}

impl TaskDefinition {
    pub fn new(name: impl Into<String>, lower: Vec<f64>, upper: Vec<f64>, objective: Objective) -> Self {
        Self {
            id: 0,
            name: name.into(),
            objective,
            lower,
            upper,
            cost_weight: 1.0,
            success_threshold: None,
            evaluations: AtomicU64::new(0),
        }
    }

    /// Task over the symmetric box `[-half_width, half_width]^dim`.
    pub fn symmetric(name: impl Into<String>, dim: usize, half_width: f64, objective: Objective) -> Self {
        Self::new(name, alloc::vec![-half_width; dim], alloc::vec![half_width; dim], objective)
    }

    /// Relative cost of one evaluation, in units of the most expensive task.
    pub fn with_cost_weight(mut self, weight: f64) -> Self {
        self.cost_weight = weight;
        self
    }

    /// Fitness at or above which a run counts as a success for this task.
    pub fn with_success_threshold(mut self, threshold: f64) -> Self {
        self.success_threshold = Some(threshold);
        self
    }

    pub fn id(&self) -> usize {
        self.id
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn cost_weight(&self) -> f64 {
        self.cost_weight
    }

    pub fn success_threshold(&self) -> Option<f64> {
        self.success_threshold
    }

    pub fn objective(&self) -> &Objective {
        &self.objective
    }

    /// Number of fitness calls made through [`TaskDefinition::evaluate`].
    pub fn evaluations(&self) -> u64 {
        self.evaluations.load(Ordering::Relaxed)
    }

    pub fn reset_evaluations(&self) {
        self.evaluations.store(0, Ordering::Relaxed);
    }

    pub fn validate(&self) -> Result<()> {
        let invalid = |reason: String| Error::InvalidBounds { task: self.id, reason };
        if self.lower.is_empty() {
            return Err(invalid("empty search space".into()));
        }
        if self.lower.len() != self.upper.len() {
            return Err(invalid(format!(
                "{} lower bounds but {} upper bounds",
                self.lower.len(),
                self.upper.len()
            )));
        }
        for (k, (lo, hi)) in self.lower.iter().zip(&self.upper).enumerate() {
            if !lo.is_finite() || !hi.is_finite() || lo >= hi {
                return Err(invalid(format!("coordinate {k}: [{lo}, {hi}]")));
            }
        }
        if !(self.cost_weight > 0.0 && self.cost_weight <= 1.0) {
            return Err(invalid(format!("cost weight {} outside (0, 1]", self.cost_weight)));
        }
        Ok(())
    }

    /// Maps a task-space point into `[0, 1]^unified_dim`.
    pub fn encode(&self, x: &[f64], unified_dim: usize) -> Result<Vec<f64>> {
        let d = self.dim();
        if x.len() != d {
            return Err(Error::DimensionMismatch { expected: d, got: x.len() });
        }
        if unified_dim < d {
            return Err(Error::DimensionMismatch { expected: d, got: unified_dim });
        }
        let mut u = Vec::with_capacity(unified_dim);
        for (k, &value) in x.iter().enumerate() {
            let (lo, hi) = (self.lower[k], self.upper[k]);
            if !(lo..=hi).contains(&value) {
                return Err(Error::OutOfBounds { index: k, value, lower: lo, upper: hi });
            }
            u.push((value - lo) / (hi - lo));
        }
        u.resize(unified_dim, PADDING);
        Ok(u)
    }

    /// Maps a unified point back into the task box, ignoring padding.
    pub fn decode(&self, u: &[f64]) -> Result<Vec<f64>> {
        let d = self.dim();
        if u.len() < d {
            return Err(Error::DimensionMismatch { expected: d, got: u.len() });
        }
        check_unit_box(u)?;
        Ok(self.decode_unchecked(u))
    }

    pub(crate) fn decode_unchecked(&self, u: &[f64]) -> Vec<f64> {
        self.lower
            .iter()
            .zip(&self.upper)
            .zip(u)
            .map(|((lo, hi), t)| lo + t * (hi - lo))
            .collect()
    }

    /// Decodes `u`, calls the objective and counts the evaluation.
    pub fn evaluate(&self, u: &[f64]) -> Result<f64> {
        let x = self.decode(u)?;
        self.evaluations.fetch_add(1, Ordering::Relaxed);
        let value = (self.objective)(&x);
        if value.is_finite() {
            Ok(value)
        } else {
            Err(Error::NonFiniteFitness { task: self.id })
        }
    }
}

impl Clone for TaskDefinition {
    fn clone(&self) -> Self {
        Self {
            id: self.id,
            name: self.name.clone(),
            objective: Arc::clone(&self.objective),
            lower: self.lower.clone(),
            upper: self.upper.clone(),
            cost_weight: self.cost_weight,
            success_threshold: self.success_threshold,
            evaluations: AtomicU64::new(self.evaluations()),
        }
    }
}

impl fmt::Debug for TaskDefinition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TaskDefinition")
            .field("id", &self.id)
            .field("name", &self.name)
            .field("dim", &self.dim())
            .field("cost_weight", &self.cost_weight)
            .field("evaluations", &self.evaluations())
            .finish_non_exhaustive()
    }
}

pub(crate) fn check_unit_box(u: &[f64]) -> Result<()> {
    match u.iter().position(|t| !(0.0..=1.0).contains(t)) {
        Some(index) => Err(Error::OutOfBounds { index, value: u[index], lower: 0.0, upper: 1.0 }),
        None => Ok(()),
    }
}

/// `K` tasks sharing the unified space of dimension `D = max d_i`.
#[derive(Debug, Clone)]
pub struct MultitaskProblem {
    tasks: Vec<TaskDefinition>,
    unified_dim: usize,
}

/// Assigns ids `0..K` in order and fixes the unified dimension.
pub fn assemble_mto(tasks: Vec<TaskDefinition>) -> Result<MultitaskProblem> {
    MultitaskProblem::new(tasks)
}

impl MultitaskProblem {
    pub fn new(mut tasks: Vec<TaskDefinition>) -> Result<Self> {
        if tasks.is_empty() {
            return Err(Error::NoTasks);
        }
        for (id, task) in tasks.iter_mut().enumerate() {
            task.id = id;
            task.validate()?;
        }
        let unified_dim = tasks.iter().map(TaskDefinition::dim).max().unwrap_or(0);
        Ok(Self { tasks, unified_dim })
    }

    pub fn num_tasks(&self) -> usize {
        self.tasks.len()
    }

    pub fn unified_dim(&self) -> usize {
        self.unified_dim
    }

    pub fn tasks(&self) -> &[TaskDefinition] {
        &self.tasks
    }

    pub fn task(&self, id: usize) -> &TaskDefinition {
        &self.tasks[id]
    }

    pub fn evaluation_counts(&self) -> Vec<u64> {
        self.tasks.iter().map(TaskDefinition::evaluations).collect()
    }

    pub fn reset_counters(&self) {
        self.tasks.iter().for_each(TaskDefinition::reset_evaluations);
    }

    /// Evaluations weighted by each task's cost, i.e. in units of the most
    /// expensive task.
    pub fn weighted_cost(&self) -> f64 {
        self.tasks.iter().map(|t| t.evaluations() as f64 * t.cost_weight()).sum()
    }

    pub fn cost_weights(&self) -> Vec<f64> {
        self.tasks.iter().map(TaskDefinition::cost_weight).collect()
    }

    /// Encode in `source`, decode in `dest`.
    pub fn map_between(&self, x: &[f64], source: usize, dest: usize) -> Result<Vec<f64>> {
        map_between_tasks(x, &self.tasks[source], &self.tasks[dest])
    }
}

/// Composes encode in `source` with decode in `dest` through the unified box.
///
/// Dimensions the destination has beyond the source land at its box
/// midpoint; surplus source coordinates are dropped.
pub fn map_between_tasks(x: &[f64], source: &TaskDefinition, dest: &TaskDefinition) -> Result<Vec<f64>> {
    let dim = source.dim().max(dest.dim());
    let u = source.encode(x, dim)?;
    dest.decode(&u)
}
