//! Shifted synthetic benchmarks with a relatedness knob.
//!
//! Each task is a negated base function shifted to its own optimum. When no
//! explicit shifts are given, the optima are generated in unified
//! coordinates as `c + (1 - relatedness) * (corner_k - c)`: a seeded common
//! center `c` for `relatedness = 1`, box corners for `relatedness = 0`.
//! Task 0 gets the all-zeros corner, task 1 the all-ones corner and further
//! tasks seeded random corners.

use alloc::format;
use alloc::sync::Arc;
use alloc::vec::Vec;
use core::f64::consts::PI;

#[allow(unused_imports)]
use num_traits::Float;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::problem::{MultitaskProblem, TaskDefinition};
use crate::rng::seeded_rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BaseFunction {
    Sphere,
    Rastrigin,
    Ackley,
}

impl BaseFunction {
    /// Minimization form, zero at the origin.
    pub fn value(self, z: &[f64]) -> f64 {
        match self {
            BaseFunction::Sphere => z.iter().map(|v| v * v).sum(),
            BaseFunction::Rastrigin => {
                10.0 * z.len() as f64 + z.iter().map(|v| v * v - 10.0 * (2.0 * PI * v).cos()).sum::<f64>()
            }
            BaseFunction::Ackley => {
                let (a, b, c) = (20.0, 0.2, 2.0 * PI);
                let n = z.len() as f64;
                let sq = z.iter().map(|v| v * v).sum::<f64>() / n;
                let cs = z.iter().map(|v| (c * v).cos()).sum::<f64>() / n;
                // expm1 keeps the optimum at exactly zero
                let value = -a * libm::expm1(-b * sq.sqrt()) - core::f64::consts::E * libm::expm1(cs - 1.0);
                value.max(0.0)
            }
        }
    }

    /// Conventional search box `[-h, h]` for the function.
    pub fn half_width(self) -> f64 {
        match self {
            BaseFunction::Sphere => 5.0,
            BaseFunction::Rastrigin => 5.12,
            BaseFunction::Ackley => 32.768,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            BaseFunction::Sphere => "sphere",
            BaseFunction::Rastrigin => "rastrigin",
            BaseFunction::Ackley => "ackley",
        }
    }
}

/// Maximization task `-base(x - shift)` over the function's standard box.
pub fn shifted_task(function: BaseFunction, shift: Vec<f64>) -> TaskDefinition {
    let dim = shift.len();
    let name = format!("{}-{}d", function.name(), dim);
    let objective = Arc::new(move |x: &[f64]| {
        let z: Vec<f64> = x.iter().zip(&shift).map(|(a, s)| a - s).collect();
        -function.value(&z)
    });
    TaskDefinition::symmetric(name, dim, function.half_width(), objective)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchmarkSpec {
    pub function: BaseFunction,
    pub dims: Vec<usize>,
    /// Explicit per-task optima in task coordinates. Overrides `relatedness`.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub shifts: Vec<Vec<f64>>,
    pub relatedness: f64,
    #[serde(default)]
    pub seed: u64,
}

impl BenchmarkSpec {
    pub fn new(function: BaseFunction, dims: Vec<usize>, relatedness: f64, seed: u64) -> Self {
        Self { function, dims, shifts: Vec::new(), relatedness, seed }
    }

    /// Optima of every task in task coordinates.
    pub fn optima(&self) -> Result<Vec<Vec<f64>>> {
        self.validate()?;
        let h = self.function.half_width();
        if !self.shifts.is_empty() {
            for (k, shift) in self.shifts.iter().enumerate() {
                if let Some(v) = shift.iter().find(|v| !(-h..=h).contains(*v)) {
                    return Err(Error::InvalidBenchmark(format!("shift of task {k} has {v} outside [-{h}, {h}]")));
                }
            }
            return Ok(self.shifts.clone());
        }
        let unified = self.unified_optima();
        Ok(unified
            .iter()
            .zip(&self.dims)
            .map(|(o, &d)| o[..d].iter().map(|t| -h + t * 2.0 * h).collect())
            .collect())
    }

    fn unified_optima(&self) -> Vec<Vec<f64>> {
        let dim = self.dims.iter().copied().max().unwrap_or(0);
        let mut rng = seeded_rng(self.seed);
        let center: Vec<f64> = (0..dim).map(|_| rng.random_range(0.25..0.75)).collect();
        let spread = 1.0 - self.relatedness;
        (0..self.dims.len())
            .map(|k| {
                let corner: Vec<f64> = match k {
                    0 => alloc::vec![0.0; dim],
                    1 => alloc::vec![1.0; dim],
                    _ => (0..dim).map(|_| if rng.random_bool(0.5) { 1.0 } else { 0.0 }).collect(),
                };
                center.iter().zip(&corner).map(|(c, q)| c + spread * (q - c)).collect()
            })
            .collect()
    }

    fn validate(&self) -> Result<()> {
        if self.dims.is_empty() {
            return Err(Error::NoTasks);
        }
        if self.dims.contains(&0) {
            return Err(Error::InvalidBenchmark("zero dimension".into()));
        }
        if !(0.0..=1.0).contains(&self.relatedness) {
            return Err(Error::InvalidBenchmark(format!("relatedness {} outside [0, 1]", self.relatedness)));
        }
        if !self.shifts.is_empty() {
            if self.shifts.len() != self.dims.len() {
                return Err(Error::InvalidBenchmark(format!(
                    "{} shifts for {} tasks",
                    self.shifts.len(),
                    self.dims.len()
                )));
            }
            for (k, (s, &d)) in self.shifts.iter().zip(&self.dims).enumerate() {
                if s.len() != d {
                    return Err(Error::InvalidBenchmark(format!("shift of task {k} has length {}, expected {d}", s.len())));
                }
            }
        }
        Ok(())
    }
}

/// Builds the multitask problem described by `spec`.
pub fn make_benchmark(spec: &BenchmarkSpec) -> Result<MultitaskProblem> {
    let tasks = spec.optima()?.into_iter().map(|shift| shifted_task(spec.function, shift)).collect();
    MultitaskProblem::new(tasks)
}
