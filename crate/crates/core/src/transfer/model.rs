//! Diagonal Gaussian search models over the unified box, truncated to
//! `[0, 1]^D`.

use alloc::vec::Vec;
use core::f64::consts::{PI, SQRT_2};

#[allow(unused_imports)]
use num_traits::Float;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Lower bound on every fitted standard deviation.
pub const SIGMA_MIN: f64 = 0.01;

const MAX_REJECTIONS: usize = 64;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianModel {
    pub mean: Vec<f64>,
    pub stdev: Vec<f64>,
}

/// Coordinate-wise sample mean and (n - 1) standard deviation of the
/// elites, with the deviation floored at `sigma_min`.
pub fn fit_task_model(elites: &[Vec<f64>], sigma_min: f64) -> Result<GaussianModel> {
    if elites.len() < 2 {
        return Err(Error::DegenerateModel(elites.len()));
    }
    let dim = elites[0].len();
    if let Some(bad) = elites.iter().find(|e| e.len() != dim) {
        return Err(Error::DimensionMismatch { expected: dim, got: bad.len() });
    }
    let n = elites.len() as f64;
    let mean: Vec<f64> = (0..dim).map(|k| elites.iter().map(|e| e[k]).sum::<f64>() / n).collect();
    let stdev = (0..dim)
        .map(|k| {
            let var = elites.iter().map(|e| (e[k] - mean[k]).powi(2)).sum::<f64>() / (n - 1.0);
            var.sqrt().max(sigma_min)
        })
        .collect();
    Ok(GaussianModel { mean, stdev })
}

fn std_normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / SQRT_2)
}

impl GaussianModel {
    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    /// Log density of the truncated model at `u`; `-inf` outside the box.
    pub fn log_density(&self, u: &[f64]) -> f64 {
        let half_log_two_pi = 0.5 * (2.0 * PI).ln();
        let mut total = 0.0;
        for ((&x, &mu), &sigma) in u.iter().zip(&self.mean).zip(&self.stdev) {
            if !(0.0..=1.0).contains(&x) {
                return f64::NEG_INFINITY;
            }
            let z = (x - mu) / sigma;
            let mass = std_normal_cdf((1.0 - mu) / sigma) - std_normal_cdf(-mu / sigma);
            total += -0.5 * z * z - sigma.ln() - half_log_two_pi - mass.ln();
        }
        total
    }

    pub fn density(&self, u: &[f64]) -> f64 {
        self.log_density(u).exp()
    }

    /// Draws from the truncated model by per-coordinate rejection, falling
    /// back to clamping after a bounded number of tries.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        self.mean
            .iter()
            .zip(&self.stdev)
            .map(|(&mu, &sigma)| {
                let mut draw = mu;
                for _ in 0..MAX_REJECTIONS {
                    let z: f64 = rng.sample(StandardNormal);
                    draw = mu + sigma * z;
                    if (0.0..=1.0).contains(&draw) {
                        return draw;
                    }
                }
                draw.clamp(0.0, 1.0)
            })
            .collect()
    }
}

/// `sum_j w_row[j] * p_j(u)`.
pub fn mixture_density(u: &[f64], models: &[GaussianModel], w_row: &[f64]) -> f64 {
    models.iter().zip(w_row).map(|(m, w)| if *w > 0.0 { w * m.density(u) } else { 0.0 }).sum()
}

/// Index `j` drawn with probability `row[j]`.
pub fn sample_source<R: Rng + ?Sized>(row: &[f64], rng: &mut R) -> usize {
    let draw = rng.random::<f64>() * row.iter().sum::<f64>();
    let mut acc = 0.0;
    for (j, w) in row.iter().enumerate() {
        acc += w;
        if draw < acc {
            return j;
        }
    }
    row.iter().rposition(|w| *w > 0.0).unwrap_or(0)
}
