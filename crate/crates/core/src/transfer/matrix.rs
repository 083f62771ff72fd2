//! Row-stochastic transfer coefficients and their expectation-maximization
//! update.
//!
//! Row `i` holds the mixture weights with which task `i` samples from the
//! search models of all tasks. The update treats the models as fixed
//! mixture components and re-estimates the weights from where task `i`'s
//! current elites actually lie: a source whose model explains the elites
//! gains weight, one that does not decays towards zero. The diagonal never
//! drops below a floor so a task always keeps sampling from itself.

use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;
use serde::{Deserialize, Serialize};

use super::model::GaussianModel;
use crate::error::{Error, Result};

/// Minimum weight of a task on its own model.
pub const DIAGONAL_FLOOR: f64 = 0.05;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransferMatrix {
    size: usize,
    weights: Vec<f64>,
}

impl TransferMatrix {
    /// Every row uniform over the `k` tasks.
    pub fn uniform(k: usize) -> Self {
        Self { size: k, weights: vec![1.0 / k as f64; k * k] }
    }

    pub fn identity(k: usize) -> Self {
        let mut weights = vec![0.0; k * k];
        (0..k).for_each(|i| weights[i * k + i] = 1.0);
        Self { size: k, weights }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let k = rows.len();
        if rows.iter().any(|r| r.len() != k) {
            return Err(Error::InvalidConfig("transfer matrix must be square".into()));
        }
        let m = Self { size: k, weights: rows.concat() };
        if !m.is_stochastic(1e-9) {
            return Err(Error::InvalidConfig("rows must be nonnegative and sum to one".into()));
        }
        Ok(m)
    }

    pub fn num_tasks(&self) -> usize {
        self.size
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.weights[i * self.size..(i + 1) * self.size]
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.weights[i * self.size + j]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.weights.chunks(self.size)
    }

    fn set_row(&mut self, i: usize, row: &[f64]) {
        self.weights[i * self.size..(i + 1) * self.size].copy_from_slice(row);
    }

    /// Nonnegative entries and unit row sums within `tol`.
    pub fn is_stochastic(&self, tol: f64) -> bool {
        self.rows()
            .all(|r| r.iter().all(|w| *w >= 0.0) && (r.iter().sum::<f64>() - 1.0).abs() <= tol)
    }

    /// Mean of the off-diagonal entries; zero for a single task.
    pub fn mean_off_diagonal(&self) -> f64 {
        let k = self.size;
        if k < 2 {
            return 0.0;
        }
        let total: f64 = (0..k)
            .flat_map(|i| (0..k).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| self.get(i, j))
            .sum();
        total / (k * (k - 1)) as f64
    }
}

/// `table[p][j] = log p_j(points[p])`.
pub fn log_density_table(points: &[Vec<f64>], models: &[GaussianModel]) -> Vec<Vec<f64>> {
    points.iter().map(|x| models.iter().map(|m| m.log_density(x)).collect()).collect()
}

fn log_sum_exp(terms: impl Iterator<Item = f64> + Clone) -> f64 {
    let max = terms.clone().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    max + terms.map(|t| (t - max).exp()).sum::<f64>().ln()
}

fn weighted_terms<'a>(row: &'a [f64], log_dens: &'a [f64]) -> impl Iterator<Item = f64> + Clone + 'a {
    row.iter().zip(log_dens).map(|(w, l)| if *w > 0.0 { w.ln() + l } else { f64::NEG_INFINITY })
}

/// Log-likelihood of the table's points under the mixture `row`, skipping
/// points no component can explain.
pub fn row_log_likelihood(row: &[f64], table: &[Vec<f64>]) -> f64 {
    table
        .iter()
        .map(|l| log_sum_exp(weighted_terms(row, l)))
        .filter(|v| v.is_finite())
        .sum()
}

/// One EM step on the mixture weights with fixed components. Returns the
/// unfloored new weights; points with zero mixture density are dropped.
pub fn em_step(row: &[f64], table: &[Vec<f64>]) -> Vec<f64> {
    let mut acc = vec![0.0; row.len()];
    let mut used = 0usize;
    for (p, log_dens) in table.iter().enumerate() {
        let total = log_sum_exp(weighted_terms(row, log_dens));
        if !total.is_finite() {
            log::warn!("transfer update: point {p} has zero density under every model, dropped");
            continue;
        }
        for (a, term) in acc.iter_mut().zip(weighted_terms(row, log_dens)) {
            *a += (term - total).exp();
        }
        used += 1;
    }
    if used == 0 {
        return row.to_vec();
    }
    let n = used as f64;
    let mut next: Vec<f64> = acc.into_iter().map(|a| a / n).collect();
    let sum: f64 = next.iter().sum();
    next.iter_mut().for_each(|w| *w /= sum);
    next
}

/// Raises `row[i]` to at least `floor` and rescales the other entries so the
/// row still sums to one.
pub fn floor_row(row: &[f64], i: usize, floor: f64) -> Vec<f64> {
    let diag = row[i].max(floor).min(1.0);
    let off: f64 = row.iter().enumerate().filter(|(j, _)| *j != i).map(|(_, w)| w).sum();
    row.iter()
        .enumerate()
        .map(|(j, &w)| {
            if j == i {
                diag
            } else if off > 0.0 {
                w * (1.0 - diag) / off
            } else {
                0.0
            }
        })
        .collect()
}

/// `steps` floored EM steps on every row of `w`, using task `i`'s elites
/// against all task models.
pub fn update_transfer_matrix(
    w: &TransferMatrix,
    elites: &[Vec<Vec<f64>>],
    models: &[GaussianModel],
    steps: usize,
    diagonal_floor: f64,
) -> Result<TransferMatrix> {
    let k = w.num_tasks();
    if elites.len() != k || models.len() != k {
        return Err(Error::DimensionMismatch { expected: k, got: elites.len().min(models.len()) });
    }
    let mut next = w.clone();
    for (i, task_elites) in elites.iter().enumerate() {
        if task_elites.is_empty() {
            return Err(Error::InvalidConfig("every task needs at least one elite".into()));
        }
        let table = log_density_table(task_elites, models);
        let mut row = w.row(i).to_vec();
        for _ in 0..steps {
            row = floor_row(&em_step(&row, &table), i, diagonal_floor);
        }
        next.set_row(i, &row);
    }
    Ok(next)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded_rng;
    use rand::Rng;

    fn model(mean: f64, sd: f64, dim: usize) -> GaussianModel {
        GaussianModel { mean: vec![mean; dim], stdev: vec![sd; dim] }
    }

    #[test]
    fn single_task_stays_one() {
        let m = vec![model(0.4, 0.1, 2)];
        let elites = vec![vec![vec![0.1, 0.2], vec![0.9, 0.8]]];
        let w = update_transfer_matrix(&TransferMatrix::uniform(1), &elites, &m, 5, DIAGONAL_FLOOR).unwrap();
        assert_eq!(w.row(0), &[1.0]);
    }

    #[test]
    fn identical_models_are_a_fixed_point() {
        let models = vec![model(0.5, 0.2, 3); 3];
        let w0 = TransferMatrix::from_rows(&[vec![0.5, 0.3, 0.2], vec![0.1, 0.6, 0.3], vec![0.25, 0.25, 0.5]]).unwrap();
        let mut rng = seeded_rng(4);
        let elites: Vec<Vec<Vec<f64>>> =
            (0..3).map(|_| (0..8).map(|_| (0..3).map(|_| rng.random::<f64>()).collect()).collect()).collect();
        let w1 = update_transfer_matrix(&w0, &elites, &models, 1, DIAGONAL_FLOOR).unwrap();
        for (a, b) in w0.rows().flatten().zip(w1.rows().flatten()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn far_source_takes_over_after_repeated_updates() {
        let models = vec![model(0.1, 0.05, 2), model(0.9, 0.05, 2)];
        let mut rng = seeded_rng(1);
        let from_one: Vec<Vec<f64>> = (0..30).map(|_| models[1].sample(&mut rng)).collect();
        let from_zero: Vec<Vec<f64>> = (0..30).map(|_| models[0].sample(&mut rng)).collect();
        let elites = vec![from_one, from_zero];
        let mut w = TransferMatrix::uniform(2);
        for _ in 0..50 {
            w = update_transfer_matrix(&w, &elites, &models, 1, DIAGONAL_FLOOR).unwrap();
        }
        assert!(w.get(0, 1) > 0.94 && w.get(1, 0) > 0.94, "{w:?}");
        assert!((w.get(0, 0) - DIAGONAL_FLOOR).abs() < 1e-12);
    }

    #[test]
    fn floor_keeps_simplex() {
        let row = floor_row(&[0.01, 0.59, 0.4], 0, 0.05);
        assert_eq!(row[0], 0.05);
        assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert_eq!(floor_row(&[0.0, 1.0], 1, 0.05), vec![0.0, 1.0]);
    }

    #[test]
    fn unexplainable_points_are_dropped() {
        let models = vec![model(0.5, 0.1, 1), model(0.5, 0.1, 1)];
        let table = log_density_table(&[vec![0.5], vec![2.0]], &models);
        let next = em_step(&[0.3, 0.7], &table);
        assert!((next[0] - 0.3).abs() < 1e-12);
        assert!(row_log_likelihood(&[0.3, 0.7], &table).is_finite());
    }

    #[test]
    fn off_diagonal_mean() {
        let w = TransferMatrix::from_rows(&[vec![0.8, 0.2], vec![0.4, 0.6]]).unwrap();
        assert!((w.mean_off_diagonal() - 0.3).abs() < 1e-12);
        assert!(TransferMatrix::from_rows(&[vec![0.8, 0.3], vec![0.4, 0.6]]).is_err());
    }
}
