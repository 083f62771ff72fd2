//! Multitask engines and the transfer-matrix machinery.

mod adaptive;
mod explicit;
mod matrix;
mod mfea;
mod model;

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::search::{Population, RunResult};

pub use adaptive::{run_adaptive_emt, run_adaptive_emt_warm, AdaptiveOptions};
pub use explicit::{map_unified, run_explicit_emt, run_explicit_emt_injected, ExplicitOptions, MigrationEvent};
pub use matrix::{
    em_step, floor_row, log_density_table, row_log_likelihood, update_transfer_matrix, TransferMatrix,
    DIAGONAL_FLOOR,
};
pub use mfea::{assortative_mating, run_mfea, run_mfea_injected, Offspring};
pub use model::{fit_task_model, mixture_density, sample_source, GaussianModel, SIGMA_MIN};

pub use crate::problem::map_between_tasks;

/// Result of a multitask run: per-task traces plus engine-specific logs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultitaskRunResult {
    pub run: RunResult,
    /// Transfer matrix after every generation (adaptive engine only).
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub transfer_trace: Vec<TransferMatrix>,
    /// Every migrant placed by the explicit engine.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub migration_log: Vec<MigrationEvent>,
    /// Crossovers between parents of different skill factors (MFEA only).
    #[serde(default)]
    pub inter_task_crossovers: u64,
    /// Final (sub)populations; one entry for MFEA, one per task otherwise.
    #[serde(skip)]
    pub final_populations: Vec<Population>,
}

impl MultitaskRunResult {
    pub(crate) fn from_run(run: RunResult) -> Self {
        Self {
            run,
            transfer_trace: Vec::new(),
            migration_log: Vec::new(),
            inter_task_crossovers: 0,
            final_populations: Vec::new(),
        }
    }
}
