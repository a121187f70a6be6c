//! Parameter sweeps.

use std::sync::atomic::{AtomicU32, Ordering};

use rayon::prelude::*;
use swarmupdate_core::{run_scenario, MetricsRecord, ScenarioConfig, ScenarioError};

#[derive(Debug, thiserror::Error)]
#[error("{strategy} size {size} failure {failure_rate} rep {rep}: {source}")]
pub struct SweepError {
    pub strategy: swarmupdate_core::Strategy,
    pub size: usize,
    pub failure_rate: f64,
    pub rep: u32,
    pub source: ScenarioError,
}

/// A grid cell whose repetitions have all finished.
#[derive(Debug, Clone, Copy)]
pub struct CellDone<'a> {
    pub index: usize,
    pub cells: usize,
    pub config: &'a ScenarioConfig,
    pub converged: u32,
}

/// Runs every repetition of every cell, in parallel, and returns the records
/// in grid order. Runs that do not converge are kept with `converged` unset;
/// any other failure stops the sweep.
pub fn run_sweep<F>(cells: &[ScenarioConfig], on_cell: F) -> Result<Vec<MetricsRecord>, SweepError>
where
    F: Fn(CellDone<'_>) + Sync,
{
    let jobs: Vec<(usize, u32)> = cells
        .iter()
        .enumerate()
        .flat_map(|(i, c)| (0..c.repetitions).map(move |r| (i, r)))
        .collect();
    let finished: Vec<AtomicU32> = cells.iter().map(|_| AtomicU32::new(0)).collect();
    let converged: Vec<AtomicU32> = cells.iter().map(|_| AtomicU32::new(0)).collect();
    jobs.par_iter()
        .map(|&(i, rep)| {
            let config = &cells[i];
            let record = match run_scenario(config, rep) {
                Ok(record) => record,
                Err(ScenarioError::NotConverged { record, .. }) => *record,
                Err(source) => {
                    return Err(SweepError {
                        strategy: config.strategy,
                        size: config.swarm_size,
                        failure_rate: config.failure_rate,
                        rep,
                        source,
                    })
                }
            };
            if record.converged {
                converged[i].fetch_add(1, Ordering::SeqCst);
            }
            if finished[i].fetch_add(1, Ordering::SeqCst) + 1 == config.repetitions {
                on_cell(CellDone {
                    index: i,
                    cells: cells.len(),
                    config,
                    converged: converged[i].load(Ordering::SeqCst),
                });
            }
            Ok(record)
        })
        .collect()
}
