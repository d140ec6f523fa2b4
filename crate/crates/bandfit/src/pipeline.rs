//! Parallel batch fitting with provenance-ordered results.

use bandfit_core::{fit_kernel, FitResult};
use rayon::prelude::*;
use thiserror::Error;

use crate::ingest::KernelSlice;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("could not start a pool of {jobs} workers: {message}")]
    Pool { jobs: usize, message: String },
    #[error("fitting {tensor}[{filter}, {channel}] failed: {source}")]
    Fit {
        tensor: String,
        filter: usize,
        channel: usize,
        #[source]
        source: bandfit_core::Error,
    },
}

/// Fits every slice on a pool of `jobs` workers. Results come back in slice
/// order regardless of completion order, and each fit is a pure function of
/// its slice, so the output does not depend on `jobs`.
pub fn fit_slices(slices: &[KernelSlice], jobs: usize) -> Result<Vec<FitResult>, PipelineError> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| PipelineError::Pool {
            jobs,
            message: e.to_string(),
        })?;
    pool.install(|| {
        slices
            .par_iter()
            .map(|s| {
                fit_kernel(&s.values).map_err(|source| PipelineError::Fit {
                    tensor: s.tensor_name.clone(),
                    filter: s.filter_index,
                    channel: s.channel_index,
                    source,
                })
            })
            .collect()
    })
}

/// Index of the layer's lower-median non-degenerate slice by rms, ties
/// broken by provenance order.
pub fn representative(slices: &[KernelSlice], fits: &[FitResult], layer_index: usize) -> Option<usize> {
    let mut members: Vec<usize> = (0..slices.len())
        .filter(|&i| slices[i].layer_index == layer_index && !fits[i].degenerate)
        .collect();
    if members.is_empty() {
        return None;
    }
    members.sort_by(|&a, &b| fits[a].rms.total_cmp(&fits[b].rms).then(a.cmp(&b)));
    Some(members[(members.len() - 1) / 2])
}
