//! Data-parallel helpers with a sequential fallback.
//!
//! With the `parallel` feature (on by default) [`Execution::Parallel`] runs on
//! the rayon global pool; without it every call runs sequentially. Results
//! are identical either way.

use crate::kinematics::{solve_gaze, AttentionTarget, GazeSolution, HeadGeometry, IKParams, JointVector, KinematicsError};
use crate::scenario::{run_block, ScenarioError, ScenarioScript, TrialMetrics};
use crate::scene::Timeline;

#[cfg(feature = "parallel")]
use rayon::prelude::*;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Execution {
    Sequential,
    Parallel,
}

impl Execution {
    /// Parallel when compiled with the `parallel` feature.
    pub fn auto() -> Self {
        if cfg!(feature = "parallel") {
            Execution::Parallel
        } else {
            Execution::Sequential
        }
    }

    pub fn map<T, R, F>(self, items: &[T], f: F) -> Vec<R>
    where
        T: Sync,
        R: Send,
        F: Fn(&T) -> R + Sync + Send,
    {
        match self {
            #[cfg(feature = "parallel")]
            Execution::Parallel => items.par_iter().map(f).collect(),
            _ => items.iter().map(f).collect(),
        }
    }

    /// Calls `f(index, chunk)` for each `chunk_len` slice of `buf`.
    pub fn for_each_chunk_mut<F>(self, buf: &mut [u8], chunk_len: usize, f: F)
    where
        F: Fn(usize, &mut [u8]) + Sync + Send,
    {
        match self {
            #[cfg(feature = "parallel")]
            Execution::Parallel => buf.par_chunks_mut(chunk_len).enumerate().for_each(|(i, c)| f(i, c)),
            _ => buf.chunks_mut(chunk_len).enumerate().for_each(|(i, c)| f(i, c)),
        }
    }
}

/// Solves every target independently from `q0`.
pub fn solve_gaze_batch(
    q0: &JointVector,
    geom: &HeadGeometry,
    targets: &[AttentionTarget],
    params: &IKParams,
    exec: Execution,
) -> Vec<Result<GazeSolution, KinematicsError>> {
    exec.map(targets, |t| solve_gaze(q0, geom, t, params))
}

/// A block with its per-trial stop times.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockJob {
    pub script: ScenarioScript,
    pub stops: Vec<Option<f64>>,
}

/// Runs independent blocks, one task per block.
pub fn run_blocks(
    jobs: &[BlockJob],
    tick_rate: f64,
    timeline: &Timeline,
    exec: Execution,
) -> Vec<Result<Vec<TrialMetrics>, ScenarioError>> {
    exec.map(jobs, |job| run_block(&job.script, &job.stops, tick_rate, timeline))
}
