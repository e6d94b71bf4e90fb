use serde::Serialize;

use super::{PipelineError, Result};

/// Which source frames to keep: `indices[j]` is the center of the `j`-th of
/// `sampled` equal segments.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SamplingPlan {
    pub total_frames: usize,
    pub sampled: usize,
    pub indices: Vec<usize>,
}

/// `index_j = floor((j + 0.5) · total / sampled)`, in exact integer arithmetic.
pub fn sample_frame_indices(total_frames: usize, sampled: usize) -> Result<SamplingPlan> {
    if sampled == 0 {
        return Err(PipelineError::InvalidInput(
            "frame count must be positive".into(),
        ));
    }
    if total_frames < sampled {
        return Err(PipelineError::InsufficientFrames {
            total: total_frames,
            requested: sampled,
        });
    }
    let (total, m) = (total_frames as u128, sampled as u128);
    let indices = (0..m)
        .map(|j| ((2 * j + 1) * total / (2 * m)) as usize)
        .collect();
    Ok(SamplingPlan {
        total_frames,
        sampled,
        indices,
    })
}
