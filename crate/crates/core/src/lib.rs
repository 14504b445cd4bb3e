//! Sparsity-based audio declipping.
//!
//! Plain and social (structured) sparse declippers in analysis (cosparse) and
//! synthesis flavors, all instances of one alternating-projection engine,
//! plus the hard-clipping degradation model and SDR-based evaluation.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod error;
pub mod metrics;
pub mod pattern;
pub mod pipeline;
pub mod projection;
pub mod shrinkage;
pub mod signal;
pub mod solver;
pub mod transform;
pub mod wav;

pub use error::{DeclipError, Result};
pub use metrics::{clipped_ratio, evaluate, sdr, EvalReport};
pub use pattern::{Pattern, PatternSet, Profile};
pub use pipeline::{declip_signal, Declipped, PipelineConfig};
pub use signal::{
    clip_to_target_sdr, detect_mask, frame, hard_clip, normalize, overlap_add, ClipMask,
    FrameBlock, Signal, WindowPair,
};
pub use solver::{run_adaptive, run_generic, SolverPreset, SolverResult, Variant};
pub use transform::{TfMatrix, TightFrameDft};
