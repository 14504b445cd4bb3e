//! Whole-signal declipping: frame, solve each clipped frame (alone or inside a
//! block of neighbors), overlap-add the estimated frames.

use ndarray::{s, Array2};
use rayon::prelude::*;

use crate::error::{DeclipError, Result};
use crate::pattern::Profile;
use crate::signal::{detect_mask, frame, overlap_add, ClipMask, FrameBlock, SampleClass, Signal, WindowPair};
use crate::solver::{solve_block, Model, SolverPreset};
use crate::transform::TightFrameDft;

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub profile: Profile,
    pub preset: SolverPreset,
    /// Overrides the profile's frame duration (samples, multiple of 4).
    pub frame_len: Option<usize>,
    /// Overrides the profile's block half-width `T` for social models.
    pub block_half_width: Option<usize>,
    /// Relative tolerance for detecting clipped samples.
    pub detect_eps: f64,
    pub parallel: bool,
}

impl PipelineConfig {
    pub fn new(profile: Profile, preset: SolverPreset) -> Self {
        Self {
            profile,
            preset,
            frame_len: None,
            block_half_width: None,
            detect_eps: 0.0,
            parallel: true,
        }
    }

    /// 64 ms frames for music, 32 ms for speech, rounded to a multiple of 4.
    pub fn frame_len_for(&self, sample_rate: u32) -> usize {
        if let Some(len) = self.frame_len {
            return len;
        }
        let secs = match self.profile {
            Profile::Music => 0.064,
            Profile::Speech => 0.032,
        };
        let len = (secs * sample_rate as f64 / 4.0).round() as usize * 4;
        len.max(4)
    }

    /// Number of frames on each side of the estimated frame.
    pub fn block_half_width(&self) -> usize {
        match self.preset.model {
            Model::Plain => 0,
            _ => self.block_half_width.unwrap_or(match self.profile {
                Profile::Music => 5,
                Profile::Speech => 1,
            }),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrameStat {
    pub frame: usize,
    pub iterations: usize,
    pub warmup_iterations: usize,
    pub final_residual: f64,
    pub selected_pattern: Option<usize>,
}

#[derive(Debug, Clone)]
pub struct Declipped {
    pub signal: Signal,
    pub frame_count: usize,
    /// One entry per frame that went through the solver, in frame order.
    pub stats: Vec<FrameStat>,
}

impl Declipped {
    pub fn total_iterations(&self) -> usize {
        self.stats.iter().map(|s| s.iterations + s.warmup_iterations).sum()
    }

    pub fn bypassed_frames(&self) -> usize {
        self.frame_count - self.stats.len()
    }
}

fn extract_block(frames: &FrameBlock, mask: &ClipMask, center: usize, half: usize) -> (FrameBlock, ClipMask) {
    let (len, count) = frames.data.dim();
    let width = 2 * half + 1;
    let mut data = Array2::<f64>::zeros((len, width));
    let mut classes = Array2::from_elem((len, width), SampleClass::Reliable);
    for j in 0..width {
        let Some(src) = (center + j).checked_sub(half).filter(|s| *s < count) else {
            continue;
        };
        data.column_mut(j).assign(&frames.data.column(src));
        classes.column_mut(j).assign(&mask.classes.column(src));
    }
    (
        FrameBlock {
            data,
            hop: frames.hop,
            center: half,
        },
        ClipMask { tau: mask.tau, classes },
    )
}

type SolvedFrame = (Vec<f64>, FrameStat);

/// Restores a signal clipped at `tau`. Frames without clipped samples are
/// passed through untouched.
pub fn declip_signal(y: &Signal, tau: f64, config: &PipelineConfig) -> Result<Declipped> {
    if !(tau > 0.0) {
        return Err(DeclipError::InvalidThreshold(tau));
    }
    config.preset.validate()?;
    let frame_len = config.frame_len_for(y.sample_rate());
    let win = WindowPair::sqrt_hamming(frame_len)?;
    let op = TightFrameDft::twice_redundant(frame_len)?;
    let framed = frame(y, &win);
    let mask = detect_mask(&framed.raw, tau, config.detect_eps);
    let half = config.block_half_width();

    let solve = |t: usize| -> Result<Option<SolvedFrame>> {
        if mask.column_is_reliable(t) {
            return Ok(None);
        }
        let (block, block_mask) = extract_block(&framed.frames, &mask, t, half);
        let result = solve_block(&block, &block_mask, &config.preset, &op)?;
        let column = result.frames_out.data.slice(s![.., half]).to_vec();
        Ok(Some((
            column,
            FrameStat {
                frame: t,
                iterations: result.iterations,
                warmup_iterations: result.warmup_iterations,
                final_residual: result.final_residual,
                selected_pattern: result.selected_pattern,
            },
        )))
    };

    let count = framed.layout.frame_count;
    let outcomes: Vec<Result<Option<SolvedFrame>>> = if config.parallel {
        (0..count).into_par_iter().map(solve).collect()
    } else {
        (0..count).map(solve).collect()
    };

    let mut out = framed.frames.clone();
    let mut stats = Vec::new();
    for outcome in outcomes {
        if let Some((column, stat)) = outcome? {
            out.data
                .column_mut(stat.frame)
                .iter_mut()
                .zip(column)
                .for_each(|(d, v)| *d = v);
            stats.push(stat);
        }
    }
    let signal = overlap_add(&out, &win, &framed.layout)?;
    Ok(Declipped {
        signal,
        frame_count: count,
        stats,
    })
}
