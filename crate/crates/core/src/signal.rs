//! Time-domain signal handling: normalization, hard clipping, framing with
//! analysis windows and overlap-add reconstruction.

use std::f64::consts::PI;

use ndarray::{Array2, ArrayView1, Axis};

use crate::error::{DeclipError, Result};
use crate::metrics::sdr_samples;

/// Mono audio in double precision.
#[derive(Debug, Clone, PartialEq)]
pub struct Signal {
    samples: Vec<f64>,
    sample_rate: u32,
}

impl Signal {
    pub fn new(samples: Vec<f64>, sample_rate: u32) -> Result<Self> {
        if sample_rate == 0 {
            return Err(DeclipError::DegenerateSignal("sample rate is 0".into()));
        }
        if let Some(i) = samples.iter().position(|v| !v.is_finite()) {
            return Err(DeclipError::DegenerateSignal(format!(
                "non-finite sample at index {i}"
            )));
        }
        Ok(Self {
            samples,
            sample_rate,
        })
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<f64> {
        self.samples
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_secs(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate as f64
    }

    pub fn peak(&self) -> f64 {
        self.samples.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    fn with_samples(&self, samples: Vec<f64>) -> Self {
        Self {
            samples,
            sample_rate: self.sample_rate,
        }
    }
}

/// Scales the signal so its peak magnitude is exactly 1.
pub fn normalize(signal: &Signal) -> Result<Signal> {
    let peak = signal.peak();
    if peak == 0.0 {
        return Err(DeclipError::DegenerateSignal(
            "cannot normalize an all-zero signal".into(),
        ));
    }
    Ok(signal.with_samples(
        signal
            .samples
            .iter()
            .map(|v| if v.abs() == peak { v.signum() } else { v / peak })
            .collect(),
    ))
}

pub fn hard_clip_samples(samples: &[f64], tau: f64) -> Vec<f64> {
    samples.iter().map(|&v| v.clamp(-tau, tau)).collect()
}

/// Hard clipping at `±tau`.
pub fn hard_clip(signal: &Signal, tau: f64) -> Result<Signal> {
    if !(tau > 0.0) {
        return Err(DeclipError::InvalidThreshold(tau));
    }
    Ok(signal.with_samples(hard_clip_samples(&signal.samples, tau)))
}

pub const CLIP_BISECTION_STEPS: usize = 200;
pub const DEFAULT_SDR_TOLERANCE_DB: f64 = 0.01;

/// Finds the clipping threshold that degrades `signal` to `target_sdr` dB
/// (within `tol`) by bisection on `tau` in (0, 1). The input must be
/// normalized. An infinite target returns an unclipped copy with `tau = 1`.
pub fn clip_to_target_sdr(signal: &Signal, target_sdr: f64, tol: f64) -> Result<(Signal, f64)> {
    if signal.peak() == 0.0 {
        return Err(DeclipError::DegenerateSignal("all-zero signal".into()));
    }
    if target_sdr == f64::INFINITY {
        return Ok((signal.clone(), 1.0));
    }
    let unreachable = |low_tau: f64, high_tau: f64, low_sdr: f64, high_sdr: f64| {
        DeclipError::TargetUnreachable {
            target: target_sdr,
            low_tau,
            high_tau,
            low_sdr,
            high_sdr,
        }
    };
    if !(target_sdr > 0.0) || !(tol > 0.0) {
        return Err(unreachable(0.0, 1.0, 0.0, f64::INFINITY));
    }

    let eval = |tau: f64| sdr_samples(&signal.samples, &hard_clip_samples(&signal.samples, tau));
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    let (mut lo_sdr, mut hi_sdr) = (0.0f64, eval(1.0)?);
    for _ in 0..CLIP_BISECTION_STEPS {
        let mid = 0.5 * (lo + hi);
        let s = eval(mid)?;
        if (s - target_sdr).abs() <= tol {
            return Ok((signal.with_samples(hard_clip_samples(&signal.samples, mid)), mid));
        }
        if s < target_sdr {
            lo = mid;
            lo_sdr = s;
        } else {
            hi = mid;
            hi_sdr = s;
        }
    }
    Err(unreachable(lo, hi, lo_sdr, hi_sdr))
}

/// Analysis/synthesis window pair with its overlap-add normalization.
#[derive(Debug, Clone)]
pub struct WindowPair {
    analysis: Vec<f64>,
    synthesis: Vec<f64>,
    hop: usize,
    cola_constant: f64,
}

const COLA_TOLERANCE: f64 = 1e-12;

impl WindowPair {
    /// Builds a pair and checks the constant-overlap-add condition at `hop`.
    pub fn new(analysis: Vec<f64>, synthesis: Vec<f64>, hop: usize) -> Result<Self> {
        let len = analysis.len();
        if len == 0 || synthesis.len() != len {
            return Err(DeclipError::InvalidWindow(format!(
                "analysis/synthesis lengths {} / {}",
                len,
                synthesis.len()
            )));
        }
        if hop == 0 || !len.is_multiple_of(hop) {
            return Err(DeclipError::InvalidWindow(format!(
                "hop {hop} must divide frame length {len}"
            )));
        }
        let sums: Vec<f64> = (0..hop)
            .map(|n| {
                (n..len)
                    .step_by(hop)
                    .map(|m| analysis[m] * synthesis[m])
                    .sum()
            })
            .collect();
        let cola_constant = sums.iter().sum::<f64>() / hop as f64;
        if !(cola_constant > 0.0) {
            return Err(DeclipError::InvalidWindow("zero overlap-add gain".into()));
        }
        if let Some(bad) = sums
            .iter()
            .find(|s| ((*s - cola_constant) / cola_constant).abs() > COLA_TOLERANCE)
        {
            return Err(DeclipError::InvalidWindow(format!(
                "window pair is not COLA at hop {hop}: sum {bad} vs {cola_constant}"
            )));
        }
        Ok(Self {
            analysis,
            synthesis,
            hop,
            cola_constant,
        })
    }

    /// Square-root periodic Hamming window for both analysis and synthesis,
    /// 75 % overlap.
    pub fn sqrt_hamming(frame_len: usize) -> Result<Self> {
        if frame_len < 4 || !frame_len.is_multiple_of(4) {
            return Err(DeclipError::InvalidWindow(format!(
                "frame length {frame_len} must be a positive multiple of 4"
            )));
        }
        let w: Vec<f64> = (0..frame_len)
            .map(|n| (0.54 - 0.46 * (2.0 * PI * n as f64 / frame_len as f64).cos()).sqrt())
            .collect();
        Self::new(w.clone(), w, frame_len / 4)
    }

    /// Flat windows, mostly useful in tests.
    pub fn rectangular(frame_len: usize, hop: usize) -> Result<Self> {
        Self::new(vec![1.0; frame_len], vec![1.0; frame_len], hop)
    }

    pub fn analysis(&self) -> &[f64] {
        &self.analysis
    }

    pub fn synthesis(&self) -> &[f64] {
        &self.synthesis
    }

    pub fn frame_len(&self) -> usize {
        self.analysis.len()
    }

    pub fn hop(&self) -> usize {
        self.hop
    }

    pub fn cola_constant(&self) -> f64 {
        self.cola_constant
    }
}

/// Real `L x G` matrix whose columns are frames. `center` is the 0-based
/// column a block solve estimates.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameBlock {
    pub data: Array2<f64>,
    pub hop: usize,
    pub center: usize,
}

impl FrameBlock {
    pub fn new(data: Array2<f64>, hop: usize, center: usize) -> Result<Self> {
        let (len, count) = data.dim();
        if count == 0 || center >= count {
            return Err(DeclipError::Shape(format!(
                "block of {count} frames with center {center}"
            )));
        }
        if hop == 0 || !len.is_multiple_of(hop) {
            return Err(DeclipError::Shape(format!(
                "hop {hop} must divide frame length {len}"
            )));
        }
        Ok(Self { data, hop, center })
    }

    /// A single frame as a one-column block.
    pub fn single(frame: &[f64]) -> Self {
        let data = Array2::from_shape_vec((frame.len(), 1), frame.to_vec())
            .expect("column shape matches length");
        Self {
            hop: frame.len().max(1),
            data,
            center: 0,
        }
    }

    pub fn frame_len(&self) -> usize {
        self.data.nrows()
    }

    pub fn frame_count(&self) -> usize {
        self.data.ncols()
    }

    pub fn frame(&self, t: usize) -> ArrayView1<'_, f64> {
        self.data.column(t)
    }
}

/// How a signal was laid out into frames: `pad` zeros precede the first
/// sample in frame coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FrameLayout {
    pub signal_len: usize,
    pub sample_rate: u32,
    pub pad: usize,
    pub frame_len: usize,
    pub hop: usize,
    pub frame_count: usize,
}

/// Result of [`frame`]: windowed frames plus the raw (unwindowed) frame
/// values the clipping mask is detected on.
#[derive(Debug, Clone)]
pub struct FramedSignal {
    pub frames: FrameBlock,
    pub raw: Array2<f64>,
    pub layout: FrameLayout,
}

/// Cuts `signal` into windowed frames. The signal is zero-padded by one frame
/// length on each side so that every sample is covered by `L / hop` frames.
pub fn frame(signal: &Signal, win: &WindowPair) -> FramedSignal {
    let len = win.frame_len();
    let hop = win.hop();
    let n = signal.len();
    let frame_count = (len + n.max(1) - 1) / hop + 1;
    let padded_len = (frame_count - 1) * hop + len;
    let mut padded = vec![0.0; padded_len];
    padded[len..len + n].copy_from_slice(signal.samples());

    let mut raw = Array2::<f64>::zeros((len, frame_count));
    let mut data = Array2::<f64>::zeros((len, frame_count));
    for (t, (mut raw_col, mut col)) in raw
        .axis_iter_mut(Axis(1))
        .zip(data.axis_iter_mut(Axis(1)))
        .enumerate()
    {
        let chunk = &padded[t * hop..t * hop + len];
        for m in 0..len {
            raw_col[m] = chunk[m];
            col[m] = chunk[m] * win.analysis()[m];
        }
    }
    FramedSignal {
        frames: FrameBlock {
            data,
            hop,
            center: 0,
        },
        raw,
        layout: FrameLayout {
            signal_len: n,
            sample_rate: signal.sample_rate(),
            pad: len,
            frame_len: len,
            hop,
            frame_count,
        },
    }
}

/// Overlap-adds frames with the synthesis window and removes the padding
/// introduced by [`frame`].
pub fn overlap_add(frames: &FrameBlock, win: &WindowPair, layout: &FrameLayout) -> Result<Signal> {
    let (len, count) = frames.data.dim();
    if len != win.frame_len() || len != layout.frame_len || count != layout.frame_count {
        return Err(DeclipError::Shape(format!(
            "frames {len}x{count} do not match layout {}x{}",
            layout.frame_len, layout.frame_count
        )));
    }
    let hop = layout.hop;
    let mut acc = vec![0.0; (count - 1) * hop + len];
    for (t, col) in frames.data.axis_iter(Axis(1)).enumerate() {
        let out = &mut acc[t * hop..t * hop + len];
        for m in 0..len {
            out[m] += col[m] * win.synthesis()[m];
        }
    }
    let scale = win.cola_constant();
    let samples = acc[layout.pad..layout.pad + layout.signal_len]
        .iter()
        .map(|v| v / scale)
        .collect();
    Signal::new(samples, layout.sample_rate)
}

/// Per-sample classification of an observation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SampleClass {
    Reliable,
    ClippedPos,
    ClippedNeg,
}

/// Reliable / positively clipped / negatively clipped index sets over an
/// `L x G` frame matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct ClipMask {
    pub tau: f64,
    pub classes: Array2<SampleClass>,
}

impl ClipMask {
    pub fn all_reliable(tau: f64, shape: (usize, usize)) -> Self {
        Self {
            tau,
            classes: Array2::from_elem(shape, SampleClass::Reliable),
        }
    }

    pub fn shape(&self) -> (usize, usize) {
        self.classes.dim()
    }

    pub fn count(&self, class: SampleClass) -> usize {
        self.classes.iter().filter(|c| **c == class).count()
    }

    pub fn is_fully_reliable(&self) -> bool {
        self.classes.iter().all(|c| *c == SampleClass::Reliable)
    }

    pub fn column_is_reliable(&self, t: usize) -> bool {
        self.classes.column(t).iter().all(|c| *c == SampleClass::Reliable)
    }

    /// Flattened (row-major) indices of one class.
    pub fn indices(&self, class: SampleClass) -> Vec<usize> {
        self.classes
            .iter()
            .enumerate()
            .filter(|(_, c)| **c == class)
            .map(|(i, _)| i)
            .collect()
    }
}

/// A sample is clipped positive when its value reaches `tau * (1 - eps)`,
/// negative when it reaches `-tau * (1 - eps)`, reliable otherwise.
pub fn detect_mask(values: &Array2<f64>, tau: f64, detect_eps: f64) -> ClipMask {
    let level = tau * (1.0 - detect_eps);
    ClipMask {
        tau,
        classes: values.mapv(|v| {
            if v >= level {
                SampleClass::ClippedPos
            } else if v <= -level {
                SampleClass::ClippedNeg
            } else {
                SampleClass::Reliable
            }
        }),
    }
}
