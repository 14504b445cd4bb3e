//! The generic alternating-projection declipping engine and its presets.
//!
//! One iteration projects `Z - U` onto the clipping-consistent set, shrinks
//! `M W + U` toward the sparsity model and updates the residual `U` and the
//! shrinkage strength. `M` is the analysis operator for the analysis
//! (cosparse) variant and the identity for the synthesis variant.

use ndarray::{Array2, Zip};

use crate::error::{DeclipError, Result};
use crate::pattern::{Pattern, PatternSet};
use crate::projection::{project_analysis, project_synthesis, ConsistencySet};
use crate::shrinkage::{shrink, ShrinkageKind, ShrinkageSpec};
use crate::signal::{ClipMask, FrameBlock};
use crate::transform::{TfMatrix, TightFrameDft};

pub const DEFAULT_BETA: f64 = 1e-3;
pub const DEFAULT_I_MAX: usize = 1_000_000;
/// Iteration cap used for listening-test material.
pub const LISTENING_TEST_I_MAX: usize = 1300;
pub const DEFAULT_I_INIT: usize = 10;
pub const DEFAULT_ALPHA: f64 = 0.99;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Variant {
    /// Cosparse model, consistency enforced on time frames.
    Analysis,
    /// Sparse synthesis model, consistency enforced through the dictionary.
    Synthesis,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Model {
    Plain,
    Social(Pattern),
    AdaptiveSocial(PatternSet),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MuUpdate {
    /// `mu -> mu - 1`, clamped at 0.
    Decrement,
    /// `mu -> alpha * mu`.
    Geometric(f64),
}

impl MuUpdate {
    pub fn apply(self, mu: f64) -> f64 {
        match self {
            MuUpdate::Decrement => (mu - 1.0).max(0.0),
            MuUpdate::Geometric(alpha) => alpha * mu,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InitialStrength {
    /// Total coefficient count minus one: hard thresholding starts by keeping
    /// a single coefficient.
    CoefficientCount,
    /// `weight(pattern) * (1 - max |Y|)`.
    PatternWeighted,
    Fixed(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverPreset {
    pub variant: Variant,
    pub model: Model,
    pub mu0: InitialStrength,
    pub update: MuUpdate,
    /// Relative residual threshold.
    pub beta: f64,
    pub i_max: usize,
    /// Per-pattern iterations during adaptive pattern selection.
    pub i_init: usize,
}

impl SolverPreset {
    pub fn plain(variant: Variant) -> Self {
        Self {
            variant,
            model: Model::Plain,
            mu0: InitialStrength::CoefficientCount,
            update: MuUpdate::Decrement,
            beta: DEFAULT_BETA,
            i_max: DEFAULT_I_MAX,
            i_init: DEFAULT_I_INIT,
        }
    }

    pub fn social(variant: Variant, pattern: Pattern) -> Self {
        Self {
            variant,
            model: Model::Social(pattern),
            mu0: InitialStrength::PatternWeighted,
            update: MuUpdate::Geometric(DEFAULT_ALPHA),
            beta: DEFAULT_BETA,
            i_max: DEFAULT_I_MAX,
            i_init: DEFAULT_I_INIT,
        }
    }

    pub fn adaptive_social(variant: Variant, patterns: PatternSet) -> Self {
        Self {
            model: Model::AdaptiveSocial(patterns),
            ..Self::social(variant, Pattern::temporal(0))
        }
    }

    pub fn with_beta(mut self, beta: f64) -> Self {
        self.beta = beta;
        self
    }

    pub fn with_i_max(mut self, i_max: usize) -> Self {
        self.i_max = i_max;
        self
    }

    pub fn with_alpha(mut self, alpha: f64) -> Self {
        if let MuUpdate::Geometric(_) = self.update {
            self.update = MuUpdate::Geometric(alpha);
        }
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(DeclipError::InvalidPreset(msg));
        if !(self.beta >= 0.0) {
            return bad(format!("beta {} must be non-negative", self.beta));
        }
        if self.i_max == 0 {
            return bad("i_max must be at least 1".into());
        }
        match (&self.model, self.update) {
            (Model::Plain, MuUpdate::Decrement) => {}
            (Model::Plain, _) => return bad("plain models use the decrement schedule".into()),
            (_, MuUpdate::Geometric(alpha)) if alpha > 0.0 && alpha <= 1.0 => {}
            (_, update) => return bad(format!("social models need 0 < alpha <= 1, got {update:?}")),
        }
        if let InitialStrength::Fixed(mu) = self.mu0 {
            if !(mu >= 0.0) {
                return bad(format!("initial strength {mu} must be non-negative"));
            }
        }
        if let Model::AdaptiveSocial(set) = &self.model {
            if set.is_empty() {
                return bad("adaptive model needs at least one pattern".into());
            }
            if self.i_init == 0 {
                return bad("i_init must be at least 1".into());
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverResult {
    /// Time-domain estimate of the whole block.
    pub frames_out: FrameBlock,
    /// Iterations of the final engine run.
    pub iterations: usize,
    /// Iterations spent on adaptive pattern selection.
    pub warmup_iterations: usize,
    pub final_residual: f64,
    pub selected_pattern: Option<usize>,
    /// Residual entropy per candidate pattern (adaptive runs only).
    pub entropies: Vec<f64>,
}

impl SolverResult {
    pub fn total_iterations(&self) -> usize {
        self.iterations + self.warmup_iterations
    }
}

/// Final state of one engine run.
#[derive(Debug, Clone)]
pub struct EngineRun {
    /// Time-domain estimate (`W` for analysis, `Re(D W)` for synthesis).
    pub estimate: Array2<f64>,
    /// `M W`: analysis coefficients of the estimate, or `W` itself.
    pub model_coeffs: TfMatrix,
    /// Last sparse iterate `Z`.
    pub sparse: TfMatrix,
    pub mu: f64,
    pub iterations: usize,
    pub final_residual: f64,
}

/// Everything the engine needs besides the data constraint.
#[derive(Debug, Clone)]
pub struct EngineParams {
    pub variant: Variant,
    pub shrinkage: ShrinkageKind,
    pub mu0: f64,
    pub update: MuUpdate,
    pub beta: f64,
    pub i_max: usize,
}

fn add_assign_diff(acc: &mut TfMatrix, plus: &TfMatrix, minus: &TfMatrix) {
    Zip::from(&mut acc.coeffs)
        .and(&plus.coeffs)
        .and(&minus.coeffs)
        .for_each(|u, a, b| *u += a - b);
}

/// Runs the generic engine from the initial sparse estimate `z0`.
pub fn run_engine(set: &ConsistencySet, op: &TightFrameDft, params: &EngineParams, z0: TfMatrix) -> Result<EngineRun> {
    if params.i_max == 0 {
        return Err(DeclipError::InvalidPreset("i_max must be at least 1".into()));
    }
    let mut z = z0;
    let mut u = TfMatrix::zeros(z.dim());
    let mut spec = ShrinkageSpec {
        kind: params.shrinkage.clone(),
        mu: params.mu0.max(0.0),
    };

    let mut iteration = 0;
    loop {
        iteration += 1;
        let target = TfMatrix::new(Zip::from(&z.coeffs).and(&u.coeffs).map_collect(|z, u| z - u));

        let (estimate, mw) = match params.variant {
            Variant::Analysis => {
                let w = project_analysis(&target, set, op)?;
                let mw = op.analyze(&w)?;
                (w, mw)
            }
            Variant::Synthesis => {
                let w = project_synthesis(&target, set, op)?;
                (op.synthesize(&w)?, w)
            }
        };

        let shrink_input = TfMatrix::new(Zip::from(&mw.coeffs).and(&u.coeffs).map_collect(|w, u| w + u));
        z = shrink(&shrink_input, &spec)?;

        let scale = mw.norm();
        let residual = if scale == 0.0 { 0.0 } else { mw.distance(&z) / scale };
        if residual <= params.beta || iteration >= params.i_max {
            if residual > params.beta {
                // Cap reached: leave U/mu as they would be for a restart.
                spec.mu = params.update.apply(spec.mu);
            }
            return Ok(EngineRun {
                estimate,
                model_coeffs: mw,
                sparse: z,
                mu: spec.mu,
                iterations: iteration,
                final_residual: residual,
            });
        }
        add_assign_diff(&mut u, &mw, &z);
        spec.mu = params.update.apply(spec.mu);
    }
}

fn peak(y: &Array2<f64>) -> f64 {
    y.iter().fold(0.0, |m, v| m.max(v.abs()))
}

fn resolve_mu0(mu0: InitialStrength, coeff_count: usize, pattern: Option<&Pattern>, y: &Array2<f64>) -> f64 {
    match mu0 {
        InitialStrength::CoefficientCount => coeff_count.saturating_sub(1) as f64,
        InitialStrength::PatternWeighted => {
            let weight = pattern.map_or(1, Pattern::weight) as f64;
            (weight * (1.0 - peak(y))).max(0.0)
        }
        InitialStrength::Fixed(mu) => mu,
    }
}

fn check_inputs(y: &FrameBlock, mask: &ClipMask, op: &TightFrameDft) -> Result<ConsistencySet> {
    if y.frame_len() != op.frame_len() {
        return Err(DeclipError::Shape(format!(
            "frame length {} vs transform length {}",
            y.frame_len(),
            op.frame_len()
        )));
    }
    ConsistencySet::new(y.data.clone(), mask.clone())
}

fn block_result(y: &FrameBlock, estimate: Array2<f64>) -> FrameBlock {
    FrameBlock {
        data: estimate,
        hop: y.hop,
        center: y.center,
    }
}

/// Runs the plain or (fixed-pattern) social preset on one block.
pub fn run_generic(y: &FrameBlock, mask: &ClipMask, preset: &SolverPreset, op: &TightFrameDft) -> Result<SolverResult> {
    preset.validate()?;
    let set = check_inputs(y, mask, op)?;
    let z0 = op.analyze(&y.data)?;
    let (shrinkage, pattern) = match &preset.model {
        Model::Plain => (ShrinkageKind::HardThreshold, None),
        Model::Social(p) => (ShrinkageKind::Pew(p.clone()), Some(p)),
        Model::AdaptiveSocial(_) => {
            return Err(DeclipError::InvalidPreset(
                "adaptive presets run through run_adaptive".into(),
            ))
        }
    };
    let params = EngineParams {
        variant: preset.variant,
        shrinkage,
        mu0: resolve_mu0(preset.mu0, z0.len(), pattern, &y.data),
        update: preset.update,
        beta: preset.beta,
        i_max: preset.i_max,
    };
    let run = run_engine(&set, op, &params, z0)?;
    Ok(SolverResult {
        frames_out: block_result(y, run.estimate),
        iterations: run.iterations,
        warmup_iterations: 0,
        final_residual: run.final_residual,
        selected_pattern: None,
        entropies: Vec::new(),
    })
}

/// Histogram bin count from Sturges' rule: `ceil(log2 n) + 1`.
pub fn sturges_bins(n: usize) -> usize {
    if n <= 1 {
        return 1;
    }
    (n as f64).log2().ceil() as usize + 1
}

/// Shannon entropy in bits of a discrete distribution; zero-mass bins
/// contribute nothing.
pub fn entropy_bits(probabilities: &[f64]) -> f64 {
    -probabilities
        .iter()
        .filter(|p| **p > 0.0)
        .map(|p| p * p.log2())
        .sum::<f64>()
}

/// Entropy of the histogram of `|R|` with Sturges bins of equal width over
/// `[0, max |R|]`. An all-zero residual has entropy 0.
pub fn residual_entropy(residual: &TfMatrix) -> Result<f64> {
    let n = residual.len();
    if n == 0 {
        return Err(DeclipError::Shape("empty residual".into()));
    }
    let mags: Vec<f64> = residual.coeffs.iter().map(|c| c.norm()).collect();
    let max = mags.iter().cloned().fold(0.0, f64::max);
    if max == 0.0 {
        return Ok(0.0);
    }
    let bins = sturges_bins(n);
    let mut counts = vec![0usize; bins];
    for m in mags {
        let b = ((m / max) * bins as f64).floor() as usize;
        counts[b.min(bins - 1)] += 1;
    }
    let probs: Vec<f64> = counts.iter().map(|c| *c as f64 / n as f64).collect();
    Ok(entropy_bits(&probs))
}

/// Adaptive social declipper: tries each pattern for `i_init` iterations
/// with a constant strength, keeps the one whose residual has the highest
/// entropy, then continues from its state with the preset's schedule.
pub fn run_adaptive(y: &FrameBlock, mask: &ClipMask, preset: &SolverPreset, op: &TightFrameDft) -> Result<SolverResult> {
    preset.validate()?;
    let patterns = match &preset.model {
        Model::AdaptiveSocial(set) => set,
        _ => {
            return Err(DeclipError::InvalidPreset(
                "run_adaptive needs an adaptive social preset".into(),
            ))
        }
    };
    let set = check_inputs(y, mask, op)?;
    if mask.is_fully_reliable() {
        return Ok(SolverResult {
            frames_out: y.clone(),
            iterations: 0,
            warmup_iterations: 0,
            final_residual: 0.0,
            selected_pattern: None,
            entropies: Vec::new(),
        });
    }
    let z0 = op.analyze(&y.data)?;

    let mut warmup_iterations = 0;
    let mut entropies = Vec::with_capacity(patterns.len());
    let mut best: Option<(usize, EngineRun)> = None;
    for (k, pattern) in patterns.patterns.iter().enumerate() {
        let params = EngineParams {
            variant: preset.variant,
            shrinkage: ShrinkageKind::Pew(pattern.clone()),
            mu0: resolve_mu0(preset.mu0, z0.len(), Some(pattern), &y.data),
            update: MuUpdate::Geometric(1.0),
            beta: preset.beta,
            i_max: preset.i_init,
        };
        let run = run_engine(&set, op, &params, z0.clone())?;
        warmup_iterations += run.iterations;
        let mut residual = run.model_coeffs.clone();
        Zip::from(&mut residual.coeffs).and(&z0.coeffs).for_each(|r, z| *r -= z);
        let e = residual_entropy(&residual)?;
        let better = match entropies.iter().cloned().reduce(f64::max) {
            Some(top) => e > top,
            None => true,
        };
        entropies.push(e);
        if better {
            best = Some((k, run));
        }
    }
    let (selected, warm) = best.expect("pattern set is non-empty");

    let params = EngineParams {
        variant: preset.variant,
        shrinkage: ShrinkageKind::Pew(patterns.patterns[selected].clone()),
        mu0: warm.mu,
        update: preset.update,
        beta: preset.beta,
        i_max: preset.i_max,
    };
    let run = run_engine(&set, op, &params, warm.sparse)?;
    Ok(SolverResult {
        frames_out: block_result(y, run.estimate),
        iterations: run.iterations,
        warmup_iterations,
        final_residual: run.final_residual,
        selected_pattern: Some(selected),
        entropies,
    })
}

/// Dispatches to [`run_generic`] or [`run_adaptive`] by model.
pub fn solve_block(y: &FrameBlock, mask: &ClipMask, preset: &SolverPreset, op: &TightFrameDft) -> Result<SolverResult> {
    match preset.model {
        Model::AdaptiveSocial(_) => run_adaptive(y, mask, preset, op),
        _ => run_generic(y, mask, preset, op),
    }
}
