//! Sparsity-promoting shrinkage: hard thresholding and persistent empirical
//! Wiener (PEW) shrinkage over pattern-shaped neighborhoods.

use std::cmp::Ordering;

use ndarray::Array2;
use num_complex::Complex64;

use crate::error::{DeclipError, Result};
use crate::pattern::Pattern;
use crate::transform::TfMatrix;

/// Keeps the `k` largest-magnitude entries of the whole matrix and zeroes
/// the rest. Ties go to the lowest row-major index.
pub fn hard_threshold(tf: &TfMatrix, k: usize) -> TfMatrix {
    let n = tf.len();
    if k >= n {
        return tf.clone();
    }
    if k == 0 {
        return TfMatrix::zeros(tf.dim());
    }
    let coeffs = tf.coeffs.as_standard_layout();
    let flat = coeffs.as_slice().expect("standard layout is contiguous");
    // Find the k-th largest power, keep everything above it and as many
    // ties as fit, lowest index first.
    let power: Vec<f64> = flat.iter().map(|c| c.norm_sqr()).collect();
    let mut scratch = power.clone();
    let (_, kth, _) = scratch.select_nth_unstable_by(n - k, f64::total_cmp);
    let threshold = *kth;
    let mut ties = k - power.iter().filter(|p| p.total_cmp(&threshold) == Ordering::Greater).count();
    let kept: Vec<Complex64> = flat
        .iter()
        .zip(&power)
        .map(|(c, p)| match p.total_cmp(&threshold) {
            Ordering::Greater => *c,
            Ordering::Equal if ties > 0 => {
                ties -= 1;
                *c
            }
            _ => Complex64::new(0.0, 0.0),
        })
        .collect();
    TfMatrix::new(Array2::from_shape_vec(tf.dim(), kept).expect("shape matches"))
}

/// Reflects `i` into `0..n` without repeating the border sample
/// (`-1 -> 1`, `n -> n - 2`).
pub fn reflect_index(i: isize, n: usize) -> usize {
    if n == 1 {
        return 0;
    }
    let period = 2 * (n as isize - 1);
    let m = i.rem_euclid(period);
    if m < n as isize {
        m as usize
    } else {
        (period - m) as usize
    }
}

/// The `(2F+1) x (2T+1)` patch centered at `(f, t)`, mirror-padded at the
/// borders.
pub fn extract_patch(
    tf: &TfMatrix,
    f: usize,
    t: usize,
    freq_half: usize,
    time_half: usize,
) -> Array2<Complex64> {
    let (rows, cols) = tf.dim();
    Array2::from_shape_fn((2 * freq_half + 1, 2 * time_half + 1), |(i, j)| {
        let r = reflect_index(f as isize + i as isize - freq_half as isize, rows);
        let c = reflect_index(t as isize + j as isize - time_half as isize, cols);
        tf.coeffs[[r, c]]
    })
}

/// PEW shrinkage: each coefficient is scaled by
/// `max(0, 1 - mu^2 / E)` where `E` is the pattern-weighted energy of its
/// neighborhood.
pub fn pew_shrink(tf: &TfMatrix, mu: f64, pattern: &Pattern) -> TfMatrix {
    if mu == 0.0 {
        return tf.clone();
    }
    let (rows, cols) = tf.dim();
    let power = tf.coeffs.mapv(|c| c.norm_sqr());
    let offsets = pattern.offsets();
    let threshold = mu * mu;

    // Reflected index tables per offset, so the inner loop is plain lookups.
    let row_maps: Vec<Vec<usize>> = offsets
        .iter()
        .map(|&(df, _)| (0..rows).map(|f| reflect_index(f as isize + df, rows)).collect())
        .collect();
    let col_maps: Vec<Vec<usize>> = offsets
        .iter()
        .map(|&(_, dt)| (0..cols).map(|t| reflect_index(t as isize + dt, cols)).collect())
        .collect();

    let mut out = tf.clone();
    for ((f, t), z) in out.coeffs.indexed_iter_mut() {
        let energy: f64 = row_maps
            .iter()
            .zip(&col_maps)
            .map(|(rm, cm)| power[[rm[f], cm[t]]])
            .sum();
        let gain = if energy <= threshold {
            0.0
        } else {
            1.0 - threshold / energy
        };
        *z *= gain;
    }
    out
}

/// Which shrinkage family a solver uses, with the sparsity pattern for PEW.
#[derive(Debug, Clone, PartialEq)]
pub enum ShrinkageKind {
    HardThreshold,
    Pew(Pattern),
}

/// A shrinkage family member. For hard thresholding `mu` counts the
/// coefficients removed (the `total - mu` largest are kept); for PEW it is the
/// energy threshold's square root.
#[derive(Debug, Clone, PartialEq)]
pub struct ShrinkageSpec {
    pub kind: ShrinkageKind,
    pub mu: f64,
}

pub fn shrink(tf: &TfMatrix, spec: &ShrinkageSpec) -> Result<TfMatrix> {
    if !(spec.mu >= 0.0) {
        return Err(DeclipError::InvalidPreset(format!(
            "shrinkage strength {} must be non-negative",
            spec.mu
        )));
    }
    match &spec.kind {
        ShrinkageKind::HardThreshold => {
            let total = tf.len();
            let removed = spec.mu.round();
            if removed > total as f64 {
                return Err(DeclipError::InvalidPreset(format!(
                    "hard-threshold strength {removed} exceeds {total} coefficients"
                )));
            }
            Ok(hard_threshold(tf, total - removed as usize))
        }
        ShrinkageKind::Pew(pattern) => Ok(pew_shrink(tf, spec.mu, pattern)),
    }
}
