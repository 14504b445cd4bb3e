//! Independent reference implementations used by the integration tests.
#![allow(dead_code)]

use std::f64::consts::PI;

use declip_core::pattern::Pattern;
use declip_core::signal::{ClipMask, SampleClass};
use declip_core::TfMatrix;
use nalgebra::{DMatrix, DVector};
use ndarray::Array2;
use num_complex::Complex64;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub fn random_frames(rng: &mut ChaCha8Rng, len: usize, count: usize) -> Array2<f64> {
    Array2::from_shape_fn((len, count), |_| rng.gen_range(-1.0..1.0))
}

pub fn random_tf(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> TfMatrix {
    TfMatrix::new(Array2::from_shape_fn((rows, cols), |_| {
        Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
    }))
}

/// Real `L x 2P` matrix of `w -> Re(D w)` with `w = [Re; Im]` and
/// `D[n, k] = exp(2 pi i n k / P) / sqrt(P)`.
pub fn real_synthesis_matrix(len: usize, size: usize) -> DMatrix<f64> {
    let scale = 1.0 / (size as f64).sqrt();
    DMatrix::from_fn(len, 2 * size, |n, j| {
        let k = j % size;
        let theta = 2.0 * PI * (n * k) as f64 / size as f64;
        if j < size {
            theta.cos() * scale
        } else {
            -theta.sin() * scale
        }
    })
}

/// Projection of `z` (one column) onto `{w : Re(D w) consistent}` by
/// enumerating which clipped constraints are active and solving the
/// equality-constrained least squares for each choice.
pub fn synthesis_projection_oracle(
    z: &[Complex64],
    observed: &[f64],
    classes: &[SampleClass],
    len: usize,
) -> Vec<Complex64> {
    let size = z.len();
    let c = real_synthesis_matrix(len, size);
    let zr = DVector::from_iterator(2 * size, z.iter().map(|v| v.re).chain(z.iter().map(|v| v.im)));
    let reliable: Vec<usize> = (0..len).filter(|&n| classes[n] == SampleClass::Reliable).collect();
    let clipped: Vec<usize> = (0..len).filter(|&n| classes[n] != SampleClass::Reliable).collect();
    assert!(clipped.len() <= 16, "too many clipped samples to enumerate");

    let mut best: Option<(f64, DVector<f64>)> = None;
    for subset in 0u32..(1 << clipped.len()) {
        let mut active = reliable.clone();
        active.extend(
            clipped
                .iter()
                .enumerate()
                .filter(|(b, _)| subset & (1 << b) != 0)
                .map(|(_, n)| *n),
        );
        let w = if active.is_empty() {
            zr.clone()
        } else {
            let ce = DMatrix::from_fn(active.len(), 2 * size, |i, j| c[(active[i], j)]);
            let be = DVector::from_iterator(active.len(), active.iter().map(|&n| observed[n]));
            let gram = &ce * ce.transpose();
            let lambda = gram
                .lu()
                .solve(&(&ce * &zr - be))
                .expect("constraint rows are independent");
            &zr - ce.transpose() * lambda
        };
        let x = &c * &w;
        let feasible = (0..len).all(|n| match classes[n] {
            SampleClass::Reliable => (x[n] - observed[n]).abs() <= 1e-9,
            SampleClass::ClippedPos => x[n] >= observed[n] - 1e-9,
            SampleClass::ClippedNeg => x[n] <= observed[n] + 1e-9,
        });
        if !feasible {
            continue;
        }
        let cost = (&w - &zr).norm_squared();
        if best.as_ref().is_none_or(|(b, _)| cost < *b) {
            best = Some((cost, w));
        }
    }
    let (_, w) = best.expect("the consistency set is non-empty");
    (0..size).map(|k| Complex64::new(w[k], w[size + k])).collect()
}

/// Explicit mirror padding: pads by `fh` rows and `th` columns without
/// repeating the border.
pub fn mirror_pad(x: &Array2<Complex64>, fh: usize, th: usize) -> Array2<Complex64> {
    let (rows, cols) = x.dim();
    let src = |i: isize, n: usize| -> usize {
        let n = n as isize;
        let r = if i < 0 {
            -i
        } else if i >= n {
            2 * (n - 1) - i
        } else {
            i
        };
        assert!((0..n).contains(&r), "pad wider than the matrix");
        r as usize
    };
    Array2::from_shape_fn((rows + 2 * fh, cols + 2 * th), |(i, j)| {
        x[[
            src(i as isize - fh as isize, rows),
            src(j as isize - th as isize, cols),
        ]]
    })
}

/// Persistent empirical Wiener shrinkage written as nested loops over the
/// padded matrix.
pub fn pew_loop(x: &TfMatrix, mu: f64, pattern: &Pattern) -> TfMatrix {
    let grid = pattern.grid();
    let (ph, pw) = grid.dim();
    let (fh, th) = (ph / 2, pw / 2);
    let padded = mirror_pad(&x.coeffs, fh, th);
    let (rows, cols) = x.dim();
    let mut out = x.coeffs.clone();
    for f in 0..rows {
        for t in 0..cols {
            let mut energy = 0.0;
            for a in 0..ph {
                for b in 0..pw {
                    if grid[[a, b]] {
                        energy += padded[[f + a, t + b]].norm_sqr();
                    }
                }
            }
            let gain = if energy > 0.0 {
                (1.0 - mu * mu / energy).max(0.0)
            } else {
                0.0
            };
            out[[f, t]] = x.coeffs[[f, t]] * gain;
        }
    }
    TfMatrix::new(out)
}

/// Histogram entropy of `|R|` in bits, `ceil(log2 n) + 1` equal bins on
/// `[0, max]`, the maximum going into the last bin.
pub fn entropy_direct(residual: &TfMatrix) -> f64 {
    let mags: Vec<f64> = residual.coeffs.iter().map(|c| c.norm()).collect();
    let n = mags.len();
    let q = {
        let mut q = 0usize;
        while (1usize << q) < n {
            q += 1;
        }
        q + 1
    };
    let max = mags.iter().cloned().fold(0.0, f64::max);
    if max == 0.0 {
        return 0.0;
    }
    let width = max / q as f64;
    let mut counts = vec![0usize; q];
    for m in mags {
        let mut b = 0;
        while b + 1 < q && m >= (b + 1) as f64 * width {
            b += 1;
        }
        counts[b] += 1;
    }
    counts
        .iter()
        .filter(|c| **c > 0)
        .map(|&c| {
            let p = c as f64 / n as f64;
            -p * p.log2()
        })
        .sum()
}

pub fn classes_column(mask: &ClipMask, t: usize) -> Vec<SampleClass> {
    mask.classes.column(t).to_vec()
}
