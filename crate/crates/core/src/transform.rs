//! Redundant DFT tight frame.
//!
//! The analysis operator `A` zero-pads a length-`L` frame to `P = r * L`
//! samples and applies the unitary DFT of size `P`, so `A^H A = I`. The
//! synthesis operator is `D = A^H`: inverse unitary DFT truncated to the first
//! `L` samples. Time-domain results are real parts.

use std::cell::RefCell;
use std::fmt;
use std::sync::Arc;

use ndarray::{Array2, Axis, Zip};
use num_complex::Complex64;
use realfft::{ComplexToReal, RealFftPlanner, RealToComplex};

use crate::error::{DeclipError, Result};

#[derive(Default)]
struct Buffers {
    real: Vec<f64>,
    half: Vec<Complex64>,
    scratch: Vec<Complex64>,
}

thread_local! {
    // FFT work buffers, reused across calls on the same thread.
    static BUFFERS: RefCell<Buffers> = RefCell::new(Buffers::default());
}

fn with_buffers<R>(
    size: usize,
    scratch_len: usize,
    f: impl FnOnce(&mut [f64], &mut [Complex64], &mut [Complex64]) -> R,
) -> R {
    BUFFERS.with(|cell| {
        let bufs = &mut *cell.borrow_mut();
        let half = size / 2 + 1;
        bufs.real.resize(size, 0.0);
        bufs.half.resize(half, Complex64::new(0.0, 0.0));
        bufs.scratch.resize(scratch_len, Complex64::new(0.0, 0.0));
        f(&mut bufs.real[..size], &mut bufs.half[..half], &mut bufs.scratch[..scratch_len])
    })
}

/// Complex `P x G` coefficient matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct TfMatrix {
    pub coeffs: Array2<Complex64>,
}

impl TfMatrix {
    pub fn new(coeffs: Array2<Complex64>) -> Self {
        Self { coeffs }
    }

    pub fn zeros(shape: (usize, usize)) -> Self {
        Self {
            coeffs: Array2::zeros(shape),
        }
    }

    pub fn dim(&self) -> (usize, usize) {
        self.coeffs.dim()
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn norm_sqr(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm_sqr()).sum()
    }

    /// Frobenius norm.
    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    pub fn distance(&self, other: &TfMatrix) -> f64 {
        Zip::from(&self.coeffs)
            .and(&other.coeffs)
            .fold(0.0, |acc, a, b| acc + (a - b).norm_sqr())
            .sqrt()
    }
}

/// Both operators only ever see real time-domain data (`A` acts on real
/// frames, and only `Re(D z)` is used), so they run on real-input FFTs.
#[derive(Clone)]
pub struct TightFrameDft {
    frame_len: usize,
    redundancy: usize,
    forward: Arc<dyn RealToComplex<f64>>,
    inverse: Arc<dyn ComplexToReal<f64>>,
    scale: f64,
}

impl fmt::Debug for TightFrameDft {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TightFrameDft")
            .field("frame_len", &self.frame_len)
            .field("redundancy", &self.redundancy)
            .finish()
    }
}

impl TightFrameDft {
    pub fn new(frame_len: usize, redundancy: usize) -> Result<Self> {
        if frame_len == 0 || redundancy == 0 {
            return Err(DeclipError::Shape(format!(
                "invalid transform geometry L={frame_len}, redundancy={redundancy}"
            )));
        }
        let size = frame_len * redundancy;
        let mut planner = RealFftPlanner::new();
        Ok(Self {
            frame_len,
            redundancy,
            forward: planner.plan_fft_forward(size),
            inverse: planner.plan_fft_inverse(size),
            scale: 1.0 / (size as f64).sqrt(),
        })
    }

    /// The twice-redundant frame.
    pub fn twice_redundant(frame_len: usize) -> Result<Self> {
        Self::new(frame_len, 2)
    }

    pub fn frame_len(&self) -> usize {
        self.frame_len
    }

    pub fn redundancy(&self) -> usize {
        self.redundancy
    }

    /// Number of coefficients per frame (`P`).
    pub fn coeff_len(&self) -> usize {
        self.frame_len * self.redundancy
    }

    pub fn forward_scale(&self) -> f64 {
        self.scale
    }

    /// Applies `A` to every column of a real `L x G` matrix.
    pub fn analyze(&self, frames: &Array2<f64>) -> Result<TfMatrix> {
        let (len, count) = frames.dim();
        if len != self.frame_len {
            return Err(DeclipError::Shape(format!(
                "frame length {len} does not match transform length {}",
                self.frame_len
            )));
        }
        let size = self.coeff_len();
        let mut out = Array2::<Complex64>::zeros((size, count));
        with_buffers(size, self.forward.get_scratch_len(), |real, half, scratch| {
            for (col, mut dst) in frames.axis_iter(Axis(1)).zip(out.axis_iter_mut(Axis(1))) {
                for (r, v) in real.iter_mut().zip(col.iter()) {
                    *r = *v;
                }
                real[len..].fill(0.0);
                self.forward
                    .process_with_scratch(real, half, scratch)
                    .expect("buffer sizes come from the plan");
                // The upper half of a real signal's spectrum is the mirrored
                // conjugate of the lower half.
                for k in 0..size {
                    dst[k] = if k < half.len() {
                        half[k] * self.scale
                    } else {
                        half[size - k].conj() * self.scale
                    };
                }
            }
        });
        Ok(TfMatrix::new(out))
    }

    /// Applies `D = A^H` columnwise and keeps the real part.
    pub fn synthesize(&self, tf: &TfMatrix) -> Result<Array2<f64>> {
        let (size, count) = tf.dim();
        if size != self.coeff_len() {
            return Err(DeclipError::Shape(format!(
                "coefficient length {size} does not match P = {}",
                self.coeff_len()
            )));
        }
        let mut out = Array2::<f64>::zeros((self.frame_len, count));
        with_buffers(size, self.inverse.get_scratch_len(), |real, half, scratch| {
            for (col, mut dst) in tf.coeffs.axis_iter(Axis(1)).zip(out.axis_iter_mut(Axis(1))) {
                // Re(D z) only depends on the Hermitian part of z.
                for (k, h) in half.iter_mut().enumerate() {
                    *h = 0.5 * (col[k] + col[(size - k) % size].conj());
                }
                half[0].im = 0.0;
                if size % 2 == 0 {
                    half[size / 2].im = 0.0;
                }
                self.inverse
                    .process_with_scratch(half, real, scratch)
                    .expect("buffer sizes come from the plan");
                for (d, r) in dst.iter_mut().zip(real.iter()) {
                    *d = r * self.scale;
                }
            }
        });
        Ok(out)
    }
}
