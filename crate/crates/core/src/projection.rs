//! Clipping-consistent projections.
//!
//! A time-domain estimate `W` is consistent with an observation `Y` when it
//! equals `Y` on reliable samples and reaches at least the observed level,
//! with the same sign, on clipped samples.

use ndarray::{Array2, Zip};
use num_complex::Complex64;

use crate::error::{DeclipError, Result};
use crate::signal::{ClipMask, SampleClass};
use crate::transform::{TfMatrix, TightFrameDft};

#[derive(Debug, Clone)]
pub struct ConsistencySet {
    observed: Array2<f64>,
    mask: ClipMask,
}

impl ConsistencySet {
    pub fn new(observed: Array2<f64>, mask: ClipMask) -> Result<Self> {
        if observed.dim() != mask.shape() {
            return Err(DeclipError::Shape(format!(
                "observation {:?} vs mask {:?}",
                observed.dim(),
                mask.shape()
            )));
        }
        Ok(Self { observed, mask })
    }

    pub fn observed(&self) -> &Array2<f64> {
        &self.observed
    }

    pub fn mask(&self) -> &ClipMask {
        &self.mask
    }

    fn check(&self, v: &Array2<f64>) -> Result<()> {
        if v.dim() != self.observed.dim() {
            return Err(DeclipError::Shape(format!(
                "estimate {:?} vs observation {:?}",
                v.dim(),
                self.observed.dim()
            )));
        }
        Ok(())
    }

    /// Componentwise projection of a real time-domain matrix onto the set:
    /// clipped entries are kept when they already exceed the observed level,
    /// everything else is replaced by the observation.
    pub fn project_time(&self, v: &Array2<f64>) -> Result<Array2<f64>> {
        self.check(v)?;
        Ok(Zip::from(v)
            .and(&self.observed)
            .and(&self.mask.classes)
            .map_collect(|&v, &y, class| match class {
                SampleClass::ClippedPos if v >= y => v,
                SampleClass::ClippedNeg if v <= y => v,
                _ => y,
            }))
    }

    /// Largest constraint violation of `v` (0 when feasible).
    pub fn violation(&self, v: &Array2<f64>) -> Result<f64> {
        self.check(v)?;
        Ok(Zip::from(v)
            .and(&self.observed)
            .and(&self.mask.classes)
            .fold(0.0f64, |worst, &v, &y, class| {
                let err = match class {
                    SampleClass::Reliable => (v - y).abs(),
                    SampleClass::ClippedPos => (y - v).max(0.0),
                    SampleClass::ClippedNeg => (v - y).max(0.0),
                };
                worst.max(err)
            }))
    }
}

/// Analysis-side projection: the consistent time frames closest to
/// `A^H tf`.
pub fn project_analysis(tf: &TfMatrix, set: &ConsistencySet, op: &TightFrameDft) -> Result<Array2<f64>> {
    set.project_time(&op.synthesize(tf)?)
}

/// Synthesis-side projection in closed form for a Parseval frame:
/// `Z - D^H (D Z - Pi(D Z))`.
pub fn project_synthesis(tf: &TfMatrix, set: &ConsistencySet, op: &TightFrameDft) -> Result<TfMatrix> {
    let dz = op.synthesize(tf)?;
    let target = set.project_time(&dz)?;
    let correction = op.analyze(&(dz - target))?;
    let mut out = tf.clone();
    Zip::from(&mut out.coeffs)
        .and(&correction.coeffs)
        .for_each(|z, c: &Complex64| *z -= c);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal::detect_mask;
    use ndarray::array;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn example_set() -> ConsistencySet {
        let y = array![[0.3], [0.5], [-0.5]];
        let mask = detect_mask(&y, 0.5, 0.0);
        ConsistencySet::new(y, mask).unwrap()
    }

    #[test]
    fn componentwise_rule_example() {
        let set = example_set();
        let out = set.project_time(&array![[0.1], [0.7], [-0.4]]).unwrap();
        assert_eq!(out, array![[0.3], [0.7], [-0.5]]);
        // Through the transform: build tf with A^H tf = v (L = P, unitary).
        let op = TightFrameDft::new(3, 1).unwrap();
        let tf = op.analyze(&array![[0.1], [0.7], [-0.4]]).unwrap();
        let w = project_analysis(&tf, &set, &op).unwrap();
        assert!((&w - &array![[0.3], [0.7], [-0.5]]).iter().all(|d| d.abs() < 1e-15));
    }

    #[test]
    fn boundary_is_accepted() {
        let set = example_set();
        let out = set.project_time(&array![[0.0], [0.5], [-0.5]]).unwrap();
        assert_eq!(out, array![[0.3], [0.5], [-0.5]]);
    }

    #[test]
    fn all_reliable_returns_observation() {
        let y = array![[0.1, -0.2], [0.05, 0.3]];
        let set = ConsistencySet::new(y.clone(), detect_mask(&y, 0.9, 0.0)).unwrap();
        let op = TightFrameDft::twice_redundant(2).unwrap();
        let tf = op.analyze(&array![[1.0, 2.0], [3.0, -4.0]]).unwrap();
        assert_eq!(project_analysis(&tf, &set, &op).unwrap(), y);
    }

    #[test]
    fn analysis_fixed_point() {
        let set = example_set();
        let op = TightFrameDft::twice_redundant(3).unwrap();
        let w = array![[0.3], [0.9], [-0.6]];
        let tf = op.analyze(&w).unwrap();
        let out = project_analysis(&tf, &set, &op).unwrap();
        assert!((&out - &w).iter().all(|d| d.abs() < 1e-12));
    }

    #[test]
    fn synthesis_zero_input_gives_adjoint_of_observation() {
        let y = array![[0.1], [-0.2], [0.3], [0.05]];
        let set = ConsistencySet::new(y.clone(), detect_mask(&y, 0.9, 0.0)).unwrap();
        let op = TightFrameDft::twice_redundant(4).unwrap();
        let out = project_synthesis(&TfMatrix::zeros((8, 1)), &set, &op).unwrap();
        let expect = op.analyze(&y).unwrap();
        assert!(out.distance(&expect) < 1e-14);
        assert!((&op.synthesize(&out).unwrap() - &y).iter().all(|d| d.abs() < 1e-14));
    }

    #[test]
    fn synthesis_fixed_point() {
        let set = example_set();
        let op = TightFrameDft::twice_redundant(3).unwrap();
        let tf = op.analyze(&array![[0.3], [0.8], [-0.9]]).unwrap();
        let out = project_synthesis(&tf, &set, &op).unwrap();
        assert!(out.distance(&tf) < 1e-14);
    }

    fn random_instance(rng: &mut ChaCha8Rng, len: usize, cols: usize) -> ConsistencySet {
        let x = Array2::from_shape_fn((len, cols), |_| rng.gen_range(-1.0..1.0));
        let tau = 0.5;
        let y = x.mapv(|v: f64| v.clamp(-tau, tau));
        let mask = detect_mask(&y, tau, 0.0);
        ConsistencySet::new(y, mask).unwrap()
    }

    fn random_tf(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> TfMatrix {
        TfMatrix::new(Array2::from_shape_fn((rows, cols), |_| {
            Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
        }))
    }

    #[test]
    fn feasibility_idempotence_and_nonexpansiveness() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let op = TightFrameDft::twice_redundant(8).unwrap();
        for _ in 0..100 {
            let set = random_instance(&mut rng, 8, 2);
            let z1 = random_tf(&mut rng, 16, 2);
            let z2 = random_tf(&mut rng, 16, 2);

            let w = project_analysis(&z1, &set, &op).unwrap();
            assert_eq!(set.violation(&w).unwrap(), 0.0);
            let again = project_analysis(&op.analyze(&w).unwrap(), &set, &op).unwrap();
            assert!((&again - &w).iter().all(|d| d.abs() < 1e-12));

            let p1 = project_synthesis(&z1, &set, &op).unwrap();
            let p2 = project_synthesis(&z2, &set, &op).unwrap();
            assert!(set.violation(&op.synthesize(&p1).unwrap()).unwrap() < 1e-12);
            let p11 = project_synthesis(&p1, &set, &op).unwrap();
            assert!(p11.distance(&p1) < 1e-12);
            assert!(p1.distance(&p2) <= z1.distance(&z2) + 1e-9);
        }
    }

    #[test]
    fn shape_mismatch() {
        let set = example_set();
        assert!(set.project_time(&Array2::zeros((2, 1))).is_err());
        let y = Array2::zeros((3, 1));
        assert!(ConsistencySet::new(y, ClipMask::all_reliable(0.5, (2, 1))).is_err());
    }
}
