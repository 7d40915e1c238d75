//! Dense 4-d tensors, deterministic random fill, and fp16 simulation.
//!
//! Tensors are indexed logically as `(image, channel, row, col)` for data and
//! outputs, and `(filter, channel, row, col)` for filter banks. Storage is
//! row-major in that order.

use std::fmt;

use half::f16;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{ConvError, Result};
use crate::scalar::Real;

/// Arithmetic / storage precision used by the engines and reports.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Precision {
    Fp32,
    /// Operands rounded to the binary16 grid, arithmetic at fp32.
    Fp16Sim,
    Fp64,
}

impl Precision {
    pub fn label(self) -> &'static str {
        match self {
            Precision::Fp32 => "fp32",
            Precision::Fp16Sim => "fp16",
            Precision::Fp64 => "fp64",
        }
    }
}

impl fmt::Display for Precision {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl std::str::FromStr for Precision {
    type Err = ConvError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fp32" => Ok(Precision::Fp32),
            "fp16" | "fp16-sim" => Ok(Precision::Fp16Sim),
            "fp64" => Ok(Precision::Fp64),
            other => Err(ConvError::InvalidConfig(format!("unknown precision {other:?}"))),
        }
    }
}

pub type Shape4 = [usize; 4];

#[derive(Clone, PartialEq)]
pub struct Tensor4<T> {
    shape: Shape4,
    data: Vec<T>,
}

impl<T: fmt::Debug> fmt::Debug for Tensor4<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Tensor4")
            .field("shape", &self.shape)
            .field("len", &self.data.len())
            .finish()
    }
}

impl<T: Real> Tensor4<T> {
    pub fn zeros(shape: Shape4) -> Self {
        Self::filled(shape, T::zero())
    }

    pub fn filled(shape: Shape4, value: T) -> Self {
        Tensor4 {
            shape,
            data: vec![value; shape.iter().product()],
        }
    }

    pub fn from_vec(shape: Shape4, data: Vec<T>) -> Result<Self> {
        let expected: usize = shape.iter().product();
        if data.len() != expected {
            return Err(ConvError::ShapeMismatch(format!(
                "shape {shape:?} needs {expected} elements, got {}",
                data.len()
            )));
        }
        Ok(Tensor4 { shape, data })
    }

    pub fn from_fn(shape: Shape4, mut f: impl FnMut([usize; 4]) -> T) -> Self {
        let mut data = Vec::with_capacity(shape.iter().product());
        for a in 0..shape[0] {
            for b in 0..shape[1] {
                for c in 0..shape[2] {
                    for d in 0..shape[3] {
                        data.push(f([a, b, c, d]));
                    }
                }
            }
        }
        Tensor4 { shape, data }
    }

    /// Tensor of the given shape filled from `Uniform[lo, hi)`.
    ///
    /// The stream is ChaCha8 seeded with `seed`, consumed in storage order,
    /// so the result depends only on `(seed, shape, lo, hi)` and `T`.
    pub fn uniform(shape: Shape4, seed: u64, lo: f64, hi: f64) -> Self {
        let mut t = Self::zeros(shape);
        t.fill_uniform(seed, lo, hi);
        t
    }

    pub fn fill_uniform(&mut self, seed: u64, lo: f64, hi: f64) {
        assert!(lo < hi, "fill_uniform needs lo < hi (got {lo}, {hi})");
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let lo_t = T::from_f64(lo);
        let hi_t = T::from_f64(hi);
        for v in &mut self.data {
            // Rejection keeps the half-open range after rounding to T.
            *v = loop {
                let u: f64 = rng.gen();
                let x = T::from_f64(lo + (hi - lo) * u);
                if x >= lo_t && x < hi_t {
                    break x;
                }
            };
        }
    }

    /// Elementwise conversion to another scalar type.
    pub fn cast<U: Real>(&self) -> Tensor4<U> {
        Tensor4 {
            shape: self.shape,
            data: self.data.iter().map(|v| U::from_f64(v.to_f64())).collect(),
        }
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        Tensor4 {
            shape: self.shape,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Sum of elementwise products, accumulated at fp64.
    pub fn dot(&self, other: &Tensor4<T>) -> Result<f64> {
        check_same_shape(self.shape, other.shape)?;
        Ok(self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a.to_f64() * b.to_f64())
            .sum())
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.to_f64().abs()))
    }
}

impl<T> Tensor4<T> {
    pub fn shape(&self) -> Shape4 {
        self.shape
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<T> {
        self.data
    }

    #[inline]
    pub fn offset(&self, idx: [usize; 4]) -> usize {
        let s = self.shape;
        assert!(
            idx[0] < s[0] && idx[1] < s[1] && idx[2] < s[2] && idx[3] < s[3],
            "index {idx:?} out of bounds for shape {s:?}"
        );
        ((idx[0] * s[1] + idx[1]) * s[2] + idx[2]) * s[3] + idx[3]
    }

    /// Contiguous `rows x cols` plane at `(a, b)`.
    #[inline]
    pub fn plane(&self, a: usize, b: usize) -> &[T] {
        let n = self.shape[2] * self.shape[3];
        let start = self.offset([a, b, 0, 0]);
        &self.data[start..start + n]
    }
}

impl<T: Copy> Tensor4<T> {
    #[inline]
    pub fn get(&self, idx: [usize; 4]) -> T {
        self.data[self.offset(idx)]
    }

    #[inline]
    pub fn set(&mut self, idx: [usize; 4], v: T) {
        let o = self.offset(idx);
        self.data[o] = v;
    }
}

impl<T> std::ops::Index<[usize; 4]> for Tensor4<T> {
    type Output = T;
    fn index(&self, idx: [usize; 4]) -> &T {
        &self.data[self.offset(idx)]
    }
}

impl<T> std::ops::IndexMut<[usize; 4]> for Tensor4<T> {
    fn index_mut(&mut self, idx: [usize; 4]) -> &mut T {
        let o = self.offset(idx);
        &mut self.data[o]
    }
}

pub(crate) fn check_same_shape(a: Shape4, b: Shape4) -> Result<()> {
    if a != b {
        return Err(ConvError::ShapeMismatch(format!("{a:?} vs {b:?}")));
    }
    Ok(())
}

/// Largest finite binary16 magnitude.
pub const FP16_MAX: f64 = 65504.0;

/// Rounds one value to the nearest binary16 (ties to even).
pub fn round_to_fp16(v: f64) -> Result<f32> {
    if v.is_nan() || v.abs() > FP16_MAX {
        return Err(ConvError::Fp16Overflow(v.to_string()));
    }
    Ok(f16::from_f64(v).to_f32())
}

/// Rounds every element to the binary16 grid, keeping fp32 storage.
pub fn quantize_fp16<T: Real>(t: &Tensor4<T>) -> Result<Tensor4<f32>> {
    let data = t
        .as_slice()
        .iter()
        .map(|v| round_to_fp16(v.to_f64()))
        .collect::<Result<Vec<_>>>()?;
    Tensor4::from_vec(t.shape(), data)
}

/// `max |a - b|` over all positions, evaluated at fp64.
pub fn max_abs_error<A: Real, B: Real>(a: &Tensor4<A>, b: &Tensor4<B>) -> Result<f64> {
    check_same_shape(a.shape(), b.shape())?;
    Ok(a
        .as_slice()
        .iter()
        .zip(b.as_slice())
        .fold(0.0f64, |m, (x, y)| m.max((x.to_f64() - y.to_f64()).abs())))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Nearest binary16 value found by scanning every finite bit pattern.
    fn fp16_oracle(x: f64) -> f64 {
        let mut best = f64::NAN;
        let mut best_bits = 0u16;
        for bits in 0..=u16::MAX {
            let v = f16::from_bits(bits);
            if !v.is_finite() {
                continue;
            }
            let v = v.to_f64();
            let d = (v - x).abs();
            let bd = (best - x).abs();
            let better = best.is_nan()
                || d < bd
                || (d == bd && bits & 1 == 0 && best_bits & 1 == 1);
            if better {
                best = v;
                best_bits = bits;
            }
        }
        best
    }

    #[test]
    fn uniform_is_deterministic() {
        let a = Tensor4::<f32>::uniform([2, 3, 4, 5], 7, -1.0, 1.0);
        let b = Tensor4::<f32>::uniform([2, 3, 4, 5], 7, -1.0, 1.0);
        assert_eq!(a.as_slice(), b.as_slice());
    }

    #[test]
    fn uniform_tiny_range() {
        let t = Tensor4::<f32>::uniform([3, 3, 8, 8], 3, 0.0, 1e-30);
        let hi = 1e-30f32;
        assert!(t.as_slice().iter().all(|&v| v >= 0.0 && v < hi));
    }

    #[test]
    fn uniform_golden_seeds() {
        let a = Tensor4::<f64>::uniform([1, 1, 4, 4], 1, -1.0, 1.0);
        let b = Tensor4::<f64>::uniform([1, 1, 4, 4], 2, -1.0, 1.0);
        assert_ne!(a.as_slice(), b.as_slice());
        let golden_1 = [GOLDEN_SEED1_FIRST, GOLDEN_SEED1_LAST];
        let golden_2 = [GOLDEN_SEED2_FIRST, GOLDEN_SEED2_LAST];
        assert_eq!([a.as_slice()[0], a.as_slice()[15]], golden_1);
        assert_eq!([b.as_slice()[0], b.as_slice()[15]], golden_2);
    }

    // Recorded from the first run of ChaCha8(seed) -> Uniform[-1, 1).
    const GOLDEN_SEED1_FIRST: f64 = -0.19502867267030388;
    const GOLDEN_SEED1_LAST: f64 = -0.43954254945207527;
    const GOLDEN_SEED2_FIRST: f64 = 0.762681458701153;
    const GOLDEN_SEED2_LAST: f64 = -0.7960430442199706;

    #[test]
    fn fp16_examples() {
        assert_eq!(round_to_fp16(1.0).unwrap(), 1.0);
        assert_eq!(round_to_fp16(-0.5).unwrap(), -0.5);
        assert_eq!(round_to_fp16(0.1).unwrap() as f64, 0.0999755859375);
        assert_eq!(fp16_oracle(0.1), 0.0999755859375);
        assert!(round_to_fp16(65504.0).is_ok());
        assert!(matches!(round_to_fp16(70000.0), Err(ConvError::Fp16Overflow(_))));
        assert!(round_to_fp16(f64::NAN).is_err());
    }

    #[test]
    fn fp16_matches_enumeration() {
        let t = Tensor4::<f64>::uniform([1, 1, 8, 8], 11, -1.0, 1.0);
        let q = quantize_fp16(&t).unwrap();
        for (x, y) in t.as_slice().iter().zip(q.as_slice()) {
            assert_eq!(*y as f64, fp16_oracle(*x), "x = {x}");
        }
        // Exact midpoint between 1 and 1 + 2^-10 rounds to the even neighbour.
        assert_eq!(round_to_fp16(1.0 + 2f64.powi(-11)).unwrap(), 1.0);
    }

    #[test]
    fn max_abs_error_examples() {
        let a = Tensor4::<f64>::from_vec([1, 1, 1, 2], vec![1.0, 2.0]).unwrap();
        let b = Tensor4::<f64>::from_vec([1, 1, 1, 2], vec![1.5, 1.9]).unwrap();
        assert!((max_abs_error(&a, &b).unwrap() - 0.5).abs() < 1e-15);
        assert_eq!(max_abs_error(&a, &a).unwrap(), 0.0);

        let z = Tensor4::<f32>::zeros([2, 3, 4, 5]);
        let q = Tensor4::<f32>::filled([2, 3, 4, 5], 0.25);
        assert_eq!(max_abs_error(&z, &q).unwrap(), 0.25);

        let other = Tensor4::<f32>::zeros([2, 3, 5, 4]);
        assert!(max_abs_error(&z, &other).is_err());
    }

    #[test]
    #[should_panic(expected = "out of bounds")]
    fn index_out_of_bounds_panics() {
        let t = Tensor4::<f32>::zeros([1, 1, 2, 2]);
        let _ = t.get([0, 0, 0, 2]);
    }

    proptest! {
        #[test]
        fn quantize_is_idempotent(seed in any::<u64>()) {
            let t = Tensor4::<f32>::uniform([1, 2, 3, 3], seed, -1.0, 1.0);
            let q = quantize_fp16(&t).unwrap();
            let qq = quantize_fp16(&q).unwrap();
            prop_assert_eq!(q.as_slice(), qq.as_slice());
        }

        #[test]
        fn max_abs_error_is_symmetric(s1 in any::<u64>(), s2 in any::<u64>()) {
            let a = Tensor4::<f32>::uniform([1, 2, 3, 3], s1, -1.0, 1.0);
            let b = Tensor4::<f32>::uniform([1, 2, 3, 3], s2, -1.0, 1.0);
            let ab = max_abs_error(&a, &b).unwrap();
            prop_assert_eq!(ab, max_abs_error(&b, &a).unwrap());
            prop_assert!(ab >= 0.0);
            prop_assert_eq!(ab == 0.0, a == b);
        }
    }
}
