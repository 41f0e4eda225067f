//! Core types for the biased hypercube: points, bias vectors, the product
//! measure, function tables, and weighted Hamming distances.
//!
//! A vertex of `{-1,+1}^n` is a bitmask (`bit i set <=> x(i) = +1`), so flips
//! and antipodes are single XORs and the measure weight of a vertex is a
//! product over bits. Function tables store all `2^n` values of a map into
//! `R^d` as one flat row-major array indexed by mask.

use crate::{Error, Result};
use serde::Serialize;

/// Largest supported cube dimension. Masks fit a `u32` with room to spare;
/// anything bigger than this has no exactly-enumerable table anyway.
pub const MAX_N: usize = 30;

/// Biases are kept strictly inside (0,1): values are clamped into
/// `[BIAS_EPS, 1 - BIAS_EPS]` at construction so conditional expectations and
/// kernel ratios never divide by zero.
pub const BIAS_EPS: f64 = 1e-9;

// ===========================================================================
// CubePoint
// ===========================================================================

/// A vertex of `{-1,+1}^n`, stored as a bitmask with `bit i set <=> x(i)=+1`.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, Serialize)]
pub struct CubePoint {
    n: usize,
    mask: u32,
}

impl CubePoint {
    /// Builds a vertex from its bitmask. Fails if `n > 30` or the mask has
    /// bits above position `n`.
    pub fn new(n: usize, mask: u32) -> Result<Self> {
        if n > MAX_N {
            return Err(Error::DimensionOutOfRange { n, max: MAX_N });
        }
        if n < 32 && mask >= (1u32 << n) {
            return Err(Error::InvalidParameter {
                name: "mask",
                value: mask as f64,
                reason: "mask has bits at or above position n",
            });
        }
        Ok(CubePoint { n, mask })
    }

    /// The all-minus vertex `(-1, ..., -1)`.
    pub fn all_minus(n: usize) -> Result<Self> {
        Self::new(n, 0)
    }

    pub fn n(self) -> usize {
        self.n
    }

    pub fn mask(self) -> u32 {
        self.mask
    }

    /// Whether coordinate `i` is `+1`. Panics if `i >= n`.
    #[inline]
    pub fn is_plus(self, i: usize) -> bool {
        assert!(i < self.n, "coordinate {i} out of range for n={}", self.n);
        self.mask >> i & 1 == 1
    }

    /// Coordinate `i` as a sign, `+1.0` or `-1.0`. Panics if `i >= n`.
    #[inline]
    pub fn sign(self, i: usize) -> f64 {
        if self.is_plus(i) {
            1.0
        } else {
            -1.0
        }
    }

    /// The neighbor across coordinate `i`. Panics if `i >= n`.
    #[inline]
    pub fn flip(self, i: usize) -> Self {
        assert!(i < self.n, "coordinate {i} out of range for n={}", self.n);
        CubePoint {
            n: self.n,
            mask: self.mask ^ (1 << i),
        }
    }

    /// The antipode `-x` (all coordinates flipped).
    #[inline]
    pub fn antipode(self) -> Self {
        let full = if self.n == 32 {
            u32::MAX
        } else {
            (1u32 << self.n) - 1
        };
        CubePoint {
            n: self.n,
            mask: self.mask ^ full,
        }
    }

    /// Plain Hamming distance to `other`. Panics if dimensions differ.
    pub fn hamming(self, other: Self) -> u32 {
        assert_eq!(self.n, other.n, "Hamming distance across different n");
        (self.mask ^ other.mask).count_ones()
    }

    /// The coordinates as a sign vector of length `n`.
    pub fn signs(self) -> Vec<f64> {
        (0..self.n).map(|i| self.sign(i)).collect()
    }
}

// ===========================================================================
// BiasVector and ProductMeasure
// ===========================================================================

/// Per-coordinate bias `alpha_i = mu{x(i) = +1}`, one entry per coordinate,
/// each clamped into `[BIAS_EPS, 1 - BIAS_EPS]`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BiasVector {
    alphas: Vec<f64>,
}

impl BiasVector {
    /// Validates and clamps the given biases. Entries must lie strictly in
    /// `(0, 1)`; exact 0/1 biases are rejected rather than silently clamped,
    /// since they collapse a coordinate to a point mass.
    pub fn new(alphas: Vec<f64>) -> Result<Self> {
        if alphas.len() > MAX_N {
            return Err(Error::DimensionOutOfRange {
                n: alphas.len(),
                max: MAX_N,
            });
        }
        if alphas.is_empty() {
            return Err(Error::Empty("bias vector"));
        }
        for (i, &a) in alphas.iter().enumerate() {
            if !a.is_finite() {
                return Err(Error::NonFinite { index: i, value: a });
            }
            if a <= 0.0 || a >= 1.0 {
                return Err(Error::InvalidParameter {
                    name: "alpha",
                    value: a,
                    reason: "bias must lie strictly in (0,1)",
                });
            }
        }
        let alphas = alphas
            .into_iter()
            .map(|a| a.clamp(BIAS_EPS, 1.0 - BIAS_EPS))
            .collect();
        Ok(BiasVector { alphas })
    }

    /// The unbiased case, every `alpha_i = 1/2`.
    pub fn uniform(n: usize) -> Result<Self> {
        Self::constant(n, 0.5)
    }

    /// Constant bias `alpha` in every coordinate.
    pub fn constant(n: usize, alpha: f64) -> Result<Self> {
        if n == 0 {
            return Err(Error::Empty("bias vector"));
        }
        Self::new(vec![alpha; n])
    }

    pub fn n(&self) -> usize {
        self.alphas.len()
    }

    /// Bias of coordinate `i`. Panics if `i >= n`.
    #[inline]
    pub fn alpha(&self, i: usize) -> f64 {
        self.alphas[i]
    }

    pub fn alphas(&self) -> &[f64] {
        &self.alphas
    }
}

/// The product measure on `{-1,+1}^n` with weights
/// `mu(x) = prod_i alpha_i^[x(i)=+1] (1-alpha_i)^[x(i)=-1]`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ProductMeasure {
    bias: BiasVector,
}

impl ProductMeasure {
    /// Wraps a bias vector. For `n <= 20` the full weight table is summed and
    /// checked against 1 to `1e-12` — a defensive guard, not a user-facing
    /// contract (the product of clamped biases cannot drift further).
    pub fn new(bias: BiasVector) -> Result<Self> {
        let m = ProductMeasure { bias };
        if m.n() <= 20 {
            let total: f64 = m.weights().iter().sum();
            if (total - 1.0).abs() > 1e-12 {
                return Err(Error::InvalidParameter {
                    name: "measure total mass",
                    value: total,
                    reason: "weights do not sum to 1",
                });
            }
        }
        Ok(m)
    }

    pub fn uniform(n: usize) -> Result<Self> {
        Self::new(BiasVector::uniform(n)?)
    }

    pub fn n(&self) -> usize {
        self.bias.n()
    }

    pub fn bias(&self) -> &BiasVector {
        &self.bias
    }

    /// Weight of one vertex. Fails on dimension mismatch.
    pub fn weight(&self, x: CubePoint) -> Result<f64> {
        if x.n() != self.n() {
            return Err(Error::DimensionMismatch {
                expected: self.n(),
                got: x.n(),
            });
        }
        let mut w = 1.0;
        for i in 0..self.n() {
            let a = self.bias.alpha(i);
            w *= if x.is_plus(i) { a } else { 1.0 - a };
        }
        Ok(w)
    }

    /// The full weight table, indexed by mask. `O(2^n)` time and memory, built
    /// coordinate by coordinate rather than vertex by vertex.
    pub fn weights(&self) -> Vec<f64> {
        let n = self.n();
        let mut w = vec![1.0f64; 1 << n];
        for i in 0..n {
            let a = self.bias.alpha(i);
            let bit = 1usize << i;
            for mask in 0..w.len() {
                w[mask] *= if mask & bit != 0 { a } else { 1.0 - a };
            }
        }
        w
    }
}

// ===========================================================================
// CubeFunction
// ===========================================================================

/// A function `f : {-1,+1}^n -> R^d` stored as a flat table:
/// `values[mask * d ..][..d]` is `f` at the vertex with that mask.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CubeFunction {
    n: usize,
    d: usize,
    values: Vec<f64>,
}

impl CubeFunction {
    /// Wraps a value table. `values.len()` must equal `2^n * d` and every
    /// entry must be finite.
    pub fn new(n: usize, d: usize, values: Vec<f64>) -> Result<Self> {
        if n > MAX_N {
            return Err(Error::DimensionOutOfRange { n, max: MAX_N });
        }
        if d == 0 {
            return Err(Error::Empty("value dimension d"));
        }
        let expected = (1usize << n) * d;
        if values.len() != expected {
            return Err(Error::BadLength {
                expected,
                got: values.len(),
            });
        }
        if let Some((i, &v)) = values.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            return Err(Error::NonFinite { index: i, value: v });
        }
        Ok(CubeFunction { n, d, values })
    }

    /// Builds the table by evaluating `g` at every vertex in mask order.
    pub fn from_fn<F>(n: usize, d: usize, mut g: F) -> Result<Self>
    where
        F: FnMut(CubePoint) -> Vec<f64>,
    {
        if n > MAX_N {
            return Err(Error::DimensionOutOfRange { n, max: MAX_N });
        }
        let mut values = Vec::with_capacity((1usize << n) * d);
        for mask in 0..(1u32 << n) {
            let row = g(CubePoint { n, mask });
            if row.len() != d {
                return Err(Error::BadLength {
                    expected: d,
                    got: row.len(),
                });
            }
            values.extend_from_slice(&row);
        }
        Self::new(n, d, values)
    }

    /// Scalar-valued convenience constructor (`d = 1`).
    pub fn scalar_from_fn<F>(n: usize, mut g: F) -> Result<Self>
    where
        F: FnMut(CubePoint) -> f64,
    {
        Self::from_fn(n, 1, |x| vec![g(x)])
    }

    /// Constant function with the given value vector.
    pub fn constant(n: usize, value: &[f64]) -> Result<Self> {
        if value.is_empty() {
            return Err(Error::Empty("value dimension d"));
        }
        Self::from_fn(n, value.len(), |_| value.to_vec())
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn d(&self) -> usize {
        self.d
    }

    /// Number of vertices, `2^n`.
    pub fn len(&self) -> usize {
        1usize << self.n
    }

    pub fn is_empty(&self) -> bool {
        false // a table always has 2^n >= 1 rows
    }

    /// The value row at a mask. Panics if the mask is out of range.
    #[inline]
    pub fn value(&self, mask: u32) -> &[f64] {
        let i = mask as usize * self.d;
        &self.values[i..i + self.d]
    }

    /// The value row at a vertex. Panics on dimension mismatch.
    #[inline]
    pub fn value_at(&self, x: CubePoint) -> &[f64] {
        assert_eq!(x.n(), self.n, "point dimension does not match table");
        self.value(x.mask())
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub(crate) fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    /// Largest sup-norm of any value row: `max_x max_j |f(x)_j|`.
    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }
}

/// Mean of `f` under `mu`, as a `d`-vector. Fails on dimension mismatch.
pub fn expectation(f: &CubeFunction, mu: &ProductMeasure) -> Result<Vec<f64>> {
    if f.n() != mu.n() {
        return Err(Error::DimensionMismatch {
            expected: mu.n(),
            got: f.n(),
        });
    }
    let w = mu.weights();
    let d = f.d();
    let mut mean = vec![0.0; d];
    for (mask, wx) in w.iter().enumerate() {
        let row = f.value(mask as u32);
        for j in 0..d {
            mean[j] += wx * row[j];
        }
    }
    Ok(mean)
}

// ===========================================================================
// WeightVector and weighted Hamming distance
// ===========================================================================

/// Non-negative coordinate weights for the weighted Hamming metric
/// `rho_w(x,y) = sum_{i : x(i) != y(i)} w_i`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct WeightVector {
    w: Vec<f64>,
}

impl WeightVector {
    /// Validates weights: finite, `>= 0`, not all zero.
    pub fn new(w: Vec<f64>) -> Result<Self> {
        if w.is_empty() {
            return Err(Error::Empty("weight vector"));
        }
        if w.len() > MAX_N {
            return Err(Error::DimensionOutOfRange {
                n: w.len(),
                max: MAX_N,
            });
        }
        for (i, &v) in w.iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::NonFinite { index: i, value: v });
            }
            if v < 0.0 {
                return Err(Error::InvalidParameter {
                    name: "weight",
                    value: v,
                    reason: "weights must be non-negative",
                });
            }
        }
        if w.iter().all(|&v| v == 0.0) {
            return Err(Error::InvalidParameter {
                name: "weight vector",
                value: 0.0,
                reason: "all weights are zero",
            });
        }
        Ok(WeightVector { w })
    }

    /// Unit weights: plain Hamming distance.
    pub fn unit(n: usize) -> Result<Self> {
        Self::new(vec![1.0; n])
    }

    pub fn n(&self) -> usize {
        self.w.len()
    }

    #[inline]
    pub fn get(&self, i: usize) -> f64 {
        self.w[i]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.w
    }

    /// `sum_i w_i`, the weighted diameter (= distance between antipodes).
    pub fn total(&self) -> f64 {
        self.w.iter().sum()
    }
}

/// Weighted Hamming distance `sum over differing coordinates of w_i`.
/// Fails if `w`, `x`, `y` do not share one dimension.
pub fn weighted_hamming(w: &WeightVector, x: CubePoint, y: CubePoint) -> Result<f64> {
    if x.n() != w.n() {
        return Err(Error::DimensionMismatch {
            expected: w.n(),
            got: x.n(),
        });
    }
    if y.n() != w.n() {
        return Err(Error::DimensionMismatch {
            expected: w.n(),
            got: y.n(),
        });
    }
    let mut diff = x.mask() ^ y.mask();
    let mut dist = 0.0;
    while diff != 0 {
        let i = diff.trailing_zeros() as usize;
        dist += w.get(i);
        diff &= diff - 1;
    }
    Ok(dist)
}

// ===========================================================================
// Tests
// ===========================================================================

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn point_signs_and_flip() {
        // mask 0b101 on n=3: x = (+1, -1, +1)
        let x = CubePoint::new(3, 0b101).unwrap();
        assert_eq!(x.sign(0), 1.0);
        assert_eq!(x.sign(1), -1.0);
        assert_eq!(x.sign(2), 1.0);
        let y = x.flip(1);
        assert_eq!(y.mask(), 0b111);
        assert_eq!(x.antipode().mask(), 0b010);
        assert_eq!(x.hamming(y), 1);
        assert_eq!(x.hamming(x.antipode()), 3);
    }

    #[test]
    fn point_rejects_bad_mask_and_big_n() {
        assert!(CubePoint::new(3, 0b1000).is_err());
        assert!(CubePoint::new(31, 0).is_err());
        assert!(CubePoint::new(30, (1 << 30) - 1).is_ok());
    }

    #[test]
    #[should_panic(expected = "out of range")]
    fn sign_panics_out_of_range() {
        let x = CubePoint::new(2, 0).unwrap();
        let _ = x.sign(2);
    }

    #[test]
    fn bias_clamps_and_rejects() {
        assert!(BiasVector::new(vec![0.0]).is_err());
        assert!(BiasVector::new(vec![1.0]).is_err());
        assert!(BiasVector::new(vec![f64::NAN]).is_err());
        assert!(BiasVector::new(vec![]).is_err());
        let b = BiasVector::new(vec![1e-15, 1.0 - 1e-15]).unwrap();
        assert_eq!(b.alpha(0), BIAS_EPS);
        assert_eq!(b.alpha(1), 1.0 - BIAS_EPS);
    }

    #[test]
    fn measure_weight_example() {
        // n=2, alpha = (0.3, 0.7), x = (+1, -1): weight 0.3 * 0.3
        let mu = ProductMeasure::new(BiasVector::new(vec![0.3, 0.7]).unwrap()).unwrap();
        let x = CubePoint::new(2, 0b01).unwrap();
        let w = mu.weight(x).unwrap();
        assert!((w - 0.09).abs() < 1e-15);
        let table = mu.weights();
        assert!((table[0b01] - w).abs() < 1e-15);
        let total: f64 = table.iter().sum();
        assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn measure_dimension_mismatch() {
        let mu = ProductMeasure::uniform(3).unwrap();
        let x = CubePoint::new(2, 0).unwrap();
        assert!(matches!(
            mu.weight(x),
            Err(Error::DimensionMismatch { expected: 3, got: 2 })
        ));
    }

    #[test]
    fn expectation_dictator() {
        // f(x) = x_1 has mean 2*alpha_1 - 1.
        let f = CubeFunction::scalar_from_fn(3, |x| x.sign(0)).unwrap();
        let mu = ProductMeasure::new(BiasVector::new(vec![0.8, 0.5, 0.5]).unwrap()).unwrap();
        let m = expectation(&f, &mu).unwrap();
        assert!((m[0] - 0.6).abs() < 1e-14);
    }

    #[test]
    fn function_table_validation() {
        assert!(CubeFunction::new(2, 1, vec![0.0; 3]).is_err());
        assert!(CubeFunction::new(2, 1, vec![0.0, 0.0, f64::INFINITY, 0.0]).is_err());
        assert!(CubeFunction::new(2, 0, vec![]).is_err());
        let f = CubeFunction::new(1, 2, vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(f.value(1), &[3.0, 4.0]);
        assert_eq!(f.max_abs(), 4.0);
    }

    #[test]
    fn weighted_hamming_examples() {
        let w = WeightVector::new(vec![1.0, 2.0, 4.0]).unwrap();
        let x = CubePoint::new(3, 0b000).unwrap();
        let y = CubePoint::new(3, 0b110).unwrap();
        assert_eq!(weighted_hamming(&w, x, y).unwrap(), 6.0);
        assert_eq!(weighted_hamming(&w, x, x).unwrap(), 0.0);
        assert_eq!(weighted_hamming(&w, x, x.antipode()).unwrap(), w.total());
    }

    #[test]
    fn weight_vector_rejects() {
        assert!(WeightVector::new(vec![-1.0]).is_err());
        assert!(WeightVector::new(vec![0.0, 0.0]).is_err());
        assert!(WeightVector::new(vec![]).is_err());
        assert!(WeightVector::new(vec![f64::NAN, 1.0]).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(256))]

        #[test]
        fn flip_is_involutive(n in 1usize..=12, mask in 0u32..4096, i in 0usize..12) {
            let mask = mask & ((1 << n) - 1);
            let i = i % n;
            let x = CubePoint::new(n, mask).unwrap();
            prop_assert_eq!(x.flip(i).flip(i), x);
            prop_assert_eq!(x.antipode().antipode(), x);
            prop_assert_eq!(x.hamming(x.flip(i)), 1);
        }

        #[test]
        fn weights_sum_to_one(n in 1usize..=10, seed in 0u64..1000) {
            let mut state = seed.wrapping_mul(0x9E3779B97F4A7C15).wrapping_add(1);
            let mut next = || {
                // xorshift-style scramble, enough to vary the biases
                state ^= state >> 12;
                state ^= state << 25;
                state ^= state >> 27;
                0.05 + 0.9 * ((state >> 11) as f64 / (1u64 << 53) as f64)
            };
            let alphas: Vec<f64> = (0..n).map(|_| next()).collect();
            let mu = ProductMeasure::new(BiasVector::new(alphas).unwrap()).unwrap();
            let total: f64 = mu.weights().iter().sum();
            prop_assert!((total - 1.0).abs() < 1e-12);
        }

        #[test]
        fn weighted_hamming_is_a_metric(
            n in 1usize..=8,
            a in 0u32..256, b in 0u32..256, c in 0u32..256,
        ) {
            let m = (1u32 << n) - 1;
            let w = WeightVector::new((1..=n).map(|i| i as f64).collect()).unwrap();
            let x = CubePoint::new(n, a & m).unwrap();
            let y = CubePoint::new(n, b & m).unwrap();
            let z = CubePoint::new(n, c & m).unwrap();
            let dxy = weighted_hamming(&w, x, y).unwrap();
            let dyx = weighted_hamming(&w, y, x).unwrap();
            let dxz = weighted_hamming(&w, x, z).unwrap();
            let dzy = weighted_hamming(&w, z, y).unwrap();
            prop_assert_eq!(dxy, dyx);
            prop_assert!(dxy <= dxz + dzy + 1e-12);
            if x != y {
                prop_assert!(dxy > 0.0);
            }
        }
    }
}
