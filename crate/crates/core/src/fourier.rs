//! Walsh expansions and the multilinear extension to the solid cube.
//!
//! Coefficients are indexed by subset bitmask: `coeffs[S]` multiplies the
//! character `w_S(x) = prod_{i in S} x(i)`, and equals
//! `2^{-n} sum_x f(x) w_S(x)` (the transform is always with respect to the
//! *uniform* measure; bias enters elsewhere). The forward and inverse
//! transforms are in-place butterflies, `O(n 2^n)` per value component.
//!
//! `multilinear_eval` extends the table to `[-1,1]^n` by substituting real
//! coordinates into the character sum; `odd_part_eval` keeps only odd-size
//! subsets, which is the antisymmetric part `(F(y) - F(-y))/2`.

use crate::cube::{CubeFunction, MAX_N};
use crate::{Error, Result};
use serde::Serialize;

/// How far outside `[-1,1]` an evaluation coordinate may stray before it is
/// rejected (covers accumulated rounding from projected iterates).
pub const CUBE_DOMAIN_SLACK: f64 = 1e-12;

/// Walsh coefficient table of a function `{-1,+1}^n -> R^d`, flat row-major:
/// `coeffs[S * d ..][..d]` multiplies the character of subset-mask `S`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FourierTable {
    n: usize,
    d: usize,
    coeffs: Vec<f64>,
}

impl FourierTable {
    /// Wraps a raw coefficient table (validated like a value table).
    pub fn from_coeffs(n: usize, d: usize, coeffs: Vec<f64>) -> Result<Self> {
        if n > MAX_N {
            return Err(Error::DimensionOutOfRange { n, max: MAX_N });
        }
        if d == 0 {
            return Err(Error::Empty("coefficient dimension d"));
        }
        let expected = (1usize << n) * d;
        if coeffs.len() != expected {
            return Err(Error::BadLength {
                expected,
                got: coeffs.len(),
            });
        }
        if let Some((i, &v)) = coeffs.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            return Err(Error::NonFinite { index: i, value: v });
        }
        Ok(FourierTable { n, d, coeffs })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn d(&self) -> usize {
        self.d
    }

    /// Coefficient row for subset mask `s`. Panics if out of range.
    #[inline]
    pub fn coeff(&self, s: u32) -> &[f64] {
        let i = s as usize * self.d;
        &self.coeffs[i..i + self.d]
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    /// Subset masks with a coefficient row that is not identically zero.
    pub fn support(&self) -> Vec<u32> {
        (0..(1u32 << self.n))
            .filter(|&s| self.coeff(s).iter().any(|&c| c != 0.0))
            .collect()
    }
}

/// Forward Walsh transform: `t[S] = 2^{-n} sum_x f(x) w_S(x)`.
pub fn walsh_transform(f: &CubeFunction) -> FourierTable {
    let (n, d) = (f.n(), f.d());
    let mut buf = f.values().to_vec();
    butterfly_forward(&mut buf, n, d);
    let scale = 1.0 / (1usize << n) as f64;
    for c in &mut buf {
        *c *= scale;
    }
    FourierTable { n, d, coeffs: buf }
}

/// Inverse transform: rebuilds the value table, `f(x) = sum_S t[S] w_S(x)`.
pub fn inverse_walsh(t: &FourierTable) -> CubeFunction {
    let (n, d) = (t.n(), t.d());
    let mut buf = t.coeffs().to_vec();
    butterfly_inverse(&mut buf, n, d);
    CubeFunction::new(n, d, buf).expect("butterfly preserves shape and finiteness")
}

// One coordinate of the forward butterfly maps the pair
// (value at x(i)=-1, value at x(i)=+1) = (lo, hi) to (lo+hi, hi-lo):
// the constant part lands in the S-bit-clear slot, the x_i part in the
// S-bit-set slot. The inverse substitutes back: (lo, hi) -> (lo-hi, lo+hi).
fn butterfly_forward(buf: &mut [f64], n: usize, d: usize) {
    for i in 0..n {
        let bit = d << i; // stride of coordinate i in flat f64 units
        let block = bit << 1;
        for base in (0..buf.len()).step_by(block) {
            for k in base..base + bit {
                let lo = buf[k];
                let hi = buf[k + bit];
                buf[k] = lo + hi;
                buf[k + bit] = hi - lo;
            }
        }
    }
}

fn butterfly_inverse(buf: &mut [f64], n: usize, d: usize) {
    for i in 0..n {
        let bit = d << i;
        let block = bit << 1;
        for base in (0..buf.len()).step_by(block) {
            for k in base..base + bit {
                let lo = buf[k];
                let hi = buf[k + bit];
                buf[k] = lo - hi;
                buf[k + bit] = lo + hi;
            }
        }
    }
}

/// Evaluates the multilinear extension `F(y) = sum_S t[S] prod_{i in S} y_i`
/// at a point of the solid cube. Fails if `y` has the wrong length or leaves
/// `[-1,1]^n` by more than [`CUBE_DOMAIN_SLACK`].
pub fn multilinear_eval(t: &FourierTable, y: &[f64]) -> Result<Vec<f64>> {
    check_point(t, y)?;
    Ok(fold_eval(t.coeffs().to_vec(), t.n(), t.d(), y))
}

/// Evaluates only the odd-subset part,
/// `O(y) = sum_{|S| odd} t[S] prod_{i in S} y_i = (F(y) - F(-y)) / 2`.
pub fn odd_part_eval(t: &FourierTable, y: &[f64]) -> Result<Vec<f64>> {
    check_point(t, y)?;
    let (n, d) = (t.n(), t.d());
    let mut coeffs = t.coeffs().to_vec();
    for s in 0..(1u32 << n) {
        if s.count_ones() % 2 == 0 {
            let base = s as usize * d;
            coeffs[base..base + d].fill(0.0);
        }
    }
    Ok(fold_eval(coeffs, n, d, y))
}

fn check_point(t: &FourierTable, y: &[f64]) -> Result<()> {
    if y.len() != t.n() {
        return Err(Error::DimensionMismatch {
            expected: t.n(),
            got: y.len(),
        });
    }
    for (i, &v) in y.iter().enumerate() {
        if !v.is_finite() {
            return Err(Error::NonFinite { index: i, value: v });
        }
        if v.abs() > 1.0 + CUBE_DOMAIN_SLACK {
            return Err(Error::InvalidParameter {
                name: "y",
                value: v,
                reason: "evaluation point leaves [-1,1]^n",
            });
        }
    }
    Ok(())
}

// Contracts one coordinate at a time from the top:
// buf[S] + y_i * buf[S | bit_i] for S below the bit, halving the live table
// until row 0 holds F(y). O(2^n d) total.
pub(crate) fn fold_eval(mut buf: Vec<f64>, n: usize, d: usize, y: &[f64]) -> Vec<f64> {
    for i in (0..n).rev() {
        let half = d << i;
        let yi = y[i];
        for k in 0..half {
            buf[k] += yi * buf[k + half];
        }
    }
    buf.truncate(d);
    buf
}
