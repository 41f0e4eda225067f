//! Bi-Lipschitz distortion of explicit cube embeddings, exactly, plus the
//! closed-form distortion lower bounds they are measured against: the
//! type-based bound with its 2π proof constant, the smoothness variant, the
//! dimension-free unbiased bound, the weighted/stable-type bound, and the
//! snowflake generalization — every bound clamped at 1, where statements
//! about distortion become vacuous.
//!
//! The block-sum map ([`sharp_example`]) shows the type-based bound is tight
//! up to the proof constant in the edge-versus-antipode sense
//! ([`edge_antipodal_ratio`]); as a bi-Lipschitz embedding it collapses
//! distinct vertices, so [`distortion`] truthfully reports infinity for it.

use crate::cube::{CubeFunction, WeightVector};
use crate::norms::{weak_lp_norm, NormSpec};
use crate::{Error, Result};
use rayon::prelude::*;
use serde::Serialize;
use std::f64::consts::PI;

/// Largest cube dimension for which exact all-pairs scans are attempted.
pub const PAIR_SCAN_MAX_N: usize = 14;

// ===========================================================================
// Metric on the cube
// ===========================================================================

/// A (possibly snowflaked) weighted Hamming metric
/// `rho(x, y) = (sum_{x_i != y_i} w_i)^theta` with `theta` in (0, 1].
#[derive(Clone, Debug, Serialize)]
pub struct CubeMetric {
    w: WeightVector,
    theta: f64,
}

impl CubeMetric {
    pub fn new(w: WeightVector, theta: f64) -> Result<Self> {
        if !(theta > 0.0 && theta <= 1.0) {
            return Err(Error::InvalidParameter {
                name: "theta",
                value: theta,
                reason: "snowflake exponent must lie in (0, 1]",
            });
        }
        Ok(CubeMetric { w, theta })
    }

    /// Plain Hamming distance: unit weights, no snowflaking.
    pub fn hamming(n: usize) -> Result<Self> {
        Ok(CubeMetric {
            w: WeightVector::unit(n)?,
            theta: 1.0,
        })
    }

    pub fn n(&self) -> usize {
        self.w.n()
    }

    pub fn weights(&self) -> &WeightVector {
        &self.w
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    fn eval(&self, xor: u32) -> f64 {
        let mut rho = 0.0;
        let mut bits = xor;
        while bits != 0 {
            let i = bits.trailing_zeros() as usize;
            rho += self.w.get(i);
            bits &= bits - 1;
        }
        if self.theta == 1.0 {
            rho
        } else {
            rho.powf(self.theta)
        }
    }
}

// ===========================================================================
// Distortion
// ===========================================================================

/// Exact Lipschitz data of a map from the metric cube into a normed space.
/// `argmax`/`argmin` are the vertex-mask pairs attaining `lip`/`colip`
/// (smallest pair in lexicographic order on ties).
#[derive(Clone, Debug, Serialize)]
pub struct DistortionReport {
    pub lip: f64,
    pub colip: f64,
    /// `lip / colip`; infinite when two distinct vertices collide.
    pub distortion: f64,
    pub argmax: (u32, u32),
    pub argmin: (u32, u32),
    pub pairs_scanned: u64,
}

#[derive(Clone, Copy)]
struct PairExtrema {
    lip: f64,
    colip: f64,
    argmax: (u32, u32),
    argmin: (u32, u32),
}

/// Exact `sup` and `inf` of `norm(f(x) - f(y)) / rho(x, y)` over all
/// unordered vertex pairs, and their ratio. Requires `n <= 14` (the scan is
/// quadratic in `2^n`). A map collapsing two distinct vertices gets
/// `colip = 0` and infinite distortion — reported, not an error.
pub fn distortion(f: &CubeFunction, metric: &CubeMetric, norm: &NormSpec) -> Result<DistortionReport> {
    let n = f.n();
    if n == 0 {
        return Err(Error::Empty("pair scan needs at least one coordinate"));
    }
    if n > PAIR_SCAN_MAX_N {
        return Err(Error::ExactCapExceeded {
            n,
            max: PAIR_SCAN_MAX_N,
        });
    }
    if metric.n() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: metric.n(),
        });
    }
    if norm.d() != f.d() {
        return Err(Error::DimensionMismatch {
            expected: f.d(),
            got: norm.d(),
        });
    }
    let size = 1u32 << n;
    let d = f.d();

    // per outer vertex: extrema over pairs (x, y), y > x, ascending y
    let per_x: Vec<Option<PairExtrema>> = (0..size - 1)
        .into_par_iter()
        .map(|x| {
            let fx = f.value(x);
            let mut diff = vec![0.0; d];
            let mut best: Option<PairExtrema> = None;
            for y in x + 1..size {
                let fy = f.value(y);
                for j in 0..d {
                    diff[j] = fx[j] - fy[j];
                }
                let r = norm.norm(&diff) / metric.eval(x ^ y);
                match &mut best {
                    None => {
                        best = Some(PairExtrema {
                            lip: r,
                            colip: r,
                            argmax: (x, y),
                            argmin: (x, y),
                        })
                    }
                    Some(b) => {
                        if r > b.lip {
                            b.lip = r;
                            b.argmax = (x, y);
                        }
                        if r < b.colip {
                            b.colip = r;
                            b.argmin = (x, y);
                        }
                    }
                }
            }
            best
        })
        .collect();

    // deterministic reduction in ascending x order, strict comparisons keep
    // the smallest attaining pair
    let mut acc: Option<PairExtrema> = None;
    for b in per_x.into_iter().flatten() {
        match &mut acc {
            None => acc = Some(b),
            Some(a) => {
                if b.lip > a.lip {
                    a.lip = b.lip;
                    a.argmax = b.argmax;
                }
                if b.colip < a.colip {
                    a.colip = b.colip;
                    a.argmin = b.argmin;
                }
            }
        }
    }
    let a = acc.expect("n >= 1 gives at least one pair");
    let distortion = if a.colip == 0.0 {
        f64::INFINITY
    } else {
        a.lip / a.colip
    };
    Ok(DistortionReport {
        lip: a.lip,
        colip: a.colip,
        distortion,
        argmax: a.argmax,
        argmin: a.argmin,
        pairs_scanned: (size as u64) * (size as u64 - 1) / 2,
    })
}

// ===========================================================================
// Lower-bound formulas
// ===========================================================================

/// Inputs shared by the closed-form distortion lower bounds. Only the
/// fields a particular bound consumes need to be present; `p` must lie in
/// `[1, 2]` throughout.
#[derive(Clone, Debug, Serialize)]
pub struct BoundInputs {
    pub n: usize,
    pub d: usize,
    pub p: f64,
    /// Rademacher type p constant of the target space.
    pub tp: f64,
    /// Smoothness constant (optional, consumed by [`lower_bound_ole`]).
    pub sp: Option<f64>,
    /// Metric stable type constant (optional, [`lower_bound_weighted`]).
    pub s: Option<f64>,
    /// Hamming weights (optional, [`lower_bound_weighted`]).
    pub w: Option<WeightVector>,
    /// Snowflake exponent in (0, 1) (optional, [`snowflake_bound`]).
    pub theta: Option<f64>,
}

impl BoundInputs {
    /// Minimal inputs for the type-based bounds.
    pub fn new(n: usize, d: usize, p: f64, tp: f64) -> Result<Self> {
        let b = BoundInputs {
            n,
            d,
            p,
            tp,
            sp: None,
            s: None,
            w: None,
            theta: None,
        };
        b.validate()?;
        Ok(b)
    }

    fn validate(&self) -> Result<()> {
        if self.n == 0 || self.d == 0 {
            return Err(Error::InvalidParameter {
                name: "n",
                value: self.n.min(self.d) as f64,
                reason: "dimensions must be positive",
            });
        }
        if !(self.p >= 1.0 && self.p <= 2.0) {
            return Err(Error::InvalidParameter {
                name: "p",
                value: self.p,
                reason: "exponent must lie in [1, 2]",
            });
        }
        if !(self.tp > 0.0 && self.tp.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "Tp",
                value: self.tp,
                reason: "type constant must be positive and finite",
            });
        }
        for (name, v) in [("Sp", self.sp), ("S", self.s)] {
            if let Some(v) = v {
                if !(v > 0.0 && v.is_finite()) {
                    return Err(Error::InvalidParameter {
                        name,
                        value: v,
                        reason: "constant must be positive and finite",
                    });
                }
            }
        }
        if let Some(t) = self.theta {
            if !(t > 0.0 && t < 1.0) {
                return Err(Error::InvalidParameter {
                    name: "theta",
                    value: t,
                    reason: "snowflake exponent must lie in (0, 1)",
                });
            }
        }
        Ok(())
    }

    fn require(name: &'static str, v: Option<f64>) -> Result<f64> {
        v.ok_or(Error::InvalidParameter {
            name,
            value: f64::NAN,
            reason: "this bound requires the constant to be provided",
        })
    }
}

fn clamp_at_one(v: f64) -> f64 {
    v.max(1.0)
}

/// Type-based bound `max(1, n / (2 pi Tp min(n,d)^{1/p}))`.
pub fn lower_bound_main(b: &BoundInputs) -> Result<f64> {
    b.validate()?;
    let m = b.n.min(b.d) as f64;
    Ok(clamp_at_one(
        b.n as f64 / (2.0 * PI * b.tp * m.powf(1.0 / b.p)),
    ))
}

/// Smoothness-based bound `max(1, n / (Sp min(n,d)^{1/p}))` (no proof
/// constant in this one). Requires `Sp`.
pub fn lower_bound_ole(b: &BoundInputs) -> Result<f64> {
    b.validate()?;
    let sp = BoundInputs::require("Sp", b.sp)?;
    let m = b.n.min(b.d) as f64;
    Ok(clamp_at_one(b.n as f64 / (sp * m.powf(1.0 / b.p))))
}

/// Dimension-free bound `max(1, n^{1-1/p} / (2 pi Tp))`; coincides with
/// [`lower_bound_main`] once `d >= n`.
pub fn lower_bound_ivv(b: &BoundInputs) -> Result<f64> {
    b.validate()?;
    Ok(clamp_at_one(
        (b.n as f64).powf(1.0 - 1.0 / b.p) / (2.0 * PI * b.tp),
    ))
}

/// Stable-type bound for a weighted Hamming metric:
/// `max(1, |w|_1 / (S |w|_{p,infinity}))`. Requires `w` and `S`.
pub fn lower_bound_weighted(b: &BoundInputs) -> Result<f64> {
    b.validate()?;
    let s = BoundInputs::require("S", b.s)?;
    let w = b.w.as_ref().ok_or(Error::Empty("weight vector"))?;
    let weak = weak_lp_norm(w.as_slice(), b.p)?;
    Ok(clamp_at_one(w.total() / (s * weak)))
}

/// Snowflake variant `max(1, n^theta / (2 pi Tp min(n,d)^{1/p}))`.
/// Requires `theta` in (0, 1); the `theta -> 1` limit recovers
/// [`lower_bound_main`].
pub fn snowflake_bound(b: &BoundInputs) -> Result<f64> {
    b.validate()?;
    let theta = BoundInputs::require("theta", b.theta)?;
    let m = b.n.min(b.d) as f64;
    Ok(clamp_at_one(
        (b.n as f64).powf(theta) / (2.0 * PI * b.tp * m.powf(1.0 / b.p)),
    ))
}

/// Which closed-form lower bound to evaluate or sweep.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum BoundKind {
    Main,
    Ole,
    Ivv,
    Weighted,
    Snowflake,
}

impl BoundKind {
    pub fn evaluate(self, b: &BoundInputs) -> Result<f64> {
        match self {
            BoundKind::Main => lower_bound_main(b),
            BoundKind::Ole => lower_bound_ole(b),
            BoundKind::Ivv => lower_bound_ivv(b),
            BoundKind::Weighted => lower_bound_weighted(b),
            BoundKind::Snowflake => snowflake_bound(b),
        }
    }
}

/// Result of maximizing a bound over the exponent grid
/// `p in {1, 1.05, ..., 2}`.
#[derive(Clone, Debug, Serialize)]
pub struct PSweep {
    pub best_p: f64,
    pub best_value: f64,
    /// The whole grid as `(p, value)` rows, ascending in `p`.
    pub grid: Vec<(f64, f64)>,
}

/// Maximizes `kind` over the 21-point exponent grid, holding the other
/// inputs fixed. Ties keep the smallest `p`.
pub fn p_sweep(b: &BoundInputs, kind: BoundKind) -> Result<PSweep> {
    let mut grid = Vec::with_capacity(21);
    let mut best_p = 1.0;
    let mut best_value = f64::NEG_INFINITY;
    for k in 0..=20u32 {
        let p = 1.0 + k as f64 / 20.0;
        let mut inputs = b.clone();
        inputs.p = p;
        let v = kind.evaluate(&inputs)?;
        if v > best_value {
            best_value = v;
            best_p = p;
        }
        grid.push((p, v));
    }
    Ok(PSweep {
        best_p,
        best_value,
        grid,
    })
}

// ===========================================================================
// Edge-versus-antipode ratio and the block-sum map
// ===========================================================================

fn edge_antipodal_profile(f: &CubeFunction, norm: &NormSpec) -> Result<(f64, f64)> {
    let n = f.n();
    if n == 0 {
        return Err(Error::Empty("edge scan needs at least one coordinate"));
    }
    if norm.d() != f.d() {
        return Err(Error::DimensionMismatch {
            expected: f.d(),
            got: norm.d(),
        });
    }
    let d = f.d();
    let full: u32 = if n == 32 { u32::MAX } else { (1u32 << n) - 1 };
    let mut diff = vec![0.0; d];
    let mut max_edge = 0.0f64;
    // each edge once: flip coordinate i at vertices where it is -1
    for x in 0..=full {
        let fx = f.value(x);
        for i in 0..n {
            if x & (1 << i) != 0 {
                continue;
            }
            let fy = f.value(x | (1 << i));
            for j in 0..d {
                diff[j] = fx[j] - fy[j];
            }
            max_edge = max_edge.max(norm.norm(&diff));
        }
    }
    // each antipodal pair once: representatives with the top coordinate at -1
    let mut min_antipodal = f64::INFINITY;
    for x in 0..(1u32 << (n - 1)) {
        let fx = f.value(x);
        let fy = f.value(!x & full);
        for j in 0..d {
            diff[j] = fx[j] - fy[j];
        }
        min_antipodal = min_antipodal.min(norm.norm(&diff));
    }
    Ok((max_edge, min_antipodal))
}

/// `n * (max edge displacement) / (min antipodal displacement)`, by exact
/// scan of all `n 2^{n-1}` edges and `2^{n-1}` antipodal pairs. A map
/// collapsing some antipodal pair gets infinity (reported, not an error).
pub fn edge_antipodal_ratio(f: &CubeFunction, norm: &NormSpec) -> Result<f64> {
    let (max_edge, min_antipodal) = edge_antipodal_profile(f, norm)?;
    if min_antipodal == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(f.n() as f64 * max_edge / min_antipodal)
}

/// The block-sum map: `n` coordinates split into `d` contiguous equal
/// blocks, each mapped to its coordinate sum. Requires `d | n` with `n/d`
/// odd, so every block sum is an odd integer — in particular nonzero at
/// every vertex. With `n = d` this is the identity map.
///
/// Flipping one coordinate moves exactly one block sum by 2, so the edge
/// displacement is exactly 2 in every l_p norm, while the smallest
/// antipodal displacement is `2 d^{1/p}`; the map is not injective for
/// `n > d` (distinct vertices can share all block sums).
pub fn sharp_example(n: usize, d: usize) -> Result<CubeFunction> {
    if d == 0 || n == 0 {
        return Err(Error::InvalidParameter {
            name: "d",
            value: d.min(n) as f64,
            reason: "dimensions must be positive",
        });
    }
    if n % d != 0 {
        return Err(Error::InvalidParameter {
            name: "d",
            value: d as f64,
            reason: "block count must divide the cube dimension",
        });
    }
    let block = n / d;
    if block % 2 == 0 {
        return Err(Error::InvalidParameter {
            name: "n/d",
            value: block as f64,
            reason: "block length must be odd so block sums avoid zero",
        });
    }
    CubeFunction::from_fn(n, d, |x| {
        (0..d)
            .map(|j| (j * block..(j + 1) * block).map(|i| x.sign(i)).sum())
            .collect()
    })
}

// ===========================================================================
// Tests
// ===========================================================================
