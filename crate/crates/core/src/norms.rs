//! Norm zoo: `l_p`, weak-`l_p`, and the Orlicz `L_p (log L)^a` function norm.
//!
//! The weak norm of a vector is computed from the order statistics:
//! `max_k k^{1/p} * (k-th largest |v_i|)`, which equals the usual
//! `sup_r r * #{i : |v_i| >= r}^{1/p}` and is dominated by the strong `l_p`
//! norm. The Orlicz norm is the gauge
//! `inf { gamma > 0 : sum_k w_k Phi(|v_k|/gamma) <= 1 }` with
//! `Phi(u) = u^p log^a(e + u^p)`; since the level function is continuous and
//! strictly decreasing in `gamma` wherever it is positive, the gauge is the
//! root of `level(gamma) = 1`, found by bracketed bisection.

use crate::{Error, Result};
use serde::Serialize;

/// Relative bracket width at which the Orlicz bisection stops.
pub const ORLICZ_REL_TOL: f64 = 1e-12;

/// Which norm a [`NormSpec`] denotes.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub enum NormKind {
    /// `l_p`, `p` in `[1, inf]` (`f64::INFINITY` for the sup norm).
    Lp { p: f64 },
    /// Weak `l_p`, `p` in `(0, inf)`.
    WeakLp { p: f64 },
    /// Orlicz `L_p (log L)^a` over the uniform measure on the coordinates,
    /// `p` in `[1, inf)`, `a >= 0`. With `a = 0` this is the normalized `l_p`
    /// norm `d^{-1/p} ||v||_p`.
    Orlicz { p: f64, a: f64 },
}

/// A validated norm on `R^d`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct NormSpec {
    kind: NormKind,
    d: usize,
}

impl NormSpec {
    /// `l_p` norm on `R^d`; `p` may be `f64::INFINITY`.
    pub fn lp(p: f64, d: usize) -> Result<Self> {
        if !(p >= 1.0) {
            return Err(Error::InvalidParameter {
                name: "p",
                value: p,
                reason: "l_p norms need p >= 1",
            });
        }
        Self::checked(NormKind::Lp { p }, d)
    }

    /// Weak `l_p` norm on `R^d`, `p` strictly positive and finite.
    pub fn weak_lp(p: f64, d: usize) -> Result<Self> {
        if !(p > 0.0 && p.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "p",
                value: p,
                reason: "weak l_p needs p in (0, inf)",
            });
        }
        Self::checked(NormKind::WeakLp { p }, d)
    }

    /// Orlicz `L_p (log L)^a` norm on `R^d` (uniform coordinate measure).
    pub fn orlicz(p: f64, a: f64, d: usize) -> Result<Self> {
        if !(p >= 1.0 && p.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "p",
                value: p,
                reason: "Orlicz norms here need finite p >= 1",
            });
        }
        if !(a >= 0.0 && a.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "a",
                value: a,
                reason: "log power a must be >= 0",
            });
        }
        Self::checked(NormKind::Orlicz { p, a }, d)
    }

    fn checked(kind: NormKind, d: usize) -> Result<Self> {
        if d == 0 {
            return Err(Error::Empty("norm dimension d"));
        }
        Ok(NormSpec { kind, d })
    }

    pub fn kind(&self) -> NormKind {
        self.kind
    }

    pub fn d(&self) -> usize {
        self.d
    }

    /// Evaluates the norm. Panics if `v.len() != d`; assumes finite entries
    /// (tables are validated at construction).
    pub fn norm(&self, v: &[f64]) -> f64 {
        assert_eq!(v.len(), self.d, "vector length does not match NormSpec");
        match self.kind {
            NormKind::Lp { p } => lp_unchecked(v, p),
            NormKind::WeakLp { p } => weak_lp_unchecked(v, p),
            NormKind::Orlicz { p, a } => {
                let w = 1.0 / self.d as f64;
                let moduli: Vec<f64> = v.iter().map(|x| x.abs()).collect();
                let weights = vec![w; self.d];
                orlicz_scalar(&moduli, &weights, p, a)
                    .expect("validated Orlicz spec cannot fail on finite input")
            }
        }
    }
}

/// `l_p` norm of a vector, `p` in `[1, inf]`. Scales by the max entry first so
/// large tables cannot overflow on the way through `powf`.
pub fn lp_norm(v: &[f64], p: f64) -> Result<f64> {
    if !(p >= 1.0) {
        return Err(Error::InvalidParameter {
            name: "p",
            value: p,
            reason: "l_p norms need p >= 1",
        });
    }
    check_finite(v)?;
    Ok(lp_unchecked(v, p))
}

fn lp_unchecked(v: &[f64], p: f64) -> f64 {
    if p.is_infinite() {
        return v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    }
    if p == 1.0 {
        return v.iter().map(|x| x.abs()).sum();
    }
    if p == 2.0 {
        return v.iter().map(|x| x * x).sum::<f64>().sqrt();
    }
    let m = v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    if m == 0.0 {
        return 0.0;
    }
    let s: f64 = v.iter().map(|x| (x.abs() / m).powf(p)).sum();
    m * s.powf(1.0 / p)
}

/// Weak `l_p` norm `max_k k^{1/p} |v|_(k)` (`|v|_(k)` the k-th largest
/// modulus), `p` in `(0, inf)`.
pub fn weak_lp_norm(v: &[f64], p: f64) -> Result<f64> {
    if !(p > 0.0 && p.is_finite()) {
        return Err(Error::InvalidParameter {
            name: "p",
            value: p,
            reason: "weak l_p needs p in (0, inf)",
        });
    }
    check_finite(v)?;
    Ok(weak_lp_unchecked(v, p))
}

fn weak_lp_unchecked(v: &[f64], p: f64) -> f64 {
    let mut moduli: Vec<f64> = v.iter().map(|x| x.abs()).collect();
    moduli.sort_by(|a, b| b.partial_cmp(a).expect("finite moduli"));
    let inv_p = 1.0 / p;
    moduli
        .iter()
        .enumerate()
        .map(|(k0, &m)| ((k0 + 1) as f64).powf(inv_p) * m)
        .fold(0.0f64, f64::max)
}

/// Orlicz `L_p (log L)^a` norm of a simple function given as `(value, weight)`
/// atoms; `vector_norm` measures each value, weights are the measure of each
/// atom (non-negative, typically summing to 1).
pub fn orlicz_norm(
    values: &[(&[f64], f64)],
    vector_norm: &NormSpec,
    p: f64,
    a: f64,
) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::Empty("orlicz atom list"));
    }
    if !(p >= 1.0 && p.is_finite()) {
        return Err(Error::InvalidParameter {
            name: "p",
            value: p,
            reason: "Orlicz norms here need finite p >= 1",
        });
    }
    if !(a >= 0.0 && a.is_finite()) {
        return Err(Error::InvalidParameter {
            name: "a",
            value: a,
            reason: "log power a must be >= 0",
        });
    }
    let mut moduli = Vec::with_capacity(values.len());
    let mut weights = Vec::with_capacity(values.len());
    for (i, (v, w)) in values.iter().enumerate() {
        if v.len() != vector_norm.d() {
            return Err(Error::DimensionMismatch {
                expected: vector_norm.d(),
                got: v.len(),
            });
        }
        check_finite(v)?;
        if !w.is_finite() || *w < 0.0 {
            return Err(Error::InvalidParameter {
                name: "weight",
                value: *w,
                reason: "atom weights must be finite and >= 0",
            });
        }
        moduli.push(vector_norm.norm(v));
        weights.push(*w);
        let _ = i;
    }
    orlicz_scalar(&moduli, &weights, p, a)
}

/// Shared Orlicz gauge on scalar moduli. The level function
/// `level(gamma) = sum_k w_k (m_k/gamma)^p log^a(e + (m_k/gamma)^p)` is
/// strictly decreasing where positive; we bracket the root of `level = 1`
/// around the plain `L_p` norm and bisect to relative width 1e-12.
fn orlicz_scalar(moduli: &[f64], weights: &[f64], p: f64, a: f64) -> Result<f64> {
    debug_assert_eq!(moduli.len(), weights.len());
    let lp_p: f64 = moduli
        .iter()
        .zip(weights)
        .map(|(m, w)| w * m.powf(p))
        .sum();
    if lp_p <= 0.0 {
        return Ok(0.0); // zero a.e.: the gauge of 0 is 0
    }
    let lp = lp_p.powf(1.0 / p);

    let level = |gamma: f64| -> f64 {
        moduli
            .iter()
            .zip(weights)
            .filter(|(m, w)| **m > 0.0 && **w > 0.0)
            .map(|(m, w)| {
                let u = (m / gamma).powf(p);
                w * u * (std::f64::consts::E + u).ln().powf(a)
            })
            .sum()
    };

    // level(lp) >= 1 always (each log factor is >= 1), so lp is a lower
    // bracket; the initial guesses are widened geometrically if they fail
    // to straddle 1.
    let mut lo = lp / (1.0 + (std::f64::consts::E + 1.0).ln().powf(a)).powf(1.0 / p);
    let mut hi = lp * (1.0 + a);
    let mut guard = 0;
    while level(lo) < 1.0 {
        lo *= 0.5;
        guard += 1;
        if guard > 200 {
            return Err(Error::InvalidParameter {
                name: "orlicz lower bracket",
                value: lo,
                reason: "level function never reached 1 (degenerate input)",
            });
        }
    }
    guard = 0;
    while level(hi) > 1.0 {
        hi *= 2.0;
        guard += 1;
        if guard > 200 {
            return Err(Error::InvalidParameter {
                name: "orlicz upper bracket",
                value: hi,
                reason: "level function never dropped below 1 (non-finite input?)",
            });
        }
    }
    while hi - lo > ORLICZ_REL_TOL * hi {
        let mid = 0.5 * (lo + hi);
        if level(mid) >= 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

fn check_finite(v: &[f64]) -> Result<()> {
    if let Some((i, &x)) = v.iter().enumerate().find(|(_, x)| !x.is_finite()) {
        return Err(Error::NonFinite { index: i, value: x });
    }
    Ok(())
}
