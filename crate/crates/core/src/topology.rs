//! Antipodal structure of the solid cube: enumeration of the d-dimensional
//! faces of [-1,1]^n, a deterministic multistart search for a point z on the
//! d-skeleton where the multilinear extension takes equal values at z and -z,
//! and the derived subcube/bias data that feeds the restricted Poincaré
//! comparison on such a point.
//!
//! The search rests on a guarantee, not luck: for a multilinear map into
//! fewer than `d + 1` dimensions a z with `F(z) = F(-z)` always exists on the
//! d-skeleton, so a returned `BudgetExhausted` signals a numerical failure,
//! never a mathematical one. Witnesses are verified against the full
//! coefficient table before being returned.

use crate::cube::{BiasVector, CubeFunction, CubePoint, BIAS_EPS};
use crate::fourier::{fold_eval, multilinear_eval, FourierTable};
use crate::functionals::InequalityReport;
use crate::heatflow::biased_derivative;
use crate::norms::NormSpec;
use crate::{Error, Result};
use serde::Serialize;

/// Refuse face enumerations beyond this many faces (2^22).
pub const FACE_ENUM_CAP: u64 = 1 << 22;

// ===========================================================================
// Faces
// ===========================================================================

/// One closed face of [-1,1]^n: the coordinates in `free` range over [-1,1],
/// the rest are pinned to the signs of `fixed_signs` (whose bits inside
/// `free` are normalized to zero).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct Face {
    n: usize,
    free: u32,
    fixed_signs: u32,
}

impl Face {
    pub fn new(n: usize, free: u32, fixed_signs: u32) -> Result<Self> {
        if n > crate::cube::MAX_N {
            return Err(Error::DimensionOutOfRange {
                n,
                max: crate::cube::MAX_N,
            });
        }
        let full = if n == 32 { u32::MAX } else { (1u32 << n) - 1 };
        if free & !full != 0 || fixed_signs & !full != 0 {
            return Err(Error::InvalidParameter {
                name: "face",
                value: free as f64,
                reason: "bitmask uses coordinates beyond n",
            });
        }
        Ok(Face {
            n,
            free,
            fixed_signs: fixed_signs & !free,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Bitmask of free coordinates.
    pub fn free(&self) -> u32 {
        self.free
    }

    /// Sign pattern on the pinned coordinates (bits inside `free` are zero).
    pub fn fixed_signs(&self) -> u32 {
        self.fixed_signs
    }

    /// Face dimension = number of free coordinates.
    pub fn dim(&self) -> usize {
        self.free.count_ones() as usize
    }

    /// The reflected face (all pinned signs negated).
    pub fn antipode(&self) -> Face {
        let full = if self.n == 32 {
            u32::MAX
        } else {
            (1u32 << self.n) - 1
        };
        Face {
            n: self.n,
            free: self.free,
            fixed_signs: !self.fixed_signs & full & !self.free,
        }
    }

    /// Whether the face equals its own reflection (true only when every
    /// coordinate is free).
    pub fn self_antipodal(&self) -> bool {
        *self == self.antipode()
    }

    /// Embeds free-coordinate values into a full point in [-1,1]^n, pinned
    /// coordinates at their signs. `u` is read in ascending order of the free
    /// coordinate indices.
    pub fn embed(&self, u: &[f64]) -> Result<Vec<f64>> {
        if u.len() != self.dim() {
            return Err(Error::BadLength {
                expected: self.dim(),
                got: u.len(),
            });
        }
        let mut z = vec![0.0; self.n];
        let mut k = 0;
        for (i, zi) in z.iter_mut().enumerate() {
            if self.free & (1 << i) != 0 {
                *zi = u[k];
                k += 1;
            } else {
                *zi = if self.fixed_signs & (1 << i) != 0 {
                    1.0
                } else {
                    -1.0
                };
            }
        }
        Ok(z)
    }
}

fn binomial(n: u64, k: u64) -> u64 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
    }
    acc.min(u64::MAX as u128) as u64
}

/// All faces of dimension exactly `d`, in ascending `(free, fixed_signs)`
/// order. With `dedup_antipodal`, one representative per `{face, -face}`
/// pair is kept — the one whose lowest pinned coordinate is +1 — plus the
/// single self-antipodal face when `d = n`.
pub fn enumerate_faces(n: usize, d: usize, dedup_antipodal: bool) -> Result<Vec<Face>> {
    if n > crate::cube::MAX_N || d > n {
        return Err(Error::DimensionOutOfRange {
            n: d.max(n),
            max: n.min(crate::cube::MAX_N),
        });
    }
    let count = binomial(n as u64, d as u64).saturating_mul(1u64 << (n - d));
    if count > FACE_ENUM_CAP {
        return Err(Error::InvalidParameter {
            name: "faces",
            value: count as f64,
            reason: "face enumeration beyond 2^22 faces is refused",
        });
    }
    let full: u32 = if n == 32 { u32::MAX } else { (1u32 << n) - 1 };
    let mut out = Vec::with_capacity(if dedup_antipodal {
        (count as usize + 1) / 2
    } else {
        count as usize
    });

    // free sets of popcount d in ascending order (Gosper's next-same-weight)
    let mut free: u32 = if d == 0 { 0 } else { (1u32 << d) - 1 };
    loop {
        let comp = full & !free;
        let anchor = if comp == 0 { 0 } else { comp & comp.wrapping_neg() };
        // pinned sign patterns = subsets of comp, ascending
        let mut signs: u32 = 0;
        loop {
            let keep = !dedup_antipodal || comp == 0 || signs & anchor != 0;
            if keep {
                out.push(Face {
                    n,
                    free,
                    fixed_signs: signs,
                });
            }
            if signs == comp {
                break;
            }
            signs = signs.wrapping_sub(comp) & comp;
        }
        // next free set
        if d == 0 || free == full & !(full >> d) {
            break;
        }
        let c = free & free.wrapping_neg();
        let r = free + c;
        free = (((r ^ free) >> 2) / c) | r;
        if free > full {
            break;
        }
    }
    Ok(out)
}

// ===========================================================================
// Antipodal-zero search
// ===========================================================================

/// Knobs of [`find_antipodal_zero`]. Defaults: tolerance 1e-8 on the
/// sup-norm of `F(z) - F(-z)`, 60 damped Gauss-Newton iterations, 8 start
/// points per face (box center plus a low-discrepancy sequence offset by
/// `seed`), grid fallback on.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct SearchOpts {
    pub tol: f64,
    pub max_newton: usize,
    pub multistarts: usize,
    pub grid_fallback: bool,
    pub seed: u64,
}

impl Default for SearchOpts {
    fn default() -> Self {
        SearchOpts {
            tol: 1e-8,
            max_newton: 60,
            multistarts: 8,
            grid_fallback: true,
            seed: crate::rng::DEFAULT_SEED,
        }
    }
}

/// A verified point on the d-skeleton where the multilinear extension agrees
/// with its antipodal value.
#[derive(Clone, Debug, Serialize)]
pub struct AntipodalWitness {
    /// The point, in [-1,1]^n; at least `n - d` coordinates are ±1.
    pub z: Vec<f64>,
    /// `max_j |F(z)_j - F(-z)_j|`, recomputed on the full coefficient table.
    pub residual: f64,
    /// The face the search converged on.
    pub face: Face,
    /// Biases `(1 + z_i)/2` of the face's free coordinates, in ascending
    /// coordinate order, clamped away from 0 and 1.
    pub bias: BiasVector,
    /// How many faces were searched before this witness was accepted.
    pub faces_examined: usize,
}

// Compact odd-part coefficient table of one face: coefficients over the free
// coordinates after substituting the pinned signs, ascending free-coordinate
// order. The antipodal gap is g(u) = 2 * (this polynomial at u).
struct RestrictedOdd {
    m: usize,
    dim: usize,
    coeffs: Vec<f64>,
}

impl RestrictedOdd {
    fn build(t: &FourierTable, face: &Face) -> Self {
        let (n, dim) = (t.n(), t.d());
        let mut work = t.coeffs().to_vec();
        // odd part: zero out even-cardinality coefficient sets
        for s in 0..(1u32 << n) {
            if s.count_ones() % 2 == 0 {
                let base = s as usize * dim;
                work[base..base + dim].fill(0.0);
            }
        }
        // substitute each pinned coordinate: c'_T = c_T + sign * c_{T+i}
        for i in 0..n {
            let bit = 1u32 << i;
            if face.free & bit != 0 {
                continue;
            }
            let sign = if face.fixed_signs & bit != 0 { 1.0 } else { -1.0 };
            for s in 0..(1u32 << n) {
                if s & bit != 0 {
                    continue;
                }
                let lo = s as usize * dim;
                let hi = (s | bit) as usize * dim;
                for j in 0..dim {
                    work[lo + j] += sign * work[hi + j];
                    work[hi + j] = 0.0;
                }
            }
        }
        // gather the subsets of the free set into a dense 2^m table
        let m = face.dim();
        let free_bits: Vec<u32> = (0..n as u32)
            .filter(|i| face.free & (1 << i) != 0)
            .collect();
        let mut coeffs = vec![0.0; (1usize << m) * dim];
        for tmask in 0..(1u32 << m) {
            let mut s = 0u32;
            for (k, &bit_idx) in free_bits.iter().enumerate() {
                if tmask & (1 << k) != 0 {
                    s |= 1 << bit_idx;
                }
            }
            let src = s as usize * dim;
            let dst = tmask as usize * dim;
            coeffs[dst..dst + dim].copy_from_slice(&work[src..src + dim]);
        }
        RestrictedOdd { m, dim, coeffs }
    }

    /// `g(u) = F(z) - F(-z)` for `z = face.embed(u)`.
    fn gap(&self, u: &[f64]) -> Vec<f64> {
        let mut g = fold_eval(self.coeffs.clone(), self.m, self.dim, u);
        for v in &mut g {
            *v *= 2.0;
        }
        g
    }

    /// Exact Jacobian column for coordinate `j`: the gap is affine in each
    /// coordinate, so the symmetric difference at u_j = ±1 *is* the partial
    /// derivative (no finite-difference error).
    fn jacobian(&self, u: &[f64]) -> Vec<f64> {
        let mut jac = vec![0.0; self.dim * self.m];
        let mut up = u.to_vec();
        for j in 0..self.m {
            let saved = up[j];
            up[j] = 1.0;
            let hi = self.gap(&up);
            up[j] = -1.0;
            let lo = self.gap(&up);
            up[j] = saved;
            for r in 0..self.dim {
                jac[r * self.m + j] = 0.5 * (hi[r] - lo[r]);
            }
        }
        jac
    }
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |a, x| a.max(x.abs()))
}

fn sq_norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum()
}

// Solve (J^T J) delta = -J^T g by Gaussian elimination with partial
// pivoting; on a (numerically) singular system fall back to the steepest
// descent direction -J^T g.
fn gauss_newton_direction(jac: &[f64], g: &[f64], m: usize, dim: usize) -> Vec<f64> {
    let mut a = vec![0.0; m * m];
    let mut b = vec![0.0; m];
    for r in 0..m {
        for c in 0..m {
            let mut s = 0.0;
            for k in 0..dim {
                s += jac[k * m + r] * jac[k * m + c];
            }
            a[r * m + c] = s;
        }
        let mut s = 0.0;
        for k in 0..dim {
            s += jac[k * m + r] * g[k];
        }
        b[r] = -s;
    }
    let grad = b.clone(); // -J^T g, the descent fallback

    for col in 0..m {
        let mut piv = col;
        for r in col + 1..m {
            if a[r * m + col].abs() > a[piv * m + col].abs() {
                piv = r;
            }
        }
        if a[piv * m + col].abs() < 1e-14 {
            return grad;
        }
        if piv != col {
            for c in 0..m {
                a.swap(col * m + c, piv * m + c);
            }
            b.swap(col, piv);
        }
        for r in col + 1..m {
            let factor = a[r * m + col] / a[col * m + col];
            for c in col..m {
                a[r * m + c] -= factor * a[col * m + c];
            }
            b[r] -= factor * b[col];
        }
    }
    for col in (0..m).rev() {
        let mut s = b[col];
        for c in col + 1..m {
            s -= a[col * m + c] * b[c];
        }
        b[col] = s / a[col * m + col];
    }
    b
}

fn clamp_box(u: &mut [f64]) {
    for v in u.iter_mut() {
        *v = v.clamp(-1.0, 1.0);
    }
}

// Damped Gauss-Newton on ||g||^2 over the box, from one start point.
// Returns the final iterate and its sup-norm residual.
fn newton_from(table: &RestrictedOdd, start: &[f64], opts: &SearchOpts) -> (Vec<f64>, f64) {
    let mut u = start.to_vec();
    clamp_box(&mut u);
    let mut g = table.gap(&u);
    let mut best = inf_norm(&g);
    for _ in 0..opts.max_newton {
        if best <= opts.tol {
            break;
        }
        let jac = table.jacobian(&u);
        let delta = gauss_newton_direction(&jac, &g, table.m, table.dim);
        let current_sq = sq_norm(&g);
        let mut advanced = false;
        let mut lambda = 1.0;
        for _ in 0..21 {
            let mut trial: Vec<f64> = u
                .iter()
                .zip(&delta)
                .map(|(ui, di)| ui + lambda * di)
                .collect();
            clamp_box(&mut trial);
            let gt = table.gap(&trial);
            if sq_norm(&gt) < current_sq {
                u = trial;
                g = gt;
                best = inf_norm(&g);
                advanced = true;
                break;
            }
            lambda *= 0.5;
        }
        if !advanced {
            break; // stationary (or boundary-stuck) point
        }
    }
    (u, best)
}

// Low-discrepancy multistart points: the rank-m Kronecker sequence built on
// the root of x^{m+1} = x + 1, mapped to the box.
fn kronecker_point(m: usize, index: u64) -> Vec<f64> {
    let mut phi = 1.5f64;
    for _ in 0..64 {
        let fx = phi.powi(m as i32 + 1) - phi - 1.0;
        let dfx = (m as f64 + 1.0) * phi.powi(m as i32) - 1.0;
        phi -= fx / dfx;
    }
    let mut gamma = 1.0;
    (0..m)
        .map(|_| {
            gamma /= phi;
            let frac = (0.5 + index as f64 * gamma).fract();
            2.0 * frac - 1.0
        })
        .collect()
}

/// Searches the d-dimensional skeleton for a point `z` with
/// `F(z) = F(-z)` (sup-norm residual at most `opts.tol`), where `F` is the
/// multilinear extension described by `t`.
///
/// Faces are visited in ascending deterministic order (antipodal pairs
/// deduplicated — `z` and `-z` witness the same equality). Per face, the
/// antipodal gap restricted to the face is minimized by damped Gauss-Newton
/// from the center plus low-discrepancy starts, with an optional coarse grid
/// sweep as fallback; every candidate is re-verified against the full
/// coefficient table before acceptance. Requires `t.d() <= d < t.n()`.
pub fn find_antipodal_zero(t: &FourierTable, d: usize, opts: &SearchOpts) -> Result<AntipodalWitness> {
    let n = t.n();
    if d >= n {
        return Err(Error::DimensionOutOfRange {
            n: d,
            max: n.saturating_sub(1),
        });
    }
    if d < t.d() {
        return Err(Error::InvalidParameter {
            name: "d",
            value: d as f64,
            reason: "skeleton dimension must be at least the range dimension",
        });
    }
    if !(opts.tol > 0.0 && opts.tol.is_finite()) {
        return Err(Error::InvalidParameter {
            name: "tol",
            value: opts.tol,
            reason: "tolerance must be positive and finite",
        });
    }

    let faces = enumerate_faces(n, d, true)?;
    let mut faces_examined = 0usize;
    let mut best_residual = f64::INFINITY;

    // full-table verification of a candidate; returns the witness on success
    let verify = |face: &Face, u: &[f64], faces_examined: usize| -> Result<Option<AntipodalWitness>> {
        let z = face.embed(u)?;
        let neg: Vec<f64> = z.iter().map(|v| -v).collect();
        let fz = multilinear_eval(t, &z)?;
        let fneg = multilinear_eval(t, &neg)?;
        let residual = fz
            .iter()
            .zip(&fneg)
            .fold(0.0f64, |a, (x, y)| a.max((x - y).abs()));
        if residual <= opts.tol {
            let alphas: Vec<f64> = u
                .iter()
                .map(|zi| ((1.0 + zi) / 2.0).clamp(BIAS_EPS, 1.0 - BIAS_EPS))
                .collect();
            return Ok(Some(AntipodalWitness {
                z,
                residual,
                face: *face,
                bias: BiasVector::new(alphas)?,
                faces_examined,
            }));
        }
        Ok(None)
    };

    for face in &faces {
        faces_examined += 1;
        let table = RestrictedOdd::build(t, face);
        let m = table.m;

        let mut starts = Vec::with_capacity(opts.multistarts.max(1));
        starts.push(vec![0.0; m]);
        let offset = opts.seed % 1024;
        for k in 1..opts.multistarts {
            starts.push(kronecker_point(m, offset + k as u64));
        }

        for start in &starts {
            let (u, res) = newton_from(&table, start, opts);
            best_residual = best_residual.min(res);
            if res <= opts.tol {
                if let Some(w) = verify(face, &u, faces_examined)? {
                    return Ok(w);
                }
            }
        }

        if opts.grid_fallback {
            let axes = m.min(4);
            let levels = 33u32;
            let total = levels.pow(axes as u32);
            let mut best_u: Option<(f64, Vec<f64>)> = None;
            for idx in 0..total {
                let mut u = vec![0.0; m];
                let mut rest = idx;
                for a in u.iter_mut().take(axes) {
                    let j = rest % levels;
                    rest /= levels;
                    *a = -1.0 + 2.0 * j as f64 / (levels - 1) as f64;
                }
                let res = inf_norm(&table.gap(&u));
                if best_u.as_ref().is_none_or(|(b, _)| res < *b) {
                    best_u = Some((res, u));
                }
            }
            if let Some((res, u)) = best_u {
                best_residual = best_residual.min(res);
                if res <= opts.tol {
                    if let Some(w) = verify(face, &u, faces_examined)? {
                        return Ok(w);
                    }
                }
                // polish the best grid point once
                let (u, res) = newton_from(&table, &u, opts);
                best_residual = best_residual.min(res);
                if res <= opts.tol {
                    if let Some(w) = verify(face, &u, faces_examined)? {
                        return Ok(w);
                    }
                }
            }
        }
    }

    Err(Error::BudgetExhausted {
        faces_examined,
        best_residual,
    })
}

// ===========================================================================
// Derived bias
// ===========================================================================

/// Partition of a witness point into near-vertex coordinates (pinned to
/// their signs) and genuinely interior coordinates (carrying a bias).
#[derive(Clone, Debug, Serialize)]
pub struct DerivedBias {
    /// Bitmask of the interior (free) coordinates.
    pub sigma: u32,
    /// Sign pattern of the pinned coordinates (bits inside `sigma` zero).
    pub fixed_signs: CubePoint,
    /// One bias `(1+z_i)/2` per set bit of `sigma`, ascending coordinate
    /// order; `None` when every coordinate is pinned.
    pub bias: Option<BiasVector>,
}

impl DerivedBias {
    /// True when the witness sits (numerically) on a vertex: no interior
    /// coordinates remain.
    pub fn degenerate(&self) -> bool {
        self.bias.is_none()
    }
}

/// Splits a witness point: coordinates with `|z_i| >= 1 - eps` are pinned to
/// their sign, the rest become bias coordinates with `alpha_i = (1+z_i)/2`
/// clamped to `[eps, 1-eps]`.
pub fn derive_bias(w: &AntipodalWitness, eps: f64) -> Result<DerivedBias> {
    if !(eps > 0.0 && eps < 0.5) {
        return Err(Error::InvalidParameter {
            name: "eps",
            value: eps,
            reason: "clamp width must lie in (0, 1/2)",
        });
    }
    let n = w.z.len();
    if n > crate::cube::MAX_N {
        return Err(Error::DimensionOutOfRange {
            n,
            max: crate::cube::MAX_N,
        });
    }
    let mut sigma = 0u32;
    let mut signs = 0u32;
    let mut alphas = Vec::new();
    for (i, &zi) in w.z.iter().enumerate() {
        if !zi.is_finite() {
            return Err(Error::NonFinite {
                index: i,
                value: zi,
            });
        }
        if zi.abs() >= 1.0 - eps {
            if zi > 0.0 {
                signs |= 1 << i;
            }
        } else {
            sigma |= 1 << i;
            alphas.push(((1.0 + zi) / 2.0).clamp(eps, 1.0 - eps));
        }
    }
    let bias = if alphas.is_empty() {
        None
    } else {
        Some(BiasVector::new(alphas)?)
    };
    Ok(DerivedBias {
        sigma,
        fixed_signs: CubePoint::new(n, signs)?,
        bias,
    })
}

// ===========================================================================
// Restricted Poincaré comparison
// ===========================================================================

/// Antipodal Poincaré comparison on the subcube a witness selects:
/// with `sigma` and bias from [`derive_bias`] (clamp 1e-9) and `v(x)` the
/// vertex agreeing with the witness signs off `sigma` and with `x` on
/// `sigma`,
///
/// ```text
/// lhs = E_x norm( f(v(x)) - f(-v(x)) )^p
/// rhs = sum_{i in sigma} E_x [ norm(d_i f (v(x)))^p + norm(d_i f (-v(x)))^p ]
/// ```
///
/// both expectations under the derived product bias, with the verdict taken
/// against the budget `2^{2p-1} (pi * tp)^p` for a caller-supplied type
/// constant `tp`. A degenerate witness (empty `sigma`) compares the two
/// antipodal vertices directly against a zero right-hand side; the report's
/// note flags that case.
pub fn restricted_poincare_check(
    f: &CubeFunction,
    w: &AntipodalWitness,
    p: f64,
    norm: &NormSpec,
    tp: f64,
) -> Result<InequalityReport> {
    if !(p >= 1.0 && p.is_finite()) {
        return Err(Error::InvalidParameter {
            name: "p",
            value: p,
            reason: "moment exponent must be finite and >= 1",
        });
    }
    if !(tp > 0.0 && tp.is_finite()) {
        return Err(Error::InvalidParameter {
            name: "tp",
            value: tp,
            reason: "type constant must be positive and finite",
        });
    }
    if f.n() != w.z.len() {
        return Err(Error::DimensionMismatch {
            expected: f.n(),
            got: w.z.len(),
        });
    }
    if norm.d() != f.d() {
        return Err(Error::DimensionMismatch {
            expected: f.d(),
            got: norm.d(),
        });
    }
    let n = f.n();
    let d = f.d();
    let budget = 2.0f64.powf(2.0 * p - 1.0) * (std::f64::consts::PI * tp).powf(p);
    let db = derive_bias(w, 1e-9)?;

    let full: u32 = if n == 32 { u32::MAX } else { (1u32 << n) - 1 };
    let base = db.fixed_signs.mask();
    let mut diff = vec![0.0; d];

    let Some(bias) = &db.bias else {
        // vertex witness: single antipodal comparison, empty gradient side
        let x = base;
        let fx = f.value(x);
        let fa = f.value(!x & full);
        for j in 0..d {
            diff[j] = fx[j] - fa[j];
        }
        let lhs = norm.norm(&diff).powf(p);
        return Ok(InequalityReport::new(lhs, 0.0, Some(budget))
            .with_note("degenerate witness: no interior coordinates"));
    };

    let sigma_bits: Vec<u32> = (0..n as u32).filter(|i| db.sigma & (1 << i) != 0).collect();
    let m = sigma_bits.len();
    let derivs: Vec<CubeFunction> = sigma_bits
        .iter()
        .enumerate()
        .map(|(k, &i)| biased_derivative(f, i as usize, bias.alpha(k)))
        .collect::<Result<_>>()?;

    let mut lhs = 0.0;
    let mut rhs = 0.0;
    for xm in 0..(1u32 << m) {
        let mut vertex = base;
        let mut weight = 1.0;
        for (k, &i) in sigma_bits.iter().enumerate() {
            if xm & (1 << k) != 0 {
                vertex |= 1 << i;
                weight *= bias.alpha(k);
            } else {
                weight *= 1.0 - bias.alpha(k);
            }
        }
        let anti = !vertex & full;
        let fx = f.value(vertex);
        let fa = f.value(anti);
        for j in 0..d {
            diff[j] = fx[j] - fa[j];
        }
        lhs += weight * norm.norm(&diff).powf(p);
        for dk in &derivs {
            rhs += weight * (norm.norm(dk.value(vertex)).powf(p) + norm.norm(dk.value(anti)).powf(p));
        }
    }
    Ok(InequalityReport::new(lhs, rhs, Some(budget)))
}

// ===========================================================================
// Tests
// ===========================================================================

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fourier::{odd_part_eval, walsh_transform};
    use crate::rng::{master_rng, random_function};
    use rand::Rng;
    use std::collections::HashSet;

    // ---- faces -------------------------------------------------------------

    #[test]
    fn face_counts_match_the_combinatorics() {
        assert_eq!(enumerate_faces(2, 2, false).unwrap().len(), 1);
        assert_eq!(enumerate_faces(3, 1, false).unwrap().len(), 12);
        assert_eq!(enumerate_faces(3, 0, false).unwrap().len(), 8);
        assert_eq!(enumerate_faces(4, 2, false).unwrap().len(), 24);
        // deduplicated: half, except the self-antipodal top face
        assert_eq!(enumerate_faces(3, 1, true).unwrap().len(), 6);
        assert_eq!(enumerate_faces(3, 0, true).unwrap().len(), 4);
        assert_eq!(enumerate_faces(3, 3, true).unwrap().len(), 1);
        assert_eq!(enumerate_faces(4, 2, true).unwrap().len(), 12);
    }

    #[test]
    fn face_enumeration_is_ascending_and_antipodally_paired() {
        let all = enumerate_faces(5, 2, false).unwrap();
        for w in all.windows(2) {
            let key = |f: &Face| (f.free(), f.fixed_signs());
            assert!(key(&w[0]) < key(&w[1]), "ordering violated");
        }
        let set: HashSet<(u32, u32)> = all.iter().map(|f| (f.free(), f.fixed_signs())).collect();
        for f in &all {
            let a = f.antipode();
            assert!(set.contains(&(a.free(), a.fixed_signs())));
            assert_eq!(a.antipode(), *f);
        }
        let dedup = enumerate_faces(5, 2, true).unwrap();
        let dset: HashSet<(u32, u32)> = dedup.iter().map(|f| (f.free(), f.fixed_signs())).collect();
        for f in &dedup {
            let a = f.antipode();
            assert!(
                !dset.contains(&(a.free(), a.fixed_signs())),
                "face and its antipode both kept"
            );
        }
    }

    #[test]
    fn face_embed_places_coordinates() {
        let face = Face::new(4, 0b0101, 0b1010).unwrap();
        let z = face.embed(&[0.25, -0.5]).unwrap();
        assert_eq!(z, vec![0.25, 1.0, -0.5, 1.0]);
        assert!(face.embed(&[0.0]).is_err());
        assert_eq!(face.dim(), 2);
        assert!(!face.self_antipodal());
        assert!(Face::new(4, 0b1111, 0).unwrap().self_antipodal());
    }

    #[test]
    fn face_enumeration_guards() {
        assert!(enumerate_faces(3, 4, false).is_err());
        // C(26,13)*2^13 is far beyond the cap
        assert!(enumerate_faces(26, 13, false).is_err());
    }

    // ---- search -------------------------------------------------------------

    #[test]
    fn even_function_yields_first_face_center() {
        // f even => odd part identically zero => the very first probe works
        let f = CubeFunction::scalar_from_fn(5, |x| x.sign(0) * x.sign(1) + 2.0).unwrap();
        let t = walsh_transform(&f);
        let w = find_antipodal_zero(&t, 2, &SearchOpts::default()).unwrap();
        assert_eq!(w.residual, 0.0);
        assert_eq!(w.faces_examined, 1);
        let free = w.face.free();
        for (i, &zi) in w.z.iter().enumerate() {
            if free & (1 << i) != 0 {
                assert_eq!(zi, 0.0, "free coordinate not at the center");
            } else {
                assert!(zi == 1.0 || zi == -1.0);
            }
        }
    }

    #[test]
    fn coordinate_projection_zeroes_the_leading_block() {
        // f(x) = (x_0, ..., x_{d-1}) with n > d: the gap is 2(u_0..u_{d-1}),
        // zeroed exactly at the face center of the first face
        for (n, d) in [(4usize, 2usize), (6, 3)] {
            let f = CubeFunction::from_fn(n, d, |x| (0..d).map(|i| x.sign(i)).collect()).unwrap();
            let t = walsh_transform(&f);
            let w = find_antipodal_zero(&t, d, &SearchOpts::default()).unwrap();
            assert_eq!(w.residual, 0.0);
            for i in 0..d {
                assert_eq!(w.z[i], 0.0);
            }
            for i in d..n {
                assert!(w.z[i].abs() == 1.0);
            }
        }
    }

    #[test]
    fn random_instances_yield_verified_witnesses() {
        let mut r = master_rng(41);
        let opts = SearchOpts::default();
        for trial in 0..20 {
            let n = r.random_range(3..=7);
            let d = r.random_range(1..n.min(4));
            let f = random_function(&mut r, n, d).unwrap();
            let t = walsh_transform(&f);
            let w = find_antipodal_zero(&t, d, &opts).unwrap();
            assert!(w.residual <= opts.tol, "trial {trial}: {}", w.residual);
            // on the skeleton: at least n - d coordinates at +-1
            let pinned = w
                .z
                .iter()
                .filter(|zi| (zi.abs() - 1.0).abs() <= 1e-9)
                .count();
            assert!(pinned >= n - d, "trial {trial}: only {pinned} pinned");
            // antipodal-gap consistency with the odd part
            let odd = odd_part_eval(&t, &w.z).unwrap();
            let neg: Vec<f64> = w.z.iter().map(|v| -v).collect();
            let direct: Vec<f64> = multilinear_eval(&t, &w.z)
                .unwrap()
                .iter()
                .zip(multilinear_eval(&t, &neg).unwrap())
                .map(|(a, b)| a - b)
                .collect();
            for (g, o) in direct.iter().zip(&odd) {
                assert!((g - 2.0 * o).abs() <= 1e-12, "gap vs odd part");
            }
        }
    }

    #[test]
    fn grid_fallback_alone_finds_a_zero() {
        // f = x_0 + x_1/8: on the first kept face (free {0}, x_1 pinned to
        // +1) the gap is 2(u + 1/8), whose zero -0.125 is a grid node but
        // not the center. With no usable Newton starts only the grid can
        // find it.
        let f = CubeFunction::scalar_from_fn(3, |x| x.sign(0) + 0.125 * x.sign(1)).unwrap();
        let t = walsh_transform(&f);
        let opts = SearchOpts {
            multistarts: 0, // center only...
            max_newton: 0,  // ...and no iterations to move it
            ..SearchOpts::default()
        };
        let w = find_antipodal_zero(&t, 1, &opts).unwrap();
        assert!(w.residual <= opts.tol);
        assert_eq!(w.z[0], -0.125);
        assert_eq!(w.z[1], 1.0);
    }

    #[test]
    fn unattainable_tolerance_exhausts_the_budget() {
        // probe only the face centers (no iterations, no grid) with an
        // impossible tolerance: every face must be reported as examined
        let mut r = master_rng(42);
        let f = random_function(&mut r, 4, 1).unwrap();
        let t = walsh_transform(&f);
        let opts = SearchOpts {
            tol: 1e-300,
            multistarts: 1,
            max_newton: 0,
            grid_fallback: false,
            ..SearchOpts::default()
        };
        match find_antipodal_zero(&t, 1, &opts) {
            Err(Error::BudgetExhausted {
                faces_examined,
                best_residual,
            }) => {
                assert_eq!(faces_examined, enumerate_faces(4, 1, true).unwrap().len());
                assert!(best_residual > 0.0);
            }
            other => panic!("expected budget exhaustion, got {other:?}"),
        }
    }

    #[test]
    fn search_rejects_bad_dimensions() {
        let f = CubeFunction::constant(4, &[0.0, 0.0]).unwrap();
        let t = walsh_transform(&f);
        assert!(find_antipodal_zero(&t, 4, &SearchOpts::default()).is_err()); // d = n
        assert!(find_antipodal_zero(&t, 1, &SearchOpts::default()).is_err()); // d < range dim
    }

    // ---- derived bias ---------------------------------------------------------

    fn witness_for(f: &CubeFunction, d: usize) -> AntipodalWitness {
        find_antipodal_zero(&walsh_transform(f), d, &SearchOpts::default()).unwrap()
    }

    #[test]
    fn derive_bias_on_the_projection_witness() {
        let (n, d) = (5usize, 2usize);
        let f = CubeFunction::from_fn(n, d, |x| (0..d).map(|i| x.sign(i)).collect()).unwrap();
        let w = witness_for(&f, d);
        let db = derive_bias(&w, 1e-9).unwrap();
        assert_eq!(db.sigma, 0b00011);
        assert!(!db.degenerate());
        let bias = db.bias.unwrap();
        for k in 0..2 {
            assert!((bias.alpha(k) - 0.5).abs() < 1e-12);
        }
    }

    #[test]
    fn derive_bias_pins_near_vertex_coordinates() {
        let f = CubeFunction::scalar_from_fn(3, |x| x.sign(0)).unwrap();
        let mut w = witness_for(&f, 1);
        // force a synthetic near-vertex point
        w.z = vec![1.0 - 1e-12, -1.0, 0.25];
        let db = derive_bias(&w, 1e-9).unwrap();
        assert_eq!(db.sigma, 0b100);
        assert!(db.fixed_signs.is_plus(0));
        assert!(!db.fixed_signs.is_plus(1));
        let bias = db.bias.unwrap();
        assert!((bias.alpha(0) - 0.625).abs() < 1e-12);

        // all-vertex point is degenerate
        w.z = vec![1.0, -1.0, 1.0];
        let db = derive_bias(&w, 1e-9).unwrap();
        assert_eq!(db.sigma, 0);
        assert!(db.degenerate());
        assert!(derive_bias(&w, 0.7).is_err());
    }

    // ---- restricted comparison ---------------------------------------------------

    #[test]
    fn restricted_check_constant_function() {
        let f = CubeFunction::constant(4, &[1.0]).unwrap();
        // witness from an even companion on the same cube
        let even = CubeFunction::scalar_from_fn(4, |x| x.sign(0) * x.sign(1)).unwrap();
        let w = witness_for(&even, 2);
        let rep = restricted_poincare_check(&f, &w, 2.0, &NormSpec::lp(2.0, 1).unwrap(), 1.0)
            .unwrap();
        assert_eq!((rep.lhs, rep.rhs), (0.0, 0.0));
        assert_eq!(rep.holds, Some(true));
    }

    #[test]
    fn restricted_check_projection_pipeline() {
        // f = (x_0, x_1, x_2) on the 4-cube, witness on the 3-skeleton at
        // the face center: both sides in closed form.
        let (n, d) = (4usize, 3usize);
        let f = CubeFunction::from_fn(n, d, |x| (0..d).map(|i| x.sign(i)).collect()).unwrap();
        let w = witness_for(&f, d);
        let rep = restricted_poincare_check(&f, &w, 1.0, &NormSpec::lp(1.0, d).unwrap(), 1.0)
            .unwrap();
        assert!((rep.lhs - 6.0).abs() < 1e-12); // |f(v) - f(-v)|_1 = 2d always
        assert!((rep.rhs - 6.0).abs() < 1e-12); // d coordinates, two unit terms each
        assert_eq!(rep.holds, Some(true), "ratio {}", rep.ratio);
        assert!(rep.note.is_none());
    }

    #[test]
    fn restricted_check_random_instances_hold() {
        let mut r = master_rng(43);
        for trial in 0..25 {
            let n = r.random_range(3..=6);
            let d = r.random_range(1..n.min(4));
            let f = random_function(&mut r, n, d).unwrap();
            let w = witness_for(&f, d);
            let p = [1.0, 1.5, 2.0][trial % 3];
            let rep =
                restricted_poincare_check(&f, &w, p, &NormSpec::lp(p, d).unwrap(), 1.0).unwrap();
            assert_eq!(
                rep.holds,
                Some(true),
                "trial {trial} n={n} d={d} p={p}: ratio {} note {:?}",
                rep.ratio,
                rep.note
            );
        }
    }

    #[test]
    fn restricted_check_degenerate_witness_is_flagged() {
        let f = CubeFunction::scalar_from_fn(3, |x| x.sign(0)).unwrap();
        let mut w = witness_for(&f, 1);
        w.z = vec![1.0, 1.0, 1.0];
        let rep = restricted_poincare_check(&f, &w, 2.0, &NormSpec::lp(2.0, 1).unwrap(), 1.0)
            .unwrap();
        assert!(rep.note.is_some());
        assert_eq!(rep.rhs, 0.0);
        assert!((rep.lhs - 4.0).abs() < 1e-12); // |f(v) - f(-v)| = 2, squared
        assert_eq!(rep.holds, Some(false));
    }
}
