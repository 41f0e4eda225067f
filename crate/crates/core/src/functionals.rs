//! Inequality functionals over cube functions: two-sided quantities whose
//! ratio certifies (lower-bounds) a geometric constant of the target space.
//!
//! Everything here is an exact finite sum unless a sampled mode is requested
//! explicitly. Reported `ratio`s are certificates, not estimates: a ratio r
//! proves the associated constant is at least r^{1/p} for the tested family,
//! and nothing more. Operations that carry a caller-supplied constant budget
//! (the biased Poincaré check) also emit a boolean verdict; the rest leave
//! `holds` empty because their sharp constants are not pinned down.

use crate::cube::{expectation, BiasVector, CubeFunction, CubePoint, ProductMeasure};
use crate::heatflow::biased_derivative;
use crate::norms::{orlicz_norm, weak_lp_norm, NormSpec};
use crate::rng::stream_rng;
use crate::{Error, Result};
use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;
use std::sync::Arc;

/// Largest number of vectors accepted by the exhaustive sign-sum functionals
/// (`2^n` terms each).
pub const MAX_SIGN_ENUM: usize = 20;

// ===========================================================================
// Report plumbing
// ===========================================================================

/// Uniform two-sided result record. `ratio = lhs/rhs` whenever `rhs > 0`;
/// a `0/0` functional reports ratio 0 and a positive `lhs` over a zero `rhs`
/// reports infinity. When a `constant_budget` is present, `holds` states
/// `lhs <= budget * rhs`; otherwise the verdict is left empty.
#[derive(Clone, Debug, Serialize)]
pub struct InequalityReport {
    pub lhs: f64,
    pub rhs: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub constant_budget: Option<f64>,
    pub ratio: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub holds: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl InequalityReport {
    /// Assembles a report, deriving `ratio` and the budget verdict.
    pub fn new(lhs: f64, rhs: f64, constant_budget: Option<f64>) -> Self {
        let ratio = if rhs > 0.0 {
            lhs / rhs
        } else if lhs == 0.0 {
            0.0
        } else {
            f64::INFINITY
        };
        let holds = constant_budget.map(|b| lhs <= b * rhs);
        InequalityReport {
            lhs,
            rhs,
            constant_budget,
            ratio,
            holds,
            note: None,
        }
    }

    pub fn with_note(mut self, note: impl Into<String>) -> Self {
        self.note = Some(note.into());
        self
    }
}

fn check_norm_dim(norm: &NormSpec, d: usize) -> Result<()> {
    if norm.d() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: norm.d(),
        });
    }
    Ok(())
}

fn check_vectors(vectors: &[Vec<f64>]) -> Result<usize> {
    if vectors.is_empty() {
        return Err(Error::Empty("vector list"));
    }
    if vectors.len() > MAX_SIGN_ENUM {
        return Err(Error::ExactCapExceeded {
            n: vectors.len(),
            max: MAX_SIGN_ENUM,
        });
    }
    let d = vectors[0].len();
    if d == 0 {
        return Err(Error::Empty("vector entries"));
    }
    for (i, v) in vectors.iter().enumerate() {
        if v.len() != d {
            return Err(Error::BadLength {
                expected: d,
                got: v.len(),
            });
        }
        if let Some(&bad) = v.iter().find(|x| !x.is_finite()) {
            return Err(Error::NonFinite {
                index: i,
                value: bad,
            });
        }
    }
    Ok(d)
}

/// `2^-n sum_x norm(sum_i x_i v_i)^p`, the exhaustive symmetrized moment.
fn sign_sum_moment(vectors: &[Vec<f64>], p: f64, norm: &NormSpec) -> Result<f64> {
    let n = vectors.len();
    let d = vectors[0].len();
    let mut acc = vec![0.0; d];
    let mut total = 0.0;
    for mask in 0..(1u64 << n) {
        acc.fill(0.0);
        for (i, v) in vectors.iter().enumerate() {
            let s = if mask & (1 << i) != 0 { 1.0 } else { -1.0 };
            for j in 0..d {
                acc[j] += s * v[j];
            }
        }
        total += norm.norm(&acc).powf(p);
    }
    Ok(total / (1u64 << n) as f64)
}

// ===========================================================================
// Enflo type and Rademacher type / cotype
// ===========================================================================

/// Enflo-type functional under the uniform measure:
/// `lhs = avg_x norm(f(x) - f(-x))^p`,
/// `rhs = sum_i avg_x norm(f(x) - f(flip(x,i)))^p`.
/// The ratio is a certified lower bound for the p-th power of the Enflo type
/// constant of the target. No verdict: the sharp constant is not supplied.
pub fn enflo_functional(f: &CubeFunction, p: f64, norm: &NormSpec) -> Result<InequalityReport> {
    check_p_at_least_one(p)?;
    check_norm_dim(norm, f.d())?;
    let (n, d) = (f.n(), f.d());
    let size = 1u32 << n;
    let mut diff = vec![0.0; d];
    let mut lhs = 0.0;
    let mut rhs = 0.0;
    for mask in 0..size {
        let x = CubePoint::new(n, mask)?;
        let fx = f.value(mask);
        let fa = f.value(x.antipode().mask());
        for j in 0..d {
            diff[j] = fx[j] - fa[j];
        }
        lhs += norm.norm(&diff).powf(p);
        for i in 0..n {
            let fy = f.value(mask ^ (1 << i));
            for j in 0..d {
                diff[j] = fx[j] - fy[j];
            }
            rhs += norm.norm(&diff).powf(p);
        }
    }
    let scale = size as f64;
    Ok(InequalityReport::new(lhs / scale, rhs / scale, None))
}

/// Rademacher-type functional: `lhs = avg_x norm(sum_i x_i v_i)^p`,
/// `rhs = sum_i norm(v_i)^p`. `ratio^{1/p}` lower-bounds the Rademacher
/// type-p constant.
pub fn rademacher_type_ratio(
    vectors: &[Vec<f64>],
    p: f64,
    norm: &NormSpec,
) -> Result<InequalityReport> {
    check_p_at_least_one(p)?;
    let d = check_vectors(vectors)?;
    check_norm_dim(norm, d)?;
    let lhs = sign_sum_moment(vectors, p, norm)?;
    let rhs: f64 = vectors.iter().map(|v| norm.norm(v).powf(p)).sum();
    Ok(InequalityReport::new(lhs, rhs, None))
}

/// Cotype functional: same two sums with exponent `q >= 2`, but read the
/// other way around — `(rhs/lhs)^{1/q}` lower-bounds the cotype-q constant.
pub fn cotype_ratio(vectors: &[Vec<f64>], q: f64, norm: &NormSpec) -> Result<InequalityReport> {
    if !(q >= 2.0 && q.is_finite()) {
        return Err(Error::InvalidParameter {
            name: "q",
            value: q,
            reason: "cotype exponent must satisfy q >= 2",
        });
    }
    let d = check_vectors(vectors)?;
    check_norm_dim(norm, d)?;
    let lhs = sign_sum_moment(vectors, q, norm)?;
    let rhs: f64 = vectors.iter().map(|v| norm.norm(v).powf(q)).sum();
    Ok(InequalityReport::new(lhs, rhs, None))
}

fn check_p_at_least_one(p: f64) -> Result<()> {
    if !(p >= 1.0 && p.is_finite()) {
        return Err(Error::InvalidParameter {
            name: "p",
            value: p,
            reason: "moment exponent must be finite and >= 1",
        });
    }
    Ok(())
}

// ===========================================================================
// Biased Poincaré
// ===========================================================================

/// Biased Poincaré functional:
/// `lhs = E_mu norm(f - E_mu f)^p`, `rhs = sum_i E_mu norm(d_i f)^p` with the
/// coordinate-biased derivatives, and budget `(2 pi T_p)^p` from the
/// caller-supplied type constant `tp` of the target space. The verdict
/// `holds` checks `lhs <= budget * rhs` exactly.
pub fn poincare_functional(
    f: &CubeFunction,
    bias: &BiasVector,
    p: f64,
    norm: &NormSpec,
    tp: f64,
) -> Result<InequalityReport> {
    check_p_at_least_one(p)?;
    check_norm_dim(norm, f.d())?;
    if !(tp > 0.0 && tp.is_finite()) {
        return Err(Error::InvalidParameter {
            name: "tp",
            value: tp,
            reason: "type constant must be positive and finite",
        });
    }
    if f.n() != bias.n() {
        return Err(Error::DimensionMismatch {
            expected: bias.n(),
            got: f.n(),
        });
    }
    let (n, d) = (f.n(), f.d());
    let mu = ProductMeasure::new(bias.clone())?;
    let weights = mu.weights();
    let mean = expectation(f, &mu)?;

    let mut lhs = 0.0;
    let mut centered = vec![0.0; d];
    for mask in 0..(1u32 << n) {
        let fx = f.value(mask);
        for j in 0..d {
            centered[j] = fx[j] - mean[j];
        }
        lhs += weights[mask as usize] * norm.norm(&centered).powf(p);
    }

    let mut rhs = 0.0;
    for i in 0..n {
        let di = biased_derivative(f, i, bias.alpha(i))?;
        for mask in 0..(1u32 << n) {
            rhs += weights[mask as usize] * norm.norm(di.value(mask)).powf(p);
        }
    }

    let budget = (2.0 * std::f64::consts::PI * tp).powf(p);
    Ok(InequalityReport::new(lhs, rhs, Some(budget)))
}

// ===========================================================================
// Pisier functionals
// ===========================================================================

/// How the sign average over `delta` is evaluated.
#[derive(Clone, Copy, Debug)]
pub enum DeltaMode {
    /// Sum over all `2^n` sign vectors. Rejected for `n > 10`.
    Exact,
    /// Average over `trials` uniform sign vectors drawn from a dedicated
    /// stream of `seed`.
    Sampled { trials: u64, seed: u64 },
}

/// Result of the delta-averaged derivative moment.
#[derive(Clone, Debug, Serialize)]
pub struct PisierRhs {
    /// `pow_mean^{1/p}`, the quantity entering the inequalities.
    pub value: f64,
    /// `avg_delta norm(sum_i delta_i d_i f)_{L_p(mu)}^p`.
    pub pow_mean: f64,
    /// Standard error of `pow_mean` across sampled deltas (sampled mode only).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pow_stderr: Option<f64>,
    /// `avg_delta norm(sum_i delta_i d_i f)_{L_1(mu)}`, the companion term
    /// that the logarithmic lower-order correction multiplies.
    pub l1_mean: f64,
}

/// Evaluates the delta-averaged gradient moment
/// `( avg_delta || sum_i delta_i d_i f ||_{L_p(mu_alpha)}^p )^{1/p}`
/// together with the matching `L_1(mu_alpha)` average, for a *constant* bias
/// `alpha` across coordinates.
pub fn pisier_rhs(
    f: &CubeFunction,
    alpha: f64,
    p: f64,
    norm: &NormSpec,
    mode: DeltaMode,
) -> Result<PisierRhs> {
    check_p_at_least_one(p)?;
    check_norm_dim(norm, f.d())?;
    let n = f.n();
    let bias = BiasVector::constant(n, alpha)?;
    let mu = ProductMeasure::new(bias.clone())?;
    let weights = mu.weights();
    let derivs: Vec<CubeFunction> = (0..n)
        .map(|i| biased_derivative(f, i, alpha))
        .collect::<Result<_>>()?;

    // one delta -> (L_p(mu)^p, L_1(mu)) of sum_i delta_i d_i f
    let eval_delta = |delta_mask: u64| -> (f64, f64) {
        let d = f.d();
        let mut accp = 0.0;
        let mut acc1 = 0.0;
        let mut g = vec![0.0; d];
        for mask in 0..(1u32 << n) {
            g.fill(0.0);
            for (i, di) in derivs.iter().enumerate() {
                let s = if delta_mask & (1 << i) != 0 { 1.0 } else { -1.0 };
                let row = di.value(mask);
                for j in 0..d {
                    g[j] += s * row[j];
                }
            }
            let nv = norm.norm(&g);
            let w = weights[mask as usize];
            accp += w * nv.powf(p);
            acc1 += w * nv;
        }
        (accp, acc1)
    };

    match mode {
        DeltaMode::Exact => {
            if n > 10 {
                return Err(Error::ExactCapExceeded { n, max: 10 });
            }
            // parallel over deltas, combined in index order for determinism
            let rows: Vec<(f64, f64)> = (0..(1u64 << n)).into_par_iter().map(eval_delta).collect();
            let count = rows.len() as f64;
            let (sp, s1) = rows
                .iter()
                .fold((0.0, 0.0), |(ap, a1), (bp, b1)| (ap + bp, a1 + b1));
            let pow_mean = sp / count;
            Ok(PisierRhs {
                value: pow_mean.powf(1.0 / p),
                pow_mean,
                pow_stderr: None,
                l1_mean: s1 / count,
            })
        }
        DeltaMode::Sampled { trials, seed } => {
            if trials == 0 {
                return Err(Error::Empty("sampling budget"));
            }
            let mut rng = stream_rng(seed, 0x7069736965722d64); // fixed stream tag
            let mut sp = 0.0;
            let mut spp = 0.0;
            let mut s1 = 0.0;
            for _ in 0..trials {
                let delta_mask: u64 = rng.random::<u64>() & ((1u64 << n) - 1).max(1);
                let (ap, a1) = eval_delta(delta_mask);
                sp += ap;
                spp += ap * ap;
                s1 += a1;
            }
            let count = trials as f64;
            let pow_mean = sp / count;
            let stderr = if trials >= 2 {
                let var = ((spp - count * pow_mean * pow_mean) / (count - 1.0)).max(0.0);
                Some((var / count).sqrt())
            } else {
                Some(0.0)
            };
            Ok(PisierRhs {
                value: pow_mean.powf(1.0 / p),
                pow_mean,
                pow_stderr: stderr,
                l1_mean: s1 / count,
            })
        }
    }
}

/// Which norm measures the centered function on the left-hand side.
#[derive(Clone, Copy, Debug)]
pub enum PisierMode {
    /// Plain `L_p(mu_alpha)` norm; the matching budget shape is
    /// `(log n + 1)` times an unspecified constant.
    Lp,
    /// `L_p(log L)^a` Orlicz norm with explicit exponent `a` (the sharp
    /// statement uses `a = p/2`; `a = 0` collapses to `Lp`).
    Orlicz { a: f64 },
}

/// Full Pisier-style report.
#[derive(Clone, Debug, Serialize)]
pub struct PisierReport {
    pub report: InequalityReport,
    /// `ratio / (ln n + 1)`: the empirical constant normalized by the
    /// logarithmic budget shape. Reported, never judged — the sharp
    /// constants are existential.
    pub ratio_per_log: f64,
    /// The lower-order companion `(ln n + 1) * l1_mean` of the two-term
    /// bound.
    pub l1_term: f64,
}

/// Evaluates `lhs = norm-of-choice of (f - E_mu f)` against the
/// delta-averaged derivative moment `rhs`, under constant bias `alpha`.
/// The ratio and its log-normalized form are informational: no verdict is
/// attached because the inequality's constants are existential.
pub fn pisier_report(
    f: &CubeFunction,
    alpha: f64,
    p: f64,
    norm: &NormSpec,
    lhs_mode: PisierMode,
    delta_mode: DeltaMode,
) -> Result<PisierReport> {
    check_p_at_least_one(p)?;
    check_norm_dim(norm, f.d())?;
    let (n, d) = (f.n(), f.d());
    let bias = BiasVector::constant(n, alpha)?;
    let mu = ProductMeasure::new(bias)?;
    let weights = mu.weights();
    let mean = expectation(f, &mu)?;

    let centered: Vec<Vec<f64>> = (0..(1u32 << n))
        .map(|mask| {
            let fx = f.value(mask);
            (0..d).map(|j| fx[j] - mean[j]).collect()
        })
        .collect();
    let weighted: Vec<(&[f64], f64)> = centered
        .iter()
        .enumerate()
        .map(|(idx, row)| (row.as_slice(), weights[idx]))
        .collect();

    let lhs = match lhs_mode {
        PisierMode::Lp => {
            let mut acc = 0.0;
            for (row, w) in &weighted {
                acc += w * norm.norm(row).powf(p);
            }
            acc.powf(1.0 / p)
        }
        PisierMode::Orlicz { a } => orlicz_norm(&weighted, norm, p, a)?,
    };

    let rhs = pisier_rhs(f, alpha, p, norm, delta_mode)?;
    let log_budget = (n as f64).ln() + 1.0;
    let report = InequalityReport::new(lhs, rhs.value, None);
    let ratio_per_log = if report.ratio.is_finite() {
        report.ratio / log_budget
    } else {
        report.ratio
    };
    Ok(PisierReport {
        ratio_per_log,
        l1_term: log_budget * rhs.l1_mean,
        report,
    })
}

// ===========================================================================
// Asymmetric gradient
// ===========================================================================

/// Asymmetric gradient of a scalar function:
/// `M h(x) = sqrt( sum_i max(d_i h(x), 0)^2 )` with the *unbiased* discrete
/// derivative `d_i h(x) = (h(x) - h(flip(x,i))) / 2`.
pub fn asymmetric_gradient(h: &CubeFunction) -> Result<CubeFunction> {
    if h.d() != 1 {
        return Err(Error::InvalidParameter {
            name: "d",
            value: h.d() as f64,
            reason: "the asymmetric gradient is defined for scalar functions",
        });
    }
    let n = h.n();
    CubeFunction::from_fn(n, 1, |x| {
        let hx = h.value(x.mask())[0];
        let mut acc = 0.0;
        for i in 0..n {
            let diff = 0.5 * (hx - h.value(x.mask() ^ (1 << i))[0]);
            if diff > 0.0 {
                acc += diff * diff;
            }
        }
        vec![acc.sqrt()]
    })
}

/// Largest violation of the pointwise gradient bound
/// `M(norm of f)(x) <= sqrt(2) (avg_delta norm(sum_i delta_i d_i f(x))^p)^{1/p}`
/// over all vertices (unbiased derivatives; exhaustive average over the
/// `2^n` sign vectors). Non-positive output (up to 1e-12) certifies the
/// bound for this instance. `O(4^n)` — capped at n = 12.
pub fn pointwise_gradient_bound(f: &CubeFunction, p: f64, norm: &NormSpec) -> Result<f64> {
    check_p_at_least_one(p)?;
    check_norm_dim(norm, f.d())?;
    let (n, d) = (f.n(), f.d());
    if n > 12 {
        return Err(Error::ExactCapExceeded { n, max: 12 });
    }
    // scalar function x -> norm(f(x)), then its asymmetric gradient
    let norm_f = CubeFunction::from_fn(n, 1, |x| vec![norm.norm(f.value(x.mask()))])?;
    let m_norm_f = asymmetric_gradient(&norm_f)?;

    let derivs: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            (0..(1u32 << n))
                .flat_map(|mask| {
                    let fx = f.value(mask);
                    let fy = f.value(mask ^ (1 << i));
                    (0..d).map(move |j| 0.5 * (fx[j] - fy[j]))
                })
                .collect()
        })
        .collect();

    let mut worst = f64::NEG_INFINITY;
    let mut g = vec![0.0; d];
    for mask in 0..(1u32 << n) {
        let mut acc = 0.0;
        for delta in 0..(1u64 << n) {
            g.fill(0.0);
            for (i, di) in derivs.iter().enumerate() {
                let s = if delta & (1 << i) != 0 { 1.0 } else { -1.0 };
                let row = &di[mask as usize * d..(mask as usize + 1) * d];
                for j in 0..d {
                    g[j] += s * row[j];
                }
            }
            acc += norm.norm(&g).powf(p);
        }
        let rhs = (acc / (1u64 << n) as f64).powf(1.0 / p);
        let viol = m_norm_f.value(mask)[0] - std::f64::consts::SQRT_2 * rhs;
        worst = worst.max(viol);
    }
    Ok(worst)
}

// ===========================================================================
// Metric stable type
// ===========================================================================

/// A metric on the value space: either induced by a norm
/// (`d(u,v) = norm(u - v)`) or an arbitrary callback. Callbacks are
/// spot-checked at registration on 100 seeded random pairs: symmetry,
/// `d(u,u) = 0`, non-negativity, and finiteness.
#[derive(Clone)]
pub enum MetricSpec {
    Norm(NormSpec),
    Callback {
        d: usize,
        #[allow(clippy::type_complexity)]
        dist: Arc<dyn Fn(&[f64], &[f64]) -> f64 + Send + Sync>,
    },
}

impl std::fmt::Debug for MetricSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            MetricSpec::Norm(n) => f.debug_tuple("MetricSpec::Norm").field(n).finish(),
            MetricSpec::Callback { d, .. } => f
                .debug_struct("MetricSpec::Callback")
                .field("d", d)
                .finish_non_exhaustive(),
        }
    }
}

impl MetricSpec {
    pub fn from_norm(norm: NormSpec) -> Self {
        MetricSpec::Norm(norm)
    }

    /// Registers a callback metric on `d`-dimensional values after the
    /// random spot check described above.
    pub fn callback(
        d: usize,
        dist: Arc<dyn Fn(&[f64], &[f64]) -> f64 + Send + Sync>,
    ) -> Result<Self> {
        if d == 0 {
            return Err(Error::Empty("metric dimension"));
        }
        let mut rng = stream_rng(0x6d65747269637370, 0);
        for trial in 0..100 {
            let u: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
            let v: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
            let duv = dist(&u, &v);
            let dvu = dist(&v, &u);
            let duu = dist(&u, &u);
            if !duv.is_finite() || !dvu.is_finite() || !duu.is_finite() {
                return Err(Error::MetricRejected(format!(
                    "non-finite distance on spot-check pair {trial}"
                )));
            }
            if duv < 0.0 {
                return Err(Error::MetricRejected(format!(
                    "negative distance {duv} on spot-check pair {trial}"
                )));
            }
            if (duv - dvu).abs() > 1e-12 * (1.0 + duv.abs()) {
                return Err(Error::MetricRejected(format!(
                    "asymmetric on spot-check pair {trial}: {duv} vs {dvu}"
                )));
            }
            if duu.abs() > 1e-12 {
                return Err(Error::MetricRejected(format!(
                    "d(u,u) = {duu} != 0 on spot-check pair {trial}"
                )));
            }
        }
        Ok(MetricSpec::Callback { d, dist })
    }

    pub fn d(&self) -> usize {
        match self {
            MetricSpec::Norm(n) => n.d(),
            MetricSpec::Callback { d, .. } => *d,
        }
    }

    /// Distance between two values (lengths must equal `self.d()`).
    pub fn distance(&self, u: &[f64], v: &[f64]) -> f64 {
        assert_eq!(u.len(), self.d(), "metric dimension mismatch");
        assert_eq!(v.len(), self.d(), "metric dimension mismatch");
        match self {
            MetricSpec::Norm(n) => {
                let diff: Vec<f64> = u.iter().zip(v).map(|(a, b)| a - b).collect();
                n.norm(&diff)
            }
            MetricSpec::Callback { dist, .. } => dist(u, v),
        }
    }
}

/// Metric stable-type functional under the uniform measure:
/// `lhs = avg_x d(f(x), f(-x))^p` and
/// `rhs = avg_x (weak-lp norm of (d(f(x), f(flip(x,i)))/2)_i)^p`.
/// `ratio^{1/p}` lower-bounds the metric stable type p constant.
/// Exponent range `p` in (0, 2).
pub fn metric_stable_functional(
    f: &CubeFunction,
    p: f64,
    metric: &MetricSpec,
) -> Result<InequalityReport> {
    if !(p > 0.0 && p < 2.0) {
        return Err(Error::InvalidParameter {
            name: "p",
            value: p,
            reason: "stable-type exponent must lie in (0, 2)",
        });
    }
    if metric.d() != f.d() {
        return Err(Error::DimensionMismatch {
            expected: f.d(),
            got: metric.d(),
        });
    }
    let n = f.n();
    let size = 1u32 << n;
    let mut lhs = 0.0;
    let mut rhs = 0.0;
    let mut halves = vec![0.0; n];
    for mask in 0..size {
        let x = CubePoint::new(n, mask)?;
        let fx = f.value(mask);
        lhs += metric.distance(fx, f.value(x.antipode().mask())).powf(p);
        for (i, h) in halves.iter_mut().enumerate() {
            *h = 0.5 * metric.distance(fx, f.value(mask ^ (1 << i)));
        }
        rhs += weak_lp_norm(&halves, p)?.powf(p);
    }
    let scale = size as f64;
    Ok(InequalityReport::new(lhs / scale, rhs / scale, None))
}

/// Weak-norm stable-type functional on a fixed vector family:
/// `lhs = avg_x norm(sum_i x_i v_i)^p`,
/// `rhs = (weak-lp norm of (norm(v_1), ..., norm(v_n)))^p`.
/// `ratio^{1/p}` lower-bounds the stable type p constant. `p` in [1, 2).
pub fn stable_weak_functional(
    vectors: &[Vec<f64>],
    p: f64,
    norm: &NormSpec,
) -> Result<InequalityReport> {
    if !(1.0..2.0).contains(&p) {
        return Err(Error::InvalidParameter {
            name: "p",
            value: p,
            reason: "stable-type exponent must lie in [1, 2)",
        });
    }
    let d = check_vectors(vectors)?;
    check_norm_dim(norm, d)?;
    let lhs = sign_sum_moment(vectors, p, norm)?;
    let lengths: Vec<f64> = vectors.iter().map(|v| norm.norm(v)).collect();
    let rhs = weak_lp_norm(&lengths, p)?.powf(p);
    Ok(InequalityReport::new(lhs, rhs, None))
}

// ===========================================================================
// Tests
// ===========================================================================
