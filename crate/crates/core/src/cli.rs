//! Batch front-end for the laboratory: verification suites, inequality
//! sweeps, antipodal searches, distortion tables, and Monte Carlo
//! cross-checks, all emitting one machine-readable report.
//!
//! Report schema (JSON): `{config, results[], residuals{}, verdict}` plus an
//! optional `meta` block that `--no-meta` drops so identical configurations
//! produce byte-identical output. CSV output flattens `results[]` only.
//! Exit status: 0 when every asserted contract holds, 1 when some trial
//! violates one (the violating rows stay in the report), 2 on configuration
//! errors.
//!
//! Every random draw descends from `--seed` through per-trial counter
//! streams, so reports are reproducible run-to-run and independent of the
//! worker-pool size (`HEATCUBE_THREADS` overrides the default parallelism).

use crate::cube::{BiasVector, CubeFunction, CubePoint, ProductMeasure, WeightVector};
use crate::embeddings::{
    distortion, edge_antipodal_ratio, lower_bound_ivv, lower_bound_main, lower_bound_ole,
    lower_bound_weighted, p_sweep, sharp_example, snowflake_bound, BoundInputs, BoundKind,
    CubeMetric,
};
use crate::fourier::walsh_transform;
use crate::functionals::{
    enflo_functional, metric_stable_functional, pisier_report, poincare_functional, DeltaMode,
    MetricSpec, PisierMode,
};
use crate::heatflow::{
    kernel_nd, mc_semigroup, semigroup_apply, theta_star_vector, verify_identity,
};
use crate::norms::NormSpec;
use crate::rng::{random_bias, random_function, random_sparse_function, stream_rng, DEFAULT_SEED};
use crate::topology::{find_antipodal_zero, restricted_poincare_check, SearchOpts};
use crate::{expectation, Error, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::{json, Value};
use std::collections::BTreeMap;
use std::path::PathBuf;

pub const EXIT_PASS: i32 = 0;
pub const EXIT_VIOLATION: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;

/// Environment variable overriding the worker-pool size.
pub const THREADS_ENV: &str = "HEATCUBE_THREADS";

// ===========================================================================
// Argument surface
// ===========================================================================

#[derive(Parser, Debug)]
#[command(
    name = "heatcube",
    version,
    about = "Exact and Monte Carlo laboratory for heat flow on the biased hypercube"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Check the generator/semigroup derivative identity on random instances.
    VerifyIdentity(IdentityArgs),
    /// Check semigroup composition, stationarity, and detailed balance.
    Semigroup(SemigroupArgs),
    /// Antipodal Poincaré comparison with the 2*pi*Tp budget.
    Poincare(PoincareArgs),
    /// Two-term derivative-moment report (informational ratios, no verdict
    /// beyond finiteness).
    Pisier(PisierArgs),
    /// Antipodal-versus-edge displacement comparison with unit budget.
    Enflo(EnfloArgs),
    /// Weak-norm stable-type functional plus its Markov cross-check.
    StableType(StableTypeArgs),
    /// Antipodal-zero search on the skeleton plus the restricted Poincaré
    /// check on each witness.
    Borsuk(BorsukArgs),
    /// Exact distortion of an explicit map plus the lower-bound table.
    Distortion(DistortionArgs),
    /// Monte Carlo semigroup estimates against the exact operator.
    Simulate(SimulateArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

/// Flags shared by every subcommand.
#[derive(Args, Clone, Debug)]
pub struct CommonArgs {
    /// Master seed; every random draw descends from it deterministically.
    #[arg(long, default_value_t = DEFAULT_SEED)]
    pub seed: u64,
    /// Report format.
    #[arg(long, value_enum, default_value_t = Format::Json)]
    pub format: Format,
    /// Write the report to this file instead of stdout.
    #[arg(long)]
    pub output: Option<PathBuf>,
    /// Omit the volatile metadata block (timestamp, version, pool size) so
    /// identical configurations produce byte-identical reports.
    #[arg(long)]
    pub no_meta: bool,
}

/// Per-coordinate bias: one value broadcast to all coordinates, or a
/// comma-separated list of length n.
fn parse_f64_list(s: &str) -> std::result::Result<Vec<f64>, String> {
    s.split(',')
        .map(|t| t.trim().parse::<f64>().map_err(|e| format!("{t:?}: {e}")))
        .collect()
}

#[derive(Clone, Debug)]
pub enum ThetaSpec {
    /// Per-coordinate variance-minimizing value.
    Star,
    /// Explicit values (scalar broadcast or length-n list).
    List(Vec<f64>),
}

fn parse_theta(s: &str) -> std::result::Result<ThetaSpec, String> {
    if s.eq_ignore_ascii_case("star") {
        Ok(ThetaSpec::Star)
    } else {
        parse_f64_list(s).map(ThetaSpec::List)
    }
}

#[derive(Args, Debug)]
pub struct IdentityArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Cube dimension (1..=12).
    #[arg(long)]
    pub n: usize,
    /// Range dimension.
    #[arg(long, default_value_t = 1)]
    pub d: usize,
    /// Random instances to check.
    #[arg(long, default_value_t = 100)]
    pub trials: u64,
    /// Pass threshold on the scaled residual.
    #[arg(long, default_value_t = 1e-10)]
    pub tol: f64,
    /// Fixed bias (scalar or comma list); random in (0.05, 0.95) if absent.
    #[arg(long, value_parser = parse_f64_list)]
    pub alpha: Option<Vec<f64>>,
    /// Fixed time parameter q in (0, 1); random in (0.05, 0.95) if absent.
    #[arg(long, conflicts_with = "t")]
    pub q: Option<f64>,
    /// Time t > 0 as an alternative to q = e^{-t}.
    #[arg(long)]
    pub t: Option<f64>,
    /// Coefficient offsets: "star" or explicit values.
    #[arg(long, value_parser = parse_theta, default_value = "star")]
    pub theta: ThetaSpec,
    /// Draw test functions with this many random Walsh coefficients
    /// instead of dense tables.
    #[arg(long)]
    pub fourier_sparse: Option<usize>,
}

#[derive(Args, Debug)]
pub struct SemigroupArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Cube dimension (1..=8; the detailed-balance scan is exhaustive).
    #[arg(long)]
    pub n: usize,
    /// Range dimension.
    #[arg(long, default_value_t = 1)]
    pub d: usize,
    #[arg(long, default_value_t = 20)]
    pub trials: u64,
    /// Residual threshold for all three laws.
    #[arg(long, default_value_t = 1e-11)]
    pub tol: f64,
    #[arg(long, value_parser = parse_f64_list)]
    pub alpha: Option<Vec<f64>>,
    /// First factor time parameter; random if absent.
    #[arg(long, conflicts_with = "t")]
    pub q: Option<f64>,
    #[arg(long)]
    pub t: Option<f64>,
    /// Second factor time parameter; random if absent.
    #[arg(long)]
    pub q2: Option<f64>,
    #[arg(long)]
    pub fourier_sparse: Option<usize>,
}

#[derive(Args, Debug)]
pub struct PoincareArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[arg(long)]
    pub n: usize,
    #[arg(long, default_value_t = 1)]
    pub d: usize,
    /// Moment exponent (norm is l_p on the range).
    #[arg(long, default_value_t = 2.0)]
    pub p: f64,
    /// Type constant entering the budget (2 pi tp)^p.
    #[arg(long, default_value_t = 1.0)]
    pub tp: f64,
    #[arg(long, default_value_t = 50)]
    pub trials: u64,
    #[arg(long, value_parser = parse_f64_list)]
    pub alpha: Option<Vec<f64>>,
    #[arg(long)]
    pub fourier_sparse: Option<usize>,
}

#[derive(Args, Debug)]
pub struct PisierArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[arg(long)]
    pub n: usize,
    #[arg(long, default_value_t = 1)]
    pub d: usize,
    #[arg(long, default_value_t = 2.0)]
    pub p: f64,
    /// Constant bias (scalar only for this report).
    #[arg(long, default_value_t = 0.5)]
    pub alpha: f64,
    /// Evaluate the left side in the gauge norm with this log exponent
    /// (absent: plain L_p).
    #[arg(long)]
    pub orlicz_a: Option<f64>,
    #[arg(long, default_value_t = 20)]
    pub trials: u64,
    /// Sign-vector sample count once n > 10 forces sampling.
    #[arg(long, default_value_t = 2048)]
    pub delta_samples: u64,
    #[arg(long)]
    pub fourier_sparse: Option<usize>,
}

#[derive(Args, Debug)]
pub struct EnfloArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[arg(long)]
    pub n: usize,
    #[arg(long, default_value_t = 1)]
    pub d: usize,
    #[arg(long, default_value_t = 2.0)]
    pub p: f64,
    #[arg(long, default_value_t = 50)]
    pub trials: u64,
    #[arg(long)]
    pub fourier_sparse: Option<usize>,
}

#[derive(Args, Debug)]
pub struct StableTypeArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[arg(long)]
    pub n: usize,
    #[arg(long, default_value_t = 1)]
    pub d: usize,
    /// Stable-type exponent in [1, 2) (also the range norm).
    #[arg(long, default_value_t = 1.0)]
    pub p: f64,
    #[arg(long, default_value_t = 50)]
    pub trials: u64,
    #[arg(long)]
    pub fourier_sparse: Option<usize>,
}

#[derive(Args, Debug)]
pub struct BorsukArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[arg(long)]
    pub n: usize,
    /// Dimension of the target space (must be below n).
    #[arg(long)]
    pub range_dim: usize,
    /// Skeleton dimension to search (default: the range dimension).
    #[arg(long)]
    pub skeleton: Option<usize>,
    /// Witness residual tolerance.
    #[arg(long, default_value_t = 1e-8)]
    pub tol: f64,
    /// Moment exponent of the restricted comparison.
    #[arg(long, default_value_t = 2.0)]
    pub p: f64,
    /// Type constant of the restricted comparison budget.
    #[arg(long, default_value_t = 1.0)]
    pub tp: f64,
    #[arg(long, default_value_t = 1)]
    pub trials: u64,
    #[arg(long, default_value_t = 8)]
    pub multistarts: usize,
    #[arg(long, default_value_t = 60)]
    pub max_newton: usize,
    #[arg(long)]
    pub fourier_sparse: Option<usize>,
}

#[derive(Args, Debug)]
pub struct DistortionArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Measure the block-sum map instead of random maps.
    #[arg(long)]
    pub sharp: bool,
    #[arg(long)]
    pub n: usize,
    #[arg(long, default_value_t = 1)]
    pub d: usize,
    /// Exponent in [1, 2]: range norm and bound formulas.
    #[arg(long, default_value_t = 2.0)]
    pub p: f64,
    /// Type constant for the bound table.
    #[arg(long, default_value_t = 1.0)]
    pub tp: f64,
    /// Smoothness constant (adds the smoothness bound to the table).
    #[arg(long)]
    pub sp: Option<f64>,
    /// Stable-type constant (adds the weighted bound to the table).
    #[arg(long)]
    pub s: Option<f64>,
    /// Hamming weights for the metric and the weighted bound (unit if
    /// absent).
    #[arg(long, value_parser = parse_f64_list)]
    pub weights: Option<Vec<f64>>,
    /// Snowflake exponent in (0, 1) (adds the snowflake bound).
    #[arg(long)]
    pub theta: Option<f64>,
    /// Random maps to measure (ignored with --sharp).
    #[arg(long, default_value_t = 1)]
    pub trials: u64,
    #[arg(long)]
    pub fourier_sparse: Option<usize>,
}

#[derive(Args, Debug)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[arg(long)]
    pub n: usize,
    #[arg(long, default_value_t = 1)]
    pub d: usize,
    /// Time parameter q in (0, 1]; q = 1 short-circuits to the exact value.
    #[arg(long, conflicts_with = "t")]
    pub q: Option<f64>,
    #[arg(long)]
    pub t: Option<f64>,
    #[arg(long, value_parser = parse_f64_list)]
    pub alpha: Option<Vec<f64>>,
    /// Walk replicas per estimate.
    #[arg(long, default_value_t = 10_000)]
    pub samples: u64,
    /// Variance-estimation blocks.
    #[arg(long, default_value_t = 8)]
    pub blocks: usize,
    #[arg(long, default_value_t = 20)]
    pub trials: u64,
    /// Start vertex as a bitmask (set bit = +1 coordinate).
    #[arg(long, default_value_t = 0)]
    pub x: u32,
    #[arg(long)]
    pub fourier_sparse: Option<usize>,
}

// ===========================================================================
// Report plumbing
// ===========================================================================

/// The one report shape every subcommand emits.
#[derive(Serialize, Debug)]
pub struct Report {
    pub config: Value,
    pub results: Vec<Value>,
    pub residuals: BTreeMap<String, Value>,
    pub verdict: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub meta: Option<Value>,
}

/// JSON-safe number: infinities and NaN become explicit strings instead of
/// the nulls serde_json would emit.
fn num(v: f64) -> Value {
    if v.is_finite() {
        json!(v)
    } else if v.is_nan() {
        json!("nan")
    } else if v > 0.0 {
        json!("inf")
    } else {
        json!("-inf")
    }
}

fn nums(v: &[f64]) -> Value {
    Value::Array(v.iter().map(|&x| num(x)).collect())
}

struct ReportBuilder {
    config: Value,
    rows: Vec<Value>,
    residuals: BTreeMap<String, Value>,
    ok: bool,
}

impl ReportBuilder {
    fn new(config: Value) -> Self {
        ReportBuilder {
            config,
            rows: Vec::new(),
            residuals: BTreeMap::new(),
            ok: true,
        }
    }

    fn push(&mut self, row: Value, pass: bool) {
        self.rows.push(row);
        self.ok &= pass;
    }

    /// Records a trial that could not run at all (still a violation).
    fn push_error(&mut self, trial: u64, err: &Error) {
        self.rows.push(json!({
            "trial": trial,
            "error": err.to_string(),
            "pass": false,
        }));
        self.ok = false;
    }

    fn residual(&mut self, key: &str, v: f64) {
        self.residuals.insert(key.to_string(), num(v));
    }

    fn finish(self, no_meta: bool) -> Report {
        Report {
            config: self.config,
            results: self.rows,
            residuals: self.residuals,
            verdict: if self.ok { "pass" } else { "fail" }.to_string(),
            meta: if no_meta { None } else { Some(meta_block()) },
        }
    }
}

fn meta_block() -> Value {
    let unix_ms = std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_millis() as u64)
        .unwrap_or(0);
    json!({
        "generated_unix_ms": unix_ms,
        "version": env!("CARGO_PKG_VERSION"),
        "threads": rayon::current_num_threads(),
    })
}

fn render(report: &Report, format: Format) -> Result<String> {
    match format {
        Format::Json => {
            let mut s = serde_json::to_string_pretty(report)
                .map_err(|e| Error::Config(format!("serialization failed: {e}")))?;
            s.push('\n');
            Ok(s)
        }
        Format::Csv => {
            // flatten results[] only: sorted key union as the header
            let mut keys: Vec<String> = Vec::new();
            for row in &report.results {
                if let Value::Object(map) = row {
                    for k in map.keys() {
                        if !keys.contains(k) {
                            keys.push(k.clone());
                        }
                    }
                }
            }
            keys.sort();
            let mut wtr = csv::Writer::from_writer(Vec::new());
            wtr.write_record(&keys)
                .map_err(|e| Error::Config(format!("csv: {e}")))?;
            for row in &report.results {
                let cells: Vec<String> = keys
                    .iter()
                    .map(|k| match row.get(k) {
                        None | Some(Value::Null) => String::new(),
                        Some(Value::String(s)) => s.clone(),
                        Some(Value::Bool(b)) => b.to_string(),
                        Some(Value::Number(n)) => n.to_string(),
                        Some(other) => other.to_string(),
                    })
                    .collect();
                wtr.write_record(&cells)
                    .map_err(|e| Error::Config(format!("csv: {e}")))?;
            }
            let bytes = wtr
                .into_inner()
                .map_err(|e| Error::Config(format!("csv: {e}")))?;
            String::from_utf8(bytes).map_err(|e| Error::Config(format!("csv: {e}")))
        }
    }
}

fn emit(report: &Report, common: &CommonArgs) -> Result<()> {
    let text = render(report, common.format)?;
    match &common.output {
        Some(path) => {
            std::fs::write(path, text)
                .map_err(|e| Error::Config(format!("cannot write {}: {e}", path.display())))?;
            eprintln!("wrote {}", path.display());
        }
        None => print!("{text}"),
    }
    Ok(())
}

// ===========================================================================
// Shared helpers
// ===========================================================================

fn init_threads() {
    if let Ok(raw) = std::env::var(THREADS_ENV) {
        if let Ok(k) = raw.trim().parse::<usize>() {
            if k > 0 {
                // tests may have initialized the pool already; that's fine
                let _ = rayon::ThreadPoolBuilder::new().num_threads(k).build_global();
            }
        }
    }
}

fn check_n(n: usize, max: usize) -> Result<()> {
    if n == 0 || n > max {
        return Err(Error::DimensionOutOfRange { n, max });
    }
    Ok(())
}

fn check_d(d: usize) -> Result<()> {
    if d == 0 || d > 16 {
        return Err(Error::InvalidParameter {
            name: "d",
            value: d as f64,
            reason: "range dimension must lie in 1..=16",
        });
    }
    Ok(())
}

fn check_trials(trials: u64) -> Result<()> {
    if trials == 0 || trials > 1_000_000 {
        return Err(Error::InvalidParameter {
            name: "trials",
            value: trials as f64,
            reason: "trial count must lie in 1..=1000000",
        });
    }
    Ok(())
}

/// Resolves --q/--t into a q, validating the open or half-open interval.
fn resolve_q(q: Option<f64>, t: Option<f64>, allow_one: bool) -> Result<Option<f64>> {
    let q = match (q, t) {
        (Some(q), _) => Some(q),
        (None, Some(t)) => {
            if !(t.is_finite() && t >= 0.0) {
                return Err(Error::InvalidParameter {
                    name: "t",
                    value: t,
                    reason: "time must be finite and non-negative",
                });
            }
            Some((-t).exp())
        }
        (None, None) => None,
    };
    if let Some(q) = q {
        let hi_ok = if allow_one { q <= 1.0 } else { q < 1.0 };
        if !(q > 0.0 && hi_ok && q.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "q",
                value: q,
                reason: if allow_one {
                    "time parameter must lie in (0, 1]"
                } else {
                    "time parameter must lie in (0, 1)"
                },
            });
        }
    }
    Ok(q)
}

/// Scalar broadcast or exact-length list.
fn broadcast(vals: &[f64], n: usize, name: &'static str) -> Result<Vec<f64>> {
    if vals.len() == 1 {
        return Ok(vec![vals[0]; n]);
    }
    if vals.len() == n {
        return Ok(vals.to_vec());
    }
    Err(Error::InvalidParameter {
        name,
        value: vals.len() as f64,
        reason: "expected a scalar or one value per coordinate",
    })
}

fn bias_for_trial(
    fixed: &Option<Vec<f64>>,
    rng: &mut ChaCha8Rng,
    n: usize,
) -> Result<BiasVector> {
    match fixed {
        Some(vals) => BiasVector::new(broadcast(vals, n, "alpha")?),
        None => random_bias(rng, n, 0.05, 0.95),
    }
}

fn function_for_trial(
    rng: &mut ChaCha8Rng,
    n: usize,
    d: usize,
    sparse: Option<usize>,
) -> Result<CubeFunction> {
    match sparse {
        Some(k) => random_sparse_function(rng, n, d, k),
        None => random_function(rng, n, d),
    }
}

fn norm_for(p: f64, d: usize) -> Result<NormSpec> {
    NormSpec::lp(p, d)
}

// ===========================================================================
// Subcommands
// ===========================================================================

fn run_verify_identity(a: &IdentityArgs) -> Result<Report> {
    check_n(a.n, 12)?;
    check_d(a.d)?;
    check_trials(a.trials)?;
    if !(a.tol > 0.0 && a.tol.is_finite()) {
        return Err(Error::InvalidParameter {
            name: "tol",
            value: a.tol,
            reason: "tolerance must be positive and finite",
        });
    }
    let fixed_q = resolve_q(a.q, a.t, false)?;
    let theta_echo = match &a.theta {
        ThetaSpec::Star => json!("star"),
        ThetaSpec::List(v) => json!(v),
    };
    let config = json!({
        "subcommand": "verify-identity",
        "n": a.n, "d": a.d, "trials": a.trials, "tol": a.tol,
        "alpha": a.alpha, "q": fixed_q, "theta": theta_echo,
        "fourier_sparse": a.fourier_sparse, "seed": a.common.seed,
        "format": format_name(a.common.format),
    });
    let mut rb = ReportBuilder::new(config);
    let mut max_residual = 0.0f64;
    let mut max_scaled = 0.0f64;
    for trial in 0..a.trials {
        let mut rng = stream_rng(a.common.seed, trial);
        let bias = bias_for_trial(&a.alpha, &mut rng, a.n)?;
        let q = match fixed_q {
            Some(q) => q,
            None => rng.random_range(0.05..0.95),
        };
        let thetas = match &a.theta {
            ThetaSpec::Star => theta_star_vector(&bias, q)?,
            ThetaSpec::List(v) => broadcast(v, a.n, "theta")?,
        };
        let f = function_for_trial(&mut rng, a.n, a.d, a.fourier_sparse)?;
        match verify_identity(&f, &bias, q, &thetas) {
            Ok(rep) => {
                let pass = rep.max_residual <= a.tol * rep.scale;
                max_residual = max_residual.max(rep.max_residual);
                max_scaled = max_scaled.max(rep.max_residual / rep.scale);
                rb.push(
                    json!({
                        "trial": trial, "q": num(q),
                        "alpha": nums(bias.alphas()),
                        "theta": nums(&thetas),
                        "residual": num(rep.max_residual),
                        "scale": num(rep.scale),
                        "pass": pass,
                    }),
                    pass,
                );
            }
            Err(e) => rb.push_error(trial, &e),
        }
    }
    rb.residual("max_residual", max_residual);
    rb.residual("max_scaled_residual", max_scaled);
    Ok(rb.finish(a.common.no_meta))
}

fn run_semigroup(a: &SemigroupArgs) -> Result<Report> {
    check_n(a.n, 8)?;
    check_d(a.d)?;
    check_trials(a.trials)?;
    let fixed_q = resolve_q(a.q, a.t, false)?;
    let fixed_q2 = resolve_q(a.q2, None, false)?;
    let config = json!({
        "subcommand": "semigroup",
        "n": a.n, "d": a.d, "trials": a.trials, "tol": a.tol,
        "alpha": a.alpha, "q": fixed_q, "q2": fixed_q2,
        "fourier_sparse": a.fourier_sparse, "seed": a.common.seed,
        "format": format_name(a.common.format),
    });
    let mut rb = ReportBuilder::new(config);
    let (mut worst_c, mut worst_s, mut worst_b) = (0.0f64, 0.0f64, 0.0f64);
    for trial in 0..a.trials {
        let mut rng = stream_rng(a.common.seed, trial);
        let bias = bias_for_trial(&a.alpha, &mut rng, a.n)?;
        let q1 = fixed_q.unwrap_or_else(|| rng.random_range(0.05..0.95));
        let q2 = fixed_q2.unwrap_or_else(|| rng.random_range(0.05..0.95));
        let f = function_for_trial(&mut rng, a.n, a.d, a.fourier_sparse)?;

        // composition
        let two_step = semigroup_apply(&semigroup_apply(&f, &bias, q2)?, &bias, q1)?;
        let one_step = semigroup_apply(&f, &bias, q1 * q2)?;
        let comp = two_step
            .values()
            .iter()
            .zip(one_step.values())
            .fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));

        // stationarity
        let mu = ProductMeasure::new(bias.clone())?;
        let before = expectation(&f, &mu)?;
        let after = expectation(&semigroup_apply(&f, &bias, q1)?, &mu)?;
        let stat = before
            .iter()
            .zip(&after)
            .fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));

        // detailed balance, exhaustive over vertex pairs
        let mut bal = 0.0f64;
        let size = 1u32 << a.n;
        for xm in 0..size {
            let x = CubePoint::new(a.n, xm)?;
            let wx = mu.weight(x)?;
            for ym in xm..size {
                let y = CubePoint::new(a.n, ym)?;
                let fwd = wx * kernel_nd(&bias, q1, x, y)?;
                let rev = mu.weight(y)? * kernel_nd(&bias, q1, y, x)?;
                bal = bal.max((fwd - rev).abs());
            }
        }

        let pass = comp <= a.tol && stat <= a.tol && bal <= a.tol;
        worst_c = worst_c.max(comp);
        worst_s = worst_s.max(stat);
        worst_b = worst_b.max(bal);
        rb.push(
            json!({
                "trial": trial, "q1": num(q1), "q2": num(q2),
                "alpha": nums(bias.alphas()),
                "composition": num(comp),
                "stationarity": num(stat),
                "detailed_balance": num(bal),
                "pass": pass,
            }),
            pass,
        );
    }
    rb.residual("max_composition", worst_c);
    rb.residual("max_stationarity", worst_s);
    rb.residual("max_detailed_balance", worst_b);
    Ok(rb.finish(a.common.no_meta))
}

fn run_poincare(a: &PoincareArgs) -> Result<Report> {
    check_n(a.n, 12)?;
    check_d(a.d)?;
    check_trials(a.trials)?;
    let norm = norm_for(a.p, a.d)?;
    let config = json!({
        "subcommand": "poincare",
        "n": a.n, "d": a.d, "p": a.p, "tp": a.tp, "trials": a.trials,
        "alpha": a.alpha, "fourier_sparse": a.fourier_sparse,
        "seed": a.common.seed, "format": format_name(a.common.format),
    });
    let mut rb = ReportBuilder::new(config);
    let mut max_ratio = 0.0f64;
    for trial in 0..a.trials {
        let mut rng = stream_rng(a.common.seed, trial);
        let bias = bias_for_trial(&a.alpha, &mut rng, a.n)?;
        let f = function_for_trial(&mut rng, a.n, a.d, a.fourier_sparse)?;
        match poincare_functional(&f, &bias, a.p, &norm, a.tp) {
            Ok(rep) => {
                let pass = rep.holds == Some(true);
                if rep.ratio.is_finite() {
                    max_ratio = max_ratio.max(rep.ratio);
                }
                rb.push(
                    json!({
                        "trial": trial,
                        "alpha": nums(bias.alphas()),
                        "lhs": num(rep.lhs), "rhs": num(rep.rhs),
                        "ratio": num(rep.ratio),
                        "budget": num(rep.constant_budget.unwrap_or(f64::NAN)),
                        "holds": rep.holds,
                        "pass": pass,
                    }),
                    pass,
                );
            }
            Err(e) => rb.push_error(trial, &e),
        }
    }
    rb.residual("max_ratio", max_ratio);
    Ok(rb.finish(a.common.no_meta))
}

fn run_pisier(a: &PisierArgs) -> Result<Report> {
    check_n(a.n, 16)?;
    check_d(a.d)?;
    check_trials(a.trials)?;
    let norm = norm_for(a.p, a.d)?;
    let lhs_mode = match a.orlicz_a {
        Some(av) => PisierMode::Orlicz { a: av },
        None => PisierMode::Lp,
    };
    let sampled = a.n > 10;
    let config = json!({
        "subcommand": "pisier",
        "n": a.n, "d": a.d, "p": a.p, "alpha": a.alpha,
        "orlicz_a": a.orlicz_a, "trials": a.trials,
        "delta_samples": if sampled { Some(a.delta_samples) } else { None },
        "fourier_sparse": a.fourier_sparse,
        "seed": a.common.seed, "format": format_name(a.common.format),
    });
    let mut rb = ReportBuilder::new(config);
    let mut max_ratio_per_log = 0.0f64;
    for trial in 0..a.trials {
        let mut rng = stream_rng(a.common.seed, trial);
        let f = function_for_trial(&mut rng, a.n, a.d, a.fourier_sparse)?;
        let delta_mode = if sampled {
            DeltaMode::Sampled {
                trials: a.delta_samples,
                seed: a.common.seed.wrapping_add(trial),
            }
        } else {
            DeltaMode::Exact
        };
        match pisier_report(&f, a.alpha, a.p, &norm, lhs_mode, delta_mode) {
            Ok(rep) => {
                // informational ratios: the asserted contract is finiteness
                let pass = rep.report.lhs.is_finite()
                    && rep.report.rhs.is_finite()
                    && rep.report.ratio.is_finite()
                    && rep.ratio_per_log.is_finite();
                max_ratio_per_log = max_ratio_per_log.max(rep.ratio_per_log);
                rb.push(
                    json!({
                        "trial": trial,
                        "lhs": num(rep.report.lhs),
                        "rhs": num(rep.report.rhs),
                        "ratio": num(rep.report.ratio),
                        "ratio_per_log": num(rep.ratio_per_log),
                        "l1_term": num(rep.l1_term),
                        "pass": pass,
                    }),
                    pass,
                );
            }
            Err(e) => rb.push_error(trial, &e),
        }
    }
    rb.residual("max_ratio_per_log", max_ratio_per_log);
    Ok(rb.finish(a.common.no_meta))
}

fn run_enflo(a: &EnfloArgs) -> Result<Report> {
    check_n(a.n, 12)?;
    check_d(a.d)?;
    check_trials(a.trials)?;
    let norm = norm_for(a.p, a.d)?;
    let config = json!({
        "subcommand": "enflo",
        "n": a.n, "d": a.d, "p": a.p, "trials": a.trials,
        "fourier_sparse": a.fourier_sparse,
        "seed": a.common.seed, "format": format_name(a.common.format),
    });
    let mut rb = ReportBuilder::new(config);
    let mut max_ratio = 0.0f64;
    for trial in 0..a.trials {
        let mut rng = stream_rng(a.common.seed, trial);
        let f = function_for_trial(&mut rng, a.n, a.d, a.fourier_sparse)?;
        match enflo_functional(&f, a.p, &norm) {
            Ok(rep) => {
                // the range norm matches the exponent, so the unit-budget
                // comparison is the asserted contract here
                let pass = rep.lhs <= rep.rhs + 1e-12 * (1.0 + rep.rhs);
                if rep.ratio.is_finite() {
                    max_ratio = max_ratio.max(rep.ratio);
                }
                rb.push(
                    json!({
                        "trial": trial,
                        "lhs": num(rep.lhs), "rhs": num(rep.rhs),
                        "ratio": num(rep.ratio),
                        "pass": pass,
                    }),
                    pass,
                );
            }
            Err(e) => rb.push_error(trial, &e),
        }
    }
    rb.residual("max_ratio", max_ratio);
    Ok(rb.finish(a.common.no_meta))
}

fn run_stable_type(a: &StableTypeArgs) -> Result<Report> {
    check_n(a.n, 12)?;
    check_d(a.d)?;
    check_trials(a.trials)?;
    if !(a.p >= 1.0 && a.p < 2.0) {
        return Err(Error::InvalidParameter {
            name: "p",
            value: a.p,
            reason: "this suite needs p in [1, 2) so both functionals apply",
        });
    }
    let norm = norm_for(a.p, a.d)?;
    let metric = MetricSpec::from_norm(norm.clone());
    let config = json!({
        "subcommand": "stable-type",
        "n": a.n, "d": a.d, "p": a.p, "trials": a.trials,
        "fourier_sparse": a.fourier_sparse,
        "seed": a.common.seed, "format": format_name(a.common.format),
    });
    let mut rb = ReportBuilder::new(config);
    let mut best_s = 0.0f64;
    for trial in 0..a.trials {
        let mut rng = stream_rng(a.common.seed, trial);
        let f = function_for_trial(&mut rng, a.n, a.d, a.fourier_sparse)?;
        let stable = metric_stable_functional(&f, a.p, &metric);
        let enflo = enflo_functional(&f, a.p, &norm);
        match (stable, enflo) {
            (Ok(st), Ok(en)) => {
                // the weak norm is dominated by the strong one, so the
                // stable right side can never exceed the edge-moment sum
                let markov_ok = st.rhs <= en.rhs + 1e-12 * (1.0 + en.rhs);
                let s_lower = if st.ratio.is_finite() {
                    st.ratio.powf(1.0 / a.p)
                } else {
                    f64::INFINITY
                };
                if s_lower.is_finite() {
                    best_s = best_s.max(s_lower);
                }
                rb.push(
                    json!({
                        "trial": trial,
                        "lhs": num(st.lhs),
                        "rhs_weak": num(st.rhs),
                        "rhs_edge": num(en.rhs),
                        "s_lower_bound": num(s_lower),
                        "markov_ok": markov_ok,
                        "pass": markov_ok,
                    }),
                    markov_ok,
                );
            }
            (Err(e), _) | (_, Err(e)) => rb.push_error(trial, &e),
        }
    }
    rb.residual("max_s_lower_bound", best_s);
    Ok(rb.finish(a.common.no_meta))
}

fn run_borsuk(a: &BorsukArgs) -> Result<Report> {
    check_n(a.n, 12)?;
    check_trials(a.trials)?;
    if a.range_dim == 0 || a.range_dim >= a.n {
        return Err(Error::InvalidParameter {
            name: "range_dim",
            value: a.range_dim as f64,
            reason: "range dimension must lie in 1..n",
        });
    }
    let skeleton = a.skeleton.unwrap_or(a.range_dim);
    if skeleton < a.range_dim || skeleton >= a.n {
        return Err(Error::InvalidParameter {
            name: "skeleton",
            value: skeleton as f64,
            reason: "skeleton dimension must lie in range_dim..n",
        });
    }
    let norm = norm_for(a.p, a.d_norm())?;
    let config = json!({
        "subcommand": "borsuk",
        "n": a.n, "range_dim": a.range_dim, "skeleton": skeleton,
        "tol": a.tol, "p": a.p, "tp": a.tp, "trials": a.trials,
        "multistarts": a.multistarts, "max_newton": a.max_newton,
        "fourier_sparse": a.fourier_sparse,
        "seed": a.common.seed, "format": format_name(a.common.format),
    });
    let mut rb = ReportBuilder::new(config);
    let mut max_residual = 0.0f64;
    let mut total_faces = 0u64;
    for trial in 0..a.trials {
        let mut rng = stream_rng(a.common.seed, trial);
        let f = function_for_trial(&mut rng, a.n, a.range_dim, a.fourier_sparse)?;
        let t = walsh_transform(&f);
        let opts = SearchOpts {
            tol: a.tol,
            max_newton: a.max_newton,
            multistarts: a.multistarts,
            grid_fallback: true,
            seed: a.common.seed.wrapping_add(trial),
        };
        match find_antipodal_zero(&t, skeleton, &opts) {
            Ok(w) => {
                max_residual = max_residual.max(w.residual);
                total_faces += w.faces_examined as u64;
                match restricted_poincare_check(&f, &w, a.p, &norm, a.tp) {
                    Ok(rep) => {
                        let pass = w.residual <= a.tol && rep.holds == Some(true);
                        rb.push(
                            json!({
                                "trial": trial,
                                "z": nums(&w.z),
                                "residual": num(w.residual),
                                "faces_examined": w.faces_examined,
                                "lhs": num(rep.lhs), "rhs": num(rep.rhs),
                                "ratio": num(rep.ratio),
                                "budget": num(rep.constant_budget.unwrap_or(f64::NAN)),
                                "holds": rep.holds,
                                "note": rep.note,
                                "pass": pass,
                            }),
                            pass,
                        );
                    }
                    Err(e) => rb.push_error(trial, &e),
                }
            }
            Err(e) => rb.push_error(trial, &e),
        }
    }
    rb.residual("max_residual", max_residual);
    rb.residual("total_faces_examined", total_faces as f64);
    Ok(rb.finish(a.common.no_meta))
}

impl BorsukArgs {
    fn d_norm(&self) -> usize {
        self.range_dim
    }
}

fn run_distortion(a: &DistortionArgs) -> Result<Report> {
    check_n(a.n, 14)?;
    check_d(a.d)?;
    check_trials(a.trials)?;
    let norm = norm_for(a.p, a.d)?;
    let weights = match &a.weights {
        Some(w) => WeightVector::new(broadcast(w, a.n, "weights")?)?,
        None => WeightVector::unit(a.n)?,
    };
    let metric = CubeMetric::new(weights.clone(), 1.0)?;
    let inputs = BoundInputs {
        n: a.n,
        d: a.d,
        p: a.p,
        tp: a.tp,
        sp: a.sp,
        s: a.s,
        w: Some(weights),
        theta: a.theta,
    };
    let main = lower_bound_main(&inputs)?;
    let ivv = lower_bound_ivv(&inputs)?;
    let ole = a.sp.map(|_| lower_bound_ole(&inputs)).transpose()?;
    let weighted = a.s.map(|_| lower_bound_weighted(&inputs)).transpose()?;
    let snow = a.theta.map(|_| snowflake_bound(&inputs)).transpose()?;
    let sweep = p_sweep(&inputs, BoundKind::Main)?;
    let config = json!({
        "subcommand": "distortion",
        "sharp": a.sharp, "n": a.n, "d": a.d, "p": a.p, "tp": a.tp,
        "sp": a.sp, "s": a.s, "weights": a.weights, "theta": a.theta,
        "trials": if a.sharp { 1 } else { a.trials },
        "fourier_sparse": a.fourier_sparse,
        "seed": a.common.seed, "format": format_name(a.common.format),
    });
    let mut rb = ReportBuilder::new(config);
    let instances = if a.sharp { 1 } else { a.trials };
    for trial in 0..instances {
        let f = if a.sharp {
            sharp_example(a.n, a.d)? // divisibility errors are config errors
        } else {
            let mut rng = stream_rng(a.common.seed, trial);
            function_for_trial(&mut rng, a.n, a.d, a.fourier_sparse)?
        };
        let drep = distortion(&f, &metric, &norm)?;
        let ratio = edge_antipodal_ratio(&f, &norm)?;
        // soundness of the bound table against the measured map
        let sound = drep.distortion >= main - 1e-9;
        let mut row = json!({
            "trial": trial,
            "lip": num(drep.lip),
            "colip": num(drep.colip),
            "distortion": num(drep.distortion),
            "argmax": json!([drep.argmax.0, drep.argmax.1]),
            "argmin": json!([drep.argmin.0, drep.argmin.1]),
            "pairs_scanned": drep.pairs_scanned,
            "edge_antipodal_ratio": num(ratio),
            "lower_bound_main": num(main),
            "lower_bound_ivv": num(ivv),
            "sweep_best_p": num(sweep.best_p),
            "sweep_best_value": num(sweep.best_value),
            "sound": sound,
            "pass": sound,
        });
        let obj = row.as_object_mut().expect("row is an object");
        if let Some(v) = ole {
            obj.insert("lower_bound_ole".into(), num(v));
        }
        if let Some(v) = weighted {
            obj.insert("lower_bound_weighted".into(), num(v));
        }
        if let Some(v) = snow {
            obj.insert("snowflake_bound".into(), num(v));
        }
        rb.push(row, sound);
    }
    rb.residual("lower_bound_main", main);
    rb.residual("sweep_best_value", sweep.best_value);
    Ok(rb.finish(a.common.no_meta))
}

fn run_simulate(a: &SimulateArgs) -> Result<Report> {
    check_n(a.n, 12)?;
    check_d(a.d)?;
    check_trials(a.trials)?;
    let q = resolve_q(a.q, a.t, true)?.unwrap_or(0.5);
    if a.samples == 0 {
        return Err(Error::InvalidParameter {
            name: "samples",
            value: 0.0,
            reason: "need at least one replica",
        });
    }
    if a.x >= (1u32 << a.n) {
        return Err(Error::InvalidParameter {
            name: "x",
            value: a.x as f64,
            reason: "start vertex mask has bits beyond n",
        });
    }
    let config = json!({
        "subcommand": "simulate",
        "n": a.n, "d": a.d, "q": q, "alpha": a.alpha,
        "samples": a.samples, "blocks": a.blocks, "trials": a.trials,
        "x": a.x, "fourier_sparse": a.fourier_sparse,
        "seed": a.common.seed, "format": format_name(a.common.format),
    });
    let mut rb = ReportBuilder::new(config);
    let mut within_count = 0u64;
    let mut max_abs_diff = 0.0f64;
    for trial in 0..a.trials {
        let mut rng = stream_rng(a.common.seed, trial);
        let bias = bias_for_trial(&a.alpha, &mut rng, a.n)?;
        let f = function_for_trial(&mut rng, a.n, a.d, a.fourier_sparse)?;
        let x = CubePoint::new(a.n, a.x)?;
        let exact = semigroup_apply(&f, &bias, q)?.value(a.x).to_vec();
        // decouple the walk randomness from the instance stream
        let mc_seed = a
            .common
            .seed
            .wrapping_mul(0x9E37_79B9_7F4A_7C15)
            .wrapping_add(trial);
        match mc_semigroup(&f, &bias, q, x, a.samples, mc_seed, a.blocks) {
            Ok(est) => {
                let mut within = true;
                let mut diff_max = 0.0f64;
                for j in 0..a.d {
                    let diff = (est.mean[j] - exact[j]).abs();
                    diff_max = diff_max.max(diff);
                    if diff > 4.0 * est.stderr[j] + 1e-12 * (1.0 + exact[j].abs()) {
                        within = false;
                    }
                }
                within_count += within as u64;
                max_abs_diff = max_abs_diff.max(diff_max);
                rb.push(
                    json!({
                        "trial": trial,
                        "exact": nums(&exact),
                        "mean": nums(&est.mean),
                        "stderr": nums(&est.stderr),
                        "max_abs_diff": num(diff_max),
                        "within_4_stderr": within,
                    }),
                    true, // per-trial misses are allowed; the gate is the share
                );
            }
            Err(e) => rb.push_error(trial, &e),
        }
    }
    let share = within_count as f64 / a.trials as f64;
    let pass = share >= 0.95;
    if !pass {
        rb.ok = false;
    }
    rb.residual("share_within_4_stderr", share);
    rb.residual("max_abs_diff", max_abs_diff);
    Ok(rb.finish(a.common.no_meta))
}

fn format_name(f: Format) -> &'static str {
    match f {
        Format::Json => "json",
        Format::Csv => "csv",
    }
}

// ===========================================================================
// Entry points
// ===========================================================================

fn common_of(command: &Command) -> &CommonArgs {
    match command {
        Command::VerifyIdentity(a) => &a.common,
        Command::Semigroup(a) => &a.common,
        Command::Poincare(a) => &a.common,
        Command::Pisier(a) => &a.common,
        Command::Enflo(a) => &a.common,
        Command::StableType(a) => &a.common,
        Command::Borsuk(a) => &a.common,
        Command::Distortion(a) => &a.common,
        Command::Simulate(a) => &a.common,
    }
}

/// Runs one parsed command to a report. Errors are configuration errors;
/// contract violations are recorded inside the report instead.
pub fn execute(command: &Command) -> Result<Report> {
    match command {
        Command::VerifyIdentity(a) => run_verify_identity(a),
        Command::Semigroup(a) => run_semigroup(a),
        Command::Poincare(a) => run_poincare(a),
        Command::Pisier(a) => run_pisier(a),
        Command::Enflo(a) => run_enflo(a),
        Command::StableType(a) => run_stable_type(a),
        Command::Borsuk(a) => run_borsuk(a),
        Command::Distortion(a) => run_distortion(a),
        Command::Simulate(a) => run_simulate(a),
    }
}

/// Full CLI entry: parse `std::env::args`, run, emit, map to exit status.
pub fn main_entry() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // clap already distinguishes help/version (0) from usage errors (2)
            let _ = e.print();
            return e.exit_code();
        }
    };
    init_threads();
    let common = common_of(&cli.command).clone();
    match execute(&cli.command) {
        Ok(report) => {
            if let Err(e) = emit(&report, &common) {
                eprintln!("error: {e}");
                return EXIT_CONFIG;
            }
            if report.verdict == "pass" {
                EXIT_PASS
            } else {
                EXIT_VIOLATION
            }
        }
        Err(e) => {
            eprintln!("configuration error: {e}");
            EXIT_CONFIG
        }
    }
}

// ===========================================================================
// Tests
// ===========================================================================
