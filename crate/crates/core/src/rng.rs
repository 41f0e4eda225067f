//! Deterministic randomness plumbing.
//!
//! Every stochastic routine in the crate draws from ChaCha8 streams derived
//! from a single `u64` seed. Parallel work splits by *stream*, not by
//! re-seeding: [`stream_rng`] fixes the seed and selects a 64-bit stream
//! counter, so block `k` of a Monte Carlo run sees the same numbers whether
//! the blocks execute on one thread or sixteen.

use crate::cube::{BiasVector, CubeFunction};
use crate::fourier::FourierTable;
use crate::{Error, Result};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Seed used by CLI commands when none is given.
pub const DEFAULT_SEED: u64 = 1729;

/// Root generator for a seed (stream 0).
pub fn master_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Independent generator for (seed, stream): same seed, distinct counter.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Dense random table: every value i.i.d. uniform on [-1, 1).
pub fn random_function<R: Rng + ?Sized>(rng: &mut R, n: usize, d: usize) -> Result<CubeFunction> {
    if n > crate::cube::MAX_N {
        return Err(Error::DimensionOutOfRange {
            n,
            max: crate::cube::MAX_N,
        });
    }
    if d == 0 {
        return Err(Error::Empty("target dimension"));
    }
    let len = (1usize << n) * d;
    let values = (0..len).map(|_| rng.random_range(-1.0..1.0)).collect();
    CubeFunction::new(n, d, values)
}

/// Random function with exactly `k` active Walsh coefficient sets per output
/// component: the sets are sampled without replacement, coefficients i.i.d.
/// uniform on [-1, 1). Useful for low-complexity test inputs whose spectrum
/// is known by construction.
pub fn random_sparse_function<R: Rng + ?Sized>(
    rng: &mut R,
    n: usize,
    d: usize,
    k: usize,
) -> Result<CubeFunction> {
    if n > crate::cube::MAX_N {
        return Err(Error::DimensionOutOfRange {
            n,
            max: crate::cube::MAX_N,
        });
    }
    if d == 0 {
        return Err(Error::Empty("target dimension"));
    }
    let subsets = 1usize << n;
    if k == 0 || k > subsets {
        return Err(Error::InvalidParameter {
            name: "k",
            value: k as f64,
            reason: "need 1 <= k <= 2^n active coefficient sets",
        });
    }
    let mut coeffs = vec![0.0; subsets * d];
    for j in 0..d {
        // partial Fisher-Yates over subset indices: first k entries are a
        // uniform sample without replacement
        let mut idx: Vec<u32> = (0..subsets as u32).collect();
        for pick in 0..k {
            let swap = rng.random_range(pick..subsets);
            idx.swap(pick, swap);
            coeffs[idx[pick] as usize * d + j] = rng.random_range(-1.0..1.0);
        }
    }
    let table = FourierTable::from_coeffs(n, d, coeffs)?;
    Ok(crate::fourier::inverse_walsh(&table))
}

/// Random bias vector with every coordinate uniform on `(lo, hi)`.
pub fn random_bias<R: Rng + ?Sized>(rng: &mut R, n: usize, lo: f64, hi: f64) -> Result<BiasVector> {
    if !(0.0 < lo && lo < hi && hi < 1.0) {
        return Err(Error::InvalidParameter {
            name: "lo..hi",
            value: lo,
            reason: "need 0 < lo < hi < 1",
        });
    }
    BiasVector::new((0..n).map(|_| rng.random_range(lo..hi)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fourier::walsh_transform;

    #[test]
    fn streams_are_reproducible_and_distinct() {
        let mut a = stream_rng(99, 3);
        let mut b = stream_rng(99, 3);
        let mut c = stream_rng(99, 4);
        let xa: Vec<f64> = (0..8).map(|_| a.random()).collect();
        let xb: Vec<f64> = (0..8).map(|_| b.random()).collect();
        let xc: Vec<f64> = (0..8).map(|_| c.random()).collect();
        assert_eq!(xa, xb);
        assert_ne!(xa, xc);
    }

    #[test]
    fn random_function_shape_and_range() {
        let mut r = master_rng(5);
        let f = random_function(&mut r, 6, 3).unwrap();
        assert_eq!(f.values().len(), 64 * 3);
        assert!(f.values().iter().all(|v| (-1.0..1.0).contains(v)));
        assert!(random_function(&mut r, 31, 1).is_err());
        assert!(random_function(&mut r, 3, 0).is_err());
    }

    #[test]
    fn sparse_function_has_exactly_k_active_sets() {
        let mut r = master_rng(6);
        for k in [1usize, 4, 16] {
            let f = random_sparse_function(&mut r, 5, 2, k).unwrap();
            let spec = walsh_transform(&f);
            for j in 0..2 {
                let active = (0..32u32)
                    .filter(|&s| spec.coeff(s)[j].abs() > 1e-12)
                    .count();
                assert!(active <= k, "k={k}: {active} active");
                // sampled coefficients can be tiny but are almost surely not:
                assert!(active >= k.saturating_sub(1), "k={k}: {active} active");
            }
        }
        assert!(random_sparse_function(&mut r, 3, 1, 0).is_err());
        assert!(random_sparse_function(&mut r, 3, 1, 9).is_err());
    }

    #[test]
    fn random_bias_respects_bounds() {
        let mut r = master_rng(7);
        let b = random_bias(&mut r, 10, 0.2, 0.4).unwrap();
        for i in 0..10 {
            assert!(b.alpha(i) >= 0.2 && b.alpha(i) < 0.4);
        }
        assert!(random_bias(&mut r, 3, 0.0, 0.5).is_err());
        assert!(random_bias(&mut r, 3, 0.6, 0.5).is_err());
    }
}
