#ifndef HEATCUBE_H
#define HEATCUBE_H

/* Generated by cbindgen from the heatcube-ffi crate; do not edit by hand. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>
#include <stdint.h>
#include <stddef.h>
#include <stdbool.h>


// Result of every fallible call.
typedef enum HcStatus {
  // Success; out-parameters are valid.
  HC_STATUS_OK = 0,
  // A required pointer argument was null.
  HC_STATUS_NULL_POINTER = 1,
  // Arguments were rejected (dimension mismatch, out-of-range value,
  // wrong buffer length, rejected callback, ...); see `hc_last_error`.
  HC_STATUS_INVALID_ARGUMENT = 2,
  // The antipodal search ran out of faces without meeting the tolerance.
  HC_STATUS_SEARCH_EXHAUSTED = 3,
  // An internal panic was caught at the boundary.
  HC_STATUS_PANIC = 4,
} HcStatus;

// Per-coordinate probabilities of the +1 state (opaque).
typedef struct HcBias HcBias;

// A vector-valued function on the vertices of the n-cube (opaque).
typedef struct HcFunction HcFunction;

// An antipodal near-zero of a multilinear extension on a low-dimensional
// skeleton (opaque).
typedef struct HcWitness HcWitness;

// A two-sided comparison. `budget` is NaN when the comparison carries no
// fixed constant; `holds` is 1 (true), 0 (false), or -1 (no verdict).
typedef struct HcComparison {
  double lhs;
  double rhs;
  double ratio;
  double budget;
  int32_t holds;
} HcComparison;

// Distance callback: `(u, v, d, ctx) -> distance`, where `u` and `v` point
// to `d` doubles each. Must be a genuine metric; registration spot-checks
// symmetry, zero self-distance, non-negativity, and finiteness on random
// pairs and rejects offenders.
typedef double (*HcMetricFn)(const double*, const double*, size_t, void*);

// Bi-Lipschitz scan result. `distortion` is +inf when the map collapses a
// pair of distinct vertices. The `arg*` pairs name extremal vertex masks.
typedef struct HcDistortion {
  double lip;
  double colip;
  double distortion;
  uint32_t argmax_x;
  uint32_t argmax_y;
  uint32_t argmin_x;
  uint32_t argmin_y;
  uint64_t pairs_scanned;
} HcDistortion;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Description of the calling thread's most recent failure, as a
// NUL-terminated UTF-8 string. Empty if nothing failed yet. The pointer is
// owned by the library and valid until the next failing `hc_*` call on the
// same thread.
const char *hc_last_error(void);

// Library version as a static NUL-terminated string (never null).
const char *hc_version(void);

// Creates a function on the n-cube from a row-major table:
// `values[mask * d + j]` is component `j` at the vertex whose +1 set is
// `mask`. `len` must equal `2^n * d`.
//
// # Safety
// `values` must point to `len` readable doubles; `out` must be writable.
enum HcStatus hc_function_new(size_t n,
                              size_t d,
                              const double *values,
                              size_t len,
                              struct HcFunction **out);

// Creates a seeded random function with independent standard normal
// Fourier-side coefficients (the library's stock test distribution).
//
// # Safety
// `out` must be writable.
enum HcStatus hc_function_random(size_t n, size_t d, uint64_t seed, struct HcFunction **out);

// Creates the contiguous block-sum map (requires `d | n` with `n/d` odd).
//
// # Safety
// `out` must be writable.
enum HcStatus hc_function_sharp(size_t n, size_t d, struct HcFunction **out);

// Releases a function handle (null is ignored).
//
// # Safety
// `f` must be null or a pointer previously returned by an `hc_function_*`
// constructor, not freed before.
void hc_function_free(struct HcFunction *f);

// Cube dimension of the handle (0 if `f` is null).
//
// # Safety
// `f` must be null or a live function handle.
size_t hc_function_n(const struct HcFunction *f);

// Range dimension of the handle (0 if `f` is null).
//
// # Safety
// `f` must be null or a live function handle.
size_t hc_function_d(const struct HcFunction *f);

// Copies the full value table (layout as in [`hc_function_new`]) into
// `out`, whose length `len` must equal `2^n * d`.
//
// # Safety
// `f` must be null or a live handle; `out` must hold `len` writable
// doubles.
enum HcStatus hc_function_values(const struct HcFunction *f, double *out, size_t len);

// Creates a bias vector; `alphas[i]` in [0, 1] is clamped away from the
// endpoints by the library's guard band.
//
// # Safety
// `alphas` must point to `n` readable doubles; `out` must be writable.
enum HcStatus hc_bias_new(const double *alphas, size_t n, struct HcBias **out);

// Creates the unbiased (all 1/2) bias vector.
//
// # Safety
// `out` must be writable.
enum HcStatus hc_bias_uniform(size_t n, struct HcBias **out);

// Releases a bias handle (null is ignored).
//
// # Safety
// `b` must be null or a pointer previously returned by an `hc_bias_*`
// constructor, not freed before.
void hc_bias_free(struct HcBias *b);

// Applies the heat semigroup at time parameter `q = e^{-t}` in (0, 1],
// returning a new function handle.
//
// # Safety
// `f` and `bias` must be live handles; `out` must be writable.
enum HcStatus hc_semigroup_apply(const struct HcFunction *f,
                                 const struct HcBias *bias,
                                 double q,
                                 struct HcFunction **out);

// Applies the (negated derivative-sum) generator, returning a new handle.
//
// # Safety
// `f` and `bias` must be live handles; `out` must be writable.
enum HcStatus hc_generator_apply(const struct HcFunction *f,
                                 const struct HcBias *bias,
                                 struct HcFunction **out);

// Variance-minimizing centering offset for one coordinate.
//
// # Safety
// `out` must be writable.
enum HcStatus hc_theta_star(double alpha, double q, double *out);

// Checks the generator/semigroup derivative identity at time `q`.
// `thetas` may be null (the per-coordinate optimum is used) or a list of
// `thetas_len == n` offsets. Writes the worst vertex residual and the
// tolerance scale `1 + max |f|`.
//
// # Safety
// Handles must be live; `thetas` must be null or hold `thetas_len`
// readable doubles; both out-pointers must be writable.
enum HcStatus hc_verify_identity(const struct HcFunction *f,
                                 const struct HcBias *bias,
                                 double q,
                                 const double *thetas,
                                 size_t thetas_len,
                                 double *max_residual,
                                 double *scale);

// Monte Carlo estimate of the semigroup at the vertex whose +1 set is
// `x_mask`. Writes per-component means and standard errors into buffers of
// length `len == d`.
//
// # Safety
// Handles must be live; `mean` and `stderr_out` must hold `len` writable
// doubles each.
enum HcStatus hc_mc_semigroup(const struct HcFunction *f,
                              const struct HcBias *bias,
                              double q,
                              uint32_t x_mask,
                              uint64_t samples,
                              uint64_t seed,
                              size_t blocks,
                              double *mean,
                              double *stderr_out,
                              size_t len);

// Antipodal Poincare comparison against the `(2 pi tp)^p` budget.
//
// # Safety
// Handles must be live; `out` must be writable.
enum HcStatus hc_poincare(const struct HcFunction *f,
                          const struct HcBias *bias,
                          double p,
                          double tp,
                          struct HcComparison *out);

// Antipodal-vs-edge moment comparison (no fixed budget; `holds` is -1).
//
// # Safety
// `f` must be a live handle; `out` must be writable.
enum HcStatus hc_enflo(const struct HcFunction *f, double p, struct HcComparison *out);

// Weak-norm stable-type comparison with the `l_p` metric on values;
// `ratio^{1/p}` lower-bounds the stable-type constant. `p` in (0, 2).
//
// # Safety
// `f` must be a live handle; `out` must be writable.
enum HcStatus hc_stable_type(const struct HcFunction *f, double p, struct HcComparison *out);

// Weak-norm stable-type comparison under a caller-supplied metric.
//
// # Safety
// `f` must be a live handle; `dist` must be callable with `ctx` for the
// duration of this call and behave as documented for [`HcMetricFn`];
// `out` must be writable.
enum HcStatus hc_stable_type_callback(const struct HcFunction *f,
                                      double p,
                                      HcMetricFn dist,
                                      void *ctx,
                                      struct HcComparison *out);

// Searches the `skeleton`-dimensional faces of the solid cube for a point
// where the multilinear extension agrees with its antipode, up to `tol` in
// the max norm. Requires `f`'s range dimension to be at most `skeleton`
// and `skeleton < n`.
//
// # Safety
// `f` must be a live handle; `out` must be writable.
enum HcStatus hc_antipodal_search(const struct HcFunction *f,
                                  size_t skeleton,
                                  double tol,
                                  uint64_t seed,
                                  struct HcWitness **out);

// Releases a witness handle (null is ignored).
//
// # Safety
// `w` must be null or a pointer returned by [`hc_antipodal_search`], not
// freed before.
void hc_witness_free(struct HcWitness *w);

// Max-norm antipodal residual at the witness (NaN if `w` is null).
//
// # Safety
// `w` must be null or a live witness handle.
double hc_witness_residual(const struct HcWitness *w);

// Number of faces the search visited (0 if `w` is null).
//
// # Safety
// `w` must be null or a live witness handle.
size_t hc_witness_faces_examined(const struct HcWitness *w);

// Copies the witness point (one coordinate per cube axis, `len == n`).
//
// # Safety
// `w` must be a live witness handle; `z` must hold `len` writable doubles.
enum HcStatus hc_witness_point(const struct HcWitness *w, double *z, size_t len);

// Antipodal Poincare comparison restricted to the sub-cube the witness
// pins, against the `2^{2p-1} (pi tp)^p` budget.
//
// # Safety
// `f` and `w` must be live handles; `out` must be writable.
enum HcStatus hc_restricted_poincare(const struct HcFunction *f,
                                     const struct HcWitness *w,
                                     double p,
                                     double tp,
                                     struct HcComparison *out);

// Exact bi-Lipschitz scan of `f` from the (optionally weighted, optionally
// snowflaked) Hamming cube into `l_p^d`. `weights` may be null for unit
// weights, else `weights_len == n`; `theta` in (0, 1] snowflakes the cube
// metric.
//
// # Safety
// `f` must be a live handle; `weights` must be null or hold `weights_len`
// readable doubles; `out` must be writable.
enum HcStatus hc_distortion(const struct HcFunction *f,
                            const double *weights,
                            size_t weights_len,
                            double theta,
                            double p,
                            struct HcDistortion *out);

// `n * (largest edge displacement) / (smallest antipodal displacement)` in
// `l_p^d`; +inf when some antipodal pair collapses.
//
// # Safety
// `f` must be a live handle; `out` must be writable.
enum HcStatus hc_edge_antipodal_ratio(const struct HcFunction *f, double p, double *out);

// Baseline distortion lower bound `n / (2 pi tp min(n, d)^{1/p})`, clamped
// to at least 1, for embeddings of the n-cube into any `tp`-type-p target
// of dimension `d`.
//
// # Safety
// `out` must be writable.
enum HcStatus hc_lower_bound_main(size_t n, size_t d, double p, double tp, double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* HEATCUBE_H */
