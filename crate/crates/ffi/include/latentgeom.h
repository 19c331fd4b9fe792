/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#ifndef LATENTGEOM_H
#define LATENTGEOM_H

#include <stddef.h>
#include <stdint.h>

// Result code of every fallible call.
typedef enum LgStatus {
  LG_STATUS_OK = 0,
  LG_STATUS_NULL_POINTER = 1,
  LG_STATUS_INVALID_UTF8 = 2,
  // An array length does not match the network or frame.
  LG_STATUS_SHAPE = 3,
  LG_STATUS_NON_FINITE = 4,
  // The latent point sits on a partition boundary; perturb and retry.
  LG_STATUS_BOUNDARY = 5,
  LG_STATUS_RANK_DEFICIENT = 6,
  LG_STATUS_NUMERICAL = 7,
  LG_STATUS_INVALID_NETWORK = 8,
  LG_STATUS_INVALID_ARGUMENT = 9,
  // Iterative traversal stopped early; the completed iterates were written.
  LG_STATUS_TRAVERSAL_ABORTED = 10,
  LG_STATUS_IO = 11,
  LG_STATUS_PARSE = 12,
  LG_STATUS_PANIC = 13,
} LgStatus;

// Local Basis frame handle.
typedef struct LgFrame LgFrame;

// Mapping network handle.
typedef struct LgNetwork LgNetwork;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Library version as a static NUL-terminated string.
const char *lg_version(void);

// Message of the last failed call on this thread, or null if none. The
// pointer stays valid until the next failing call on the same thread.
const char *lg_last_error_message(void);

// Parses a network from its JSON weight format.
//
// # Safety
// `json` must be a NUL-terminated string and `out` a valid pointer.
enum LgStatus lg_network_from_json(const char *json, struct LgNetwork **out);

// Loads a network from a JSON weight file.
//
// # Safety
// `path` must be a NUL-terminated string and `out` a valid pointer.
enum LgStatus lg_network_load(const char *path, struct LgNetwork **out);

// Releases a network. Null is ignored.
//
// # Safety
// `net` must come from this library and not be used afterwards.
void lg_network_free(struct LgNetwork *net);

// Latent dimension, or 0 for a null handle.
//
// # Safety
// `net` must be null or a live handle.
size_t lg_network_in_dim(const struct LgNetwork *net);

// Output dimension, or 0 for a null handle.
//
// # Safety
// `net` must be null or a live handle.
size_t lg_network_out_dim(const struct LgNetwork *net);

// `w = f(z)`.
//
// # Safety
// Arrays must hold at least the stated number of doubles.
enum LgStatus lg_network_forward(const struct LgNetwork *net,
                                 const double *z,
                                 size_t z_len,
                                 double *w_out,
                                 size_t w_len);

// Jacobian at `z`, written row-major (`out_dim × in_dim`).
//
// # Safety
// Arrays must hold at least the stated number of doubles.
enum LgStatus lg_network_jacobian(const struct LgNetwork *net,
                                  const double *z,
                                  size_t z_len,
                                  double *jac_out,
                                  size_t jac_len);

// Local Basis at `z`.
//
// # Safety
// `z` must hold `z_len` doubles and `out` must be a valid pointer.
enum LgStatus lg_local_basis(const struct LgNetwork *net,
                             const double *z,
                             size_t z_len,
                             struct LgFrame **out);

// Releases a frame. Null is ignored.
//
// # Safety
// `frame` must come from this library and not be used afterwards.
void lg_frame_free(struct LgFrame *frame);

// Number of basis vectors (`min(in_dim, out_dim)`), or 0 for null.
//
// # Safety
// `frame` must be null or a live handle.
size_t lg_frame_len(const struct LgFrame *frame);

// Singular values, non-increasing.
//
// # Safety
// `out` must hold `len` doubles.
enum LgStatus lg_frame_singular_values(const struct LgFrame *frame, double *out, size_t len);

// Local Basis vectors in the output space, `lg_frame_len` vectors of length
// `out_dim`.
//
// # Safety
// `out` must hold `len` doubles.
enum LgStatus lg_frame_basis(const struct LgFrame *frame, double *out, size_t len);

// Matching latent directions, `lg_frame_len` vectors of length `in_dim`.
//
// # Safety
// `out` must hold `len` doubles.
enum LgStatus lg_frame_latent_directions(const struct LgFrame *frame, double *out, size_t len);

// Projection distance between the spans of two vector sets in `R^dim`.
// The sets need not be orthonormal, only linearly independent.
//
// # Safety
// `a` and `b` must hold `a_count·dim` and `b_count·dim` doubles.
enum LgStatus lg_projection_distance(const double *a,
                                     size_t a_count,
                                     const double *b,
                                     size_t b_count,
                                     size_t dim,
                                     double *out);

// Geodesic (arc-length) distance between the spans of two vector sets.
//
// # Safety
// Same as [`lg_projection_distance`].
enum LgStatus lg_geodesic_distance(const double *a,
                                   size_t a_count,
                                   const double *b,
                                   size_t b_count,
                                   size_t dim,
                                   double *out);

// Iterative traversal along the one-based direction `k`.
//
// Writes the `n_steps + 1` iterates `w_0 … w_N` into `w_out` (vector after
// vector, `out_dim` each) and, when `z_out` is non-null, the latent codes
// into `z_out`. `n_written` receives the number of iterates written, which
// is smaller than `n_steps + 1` when the call returns
// [`LgStatus::TraversalAborted`].
//
// # Safety
// `w_out` must hold `w_len` doubles, `z_out` (if non-null) `z_out_len`.
enum LgStatus lg_iterative_traverse(const struct LgNetwork *net,
                                    const double *z0,
                                    size_t z0_len,
                                    size_t k,
                                    double intensity,
                                    size_t n_steps,
                                    int32_t sign,
                                    double *w_out,
                                    size_t w_len,
                                    double *z_out,
                                    size_t z_out_len,
                                    size_t *n_written);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* LATENTGEOM_H */
