#ifndef LSGRAPH_H
#define LSGRAPH_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result codes. `Validation` and `Numerical` match the CLI exit codes.
 */
typedef enum LsgStatus {
  LSG_STATUS_OK = 0,
  LSG_STATUS_VALIDATION = 1,
  LSG_STATUS_NUMERICAL = 2,
  LSG_STATUS_IO = 3,
  LSG_STATUS_NULL_POINTER = 4,
  LSG_STATUS_BUFFER_TOO_SMALL = 5,
  LSG_STATUS_PANIC = 6,
} LsgStatus;

/**
 * Arclength-parameterized support curve.
 */
typedef struct LsgCurve LsgCurve;

/**
 * Spectral embedding with its eigenvalues.
 */
typedef struct LsgEmbedding LsgEmbedding;

/**
 * Observed graph.
 */
typedef struct LsgGraph LsgGraph;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failure on this thread, or null. The pointer stays
 * valid until the next failing call on the same thread.
 */
const char *lsg_last_error(void);

/**
 * Library version as a static nul-terminated string.
 */
const char *lsg_version(void);

/**
 * Samples a Hardy-Weinberg latent structure graph with Beta(a, b) positions.
 * When `latent_out` is not null it receives the `n x 3` latent positions.
 *
 * # Safety
 * `out` must be valid for writes; `latent_out`, if not null, must hold
 * `latent_len` doubles.
 */
enum LsgStatus lsg_graph_sample_hw(double a,
                                   double b,
                                   size_t n,
                                   uint64_t seed,
                                   double *latent_out,
                                   size_t latent_len,
                                   struct LsgGraph **out);

/**
 * Binary undirected graph from `m` edges given as `2m` vertex indices.
 *
 * # Safety
 * `edges` must hold `2 * m` values; `out` must be valid for writes.
 */
enum LsgStatus lsg_graph_from_edges(size_t n, const size_t *edges, size_t m, struct LsgGraph **out);

/**
 * Reads an edge list, or a dense matrix when the path ends in `.csv`.
 *
 * # Safety
 * `path` must be a nul-terminated string; `out` must be valid for writes.
 */
enum LsgStatus lsg_graph_read(const char *path, struct LsgGraph **out);

/**
 * Vertex count, or 0 for a null handle.
 *
 * # Safety
 * `g` must be null or a live graph handle.
 */
size_t lsg_graph_n(const struct LsgGraph *g);

/**
 * Number of edges (unordered pairs for undirected graphs).
 *
 * # Safety
 * `g` must be null or a live graph handle.
 */
size_t lsg_graph_edge_count(const struct LsgGraph *g);

/**
 * # Safety
 * `g` must be null or a handle not yet freed.
 */
void lsg_graph_free(struct LsgGraph *g);

/**
 * Adjacency spectral embedding into `d` dimensions.
 *
 * # Safety
 * `g` must be a live graph handle; `out` must be valid for writes.
 */
enum LsgStatus lsg_embed(const struct LsgGraph *g, size_t d, struct LsgEmbedding **out);

/**
 * Writes the row count and dimension of an embedding.
 *
 * # Safety
 * `e` must be a live handle; `n` and `d` must be valid for writes.
 */
enum LsgStatus lsg_embedding_shape(const struct LsgEmbedding *e, size_t *n, size_t *d);

/**
 * Copies the `n x d` embedding, row-major, into `out`.
 *
 * # Safety
 * `e` must be a live handle; `out` must hold `len` doubles.
 */
enum LsgStatus lsg_embedding_positions(const struct LsgEmbedding *e, double *out, size_t len);

/**
 * Copies the `d` signed eigenvalues, largest magnitude first.
 *
 * # Safety
 * `e` must be a live handle; `out` must hold `len` doubles.
 */
enum LsgStatus lsg_embedding_eigenvalues(const struct LsgEmbedding *e, double *out, size_t len);

/**
 * # Safety
 * `e` must be null or a handle not yet freed.
 */
void lsg_embedding_free(struct LsgEmbedding *e);

/**
 * The Hardy-Weinberg curve `(t^2, 2t(1-t), (1-t)^2)`.
 *
 * # Safety
 * `out` must be valid for writes.
 */
enum LsgStatus lsg_curve_hardy_weinberg(struct LsgCurve **out);

/**
 * Quadratic Bezier curve from three control points of dimension `d`,
 * given as `3d` row-major values.
 *
 * # Safety
 * `control` must hold `3 * d` doubles; `out` must be valid for writes.
 */
enum LsgStatus lsg_curve_bezier(const double *control, size_t d, struct LsgCurve **out);

/**
 * Ambient dimension of a curve, or 0 for a null handle.
 *
 * # Safety
 * `c` must be null or a live curve handle.
 */
size_t lsg_curve_dim(const struct LsgCurve *c);

/**
 * Total arclength, or NaN for a null handle.
 *
 * # Safety
 * `c` must be null or a live curve handle.
 */
double lsg_curve_length(const struct LsgCurve *c);

/**
 * Point at arclength fraction `s` in [0, 1].
 *
 * # Safety
 * `c` must be a live handle; `out` must hold `len` doubles.
 */
enum LsgStatus lsg_curve_point(const struct LsgCurve *c, double s, double *out, size_t len);

/**
 * # Safety
 * `c` must be null or a handle not yet freed.
 */
void lsg_curve_free(struct LsgCurve *c);

/**
 * Beta maximum likelihood fit to `n` values in (0, 1).
 *
 * # Safety
 * `y` must hold `n` doubles; `a` and `b` must be valid for writes.
 */
enum LsgStatus lsg_fit_beta(const double *y, size_t n, double *a, double *b);

/**
 * M-estimate of Beta parameters from `n x d` row-major positions and a
 * support curve. With `align != 0` the positions are first rotated onto
 * the curve; otherwise they are used as given.
 *
 * # Safety
 * `x` must hold `n * d` doubles; `curve` must be live; `a`, `b` must be
 * valid for writes.
 */
enum LsgStatus lsg_m_estimate(const double *x,
                              size_t n,
                              size_t d,
                              const struct LsgCurve *curve,
                              double epsilon,
                              int32_t align,
                              double *a,
                              double *b);

/**
 * Two-sample Kolmogorov-Smirnov statistic and asymptotic p-value.
 *
 * # Safety
 * `y1`/`y2` must hold `n1`/`n2` doubles; outputs must be valid for writes.
 */
enum LsgStatus lsg_ks_test(const double *y1,
                           size_t n1,
                           const double *y2,
                           size_t n2,
                           double *statistic,
                           double *p_value);

/**
 * Two-sample test of equal underlying distributions on two graphs. `d = 0`
 * selects the embedding dimension automatically. Writes the as-is and
 * flipped KS results.
 *
 * # Safety
 * `g1`, `g2` must be live handles; outputs must be valid for writes.
 */
enum LsgStatus lsg_two_sample_test(const struct LsgGraph *g1,
                                   const struct LsgGraph *g2,
                                   size_t d,
                                   double *statistic,
                                   double *p_value,
                                   double *flipped_statistic,
                                   double *flipped_p_value);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* LSGRAPH_H */
