/* C interface to the bandgraph periodic-graph spectra library. */

#ifndef BANDGRAPH_H
#define BANDGRAPH_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result code of a C-API call.
 */
typedef enum BgStatus {
  /**
   * Success.
   */
  BG_STATUS_OK = 0,
  /**
   * A required pointer argument was NULL.
   */
  BG_STATUS_NULL_POINTER = 1,
  /**
   * A string argument was not valid UTF-8.
   */
  BG_STATUS_INVALID_UTF8 = 2,
  /**
   * Invalid input: graph validation, dimensions, parameters.
   */
  BG_STATUS_INVALID_INPUT = 3,
  /**
   * A numerical routine failed to converge.
   */
  BG_STATUS_NUMERICAL_FAILURE = 4,
} BgStatus;

/**
 * Opaque handle to a computed band structure.
 */
typedef struct BgBandStructure BgBandStructure;

/**
 * Opaque handle to a fundamental graph.
 */
typedef struct BgGraph BgGraph;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Last error message of the current thread, or NULL when no error was
 * recorded. The caller owns the returned string (free with
 * [`bg_string_free`]).
 */
char *bg_last_error_message(void);

/**
 * Frees a string returned by this library. NULL is ignored.
 *
 * # Safety
 * `s` must have been returned by a bandgraph function and not freed before.
 */
void bg_string_free(char *s);

/**
 * Builds a graph from the builtin catalog (`lattice:<d>`, `line2`,
 * `hexagonal`, `hex-limit`, `line2-limit`).
 *
 * # Safety
 * `name` must be a NUL-terminated string; `out` must point to writable
 * storage for one pointer.
 */
enum BgStatus bg_graph_builtin(const char *name, double q, struct BgGraph **out);

/**
 * Parses a graph from the JSON graph format.
 *
 * # Safety
 * `json` must be a NUL-terminated string; `out` must point to writable
 * storage for one pointer.
 */
enum BgStatus bg_graph_from_json(const char *json, struct BgGraph **out);

/**
 * Serializes a graph to the JSON graph format. Returns NULL on a NULL
 * handle. Free the result with [`bg_string_free`].
 *
 * # Safety
 * `graph` must be a live handle from this library or NULL.
 */
char *bg_graph_to_json(const struct BgGraph *graph);

/**
 * Releases a graph handle. NULL is ignored.
 *
 * # Safety
 * `graph` must be a handle from this library, not freed before.
 */
void bg_graph_free(struct BgGraph *graph);

/**
 * Lattice dimension d of the graph (0 on NULL).
 *
 * # Safety
 * `graph` must be a live handle or NULL.
 */
size_t bg_graph_dimension(const struct BgGraph *graph);

/**
 * Number of vertices ν (0 on NULL).
 *
 * # Safety
 * `graph` must be a live handle or NULL.
 */
size_t bg_graph_vertex_count(const struct BgGraph *graph);

/**
 * Number of unoriented edges (0 on NULL).
 *
 * # Safety
 * `graph` must be a live handle or NULL.
 */
size_t bg_graph_edge_count(const struct BgGraph *graph);

/**
 * Adds one edge `(v1, v2)` with the given index vector; writes the new
 * graph to `out`. The input graph is unchanged.
 *
 * # Safety
 * `graph` must be a live handle; `v1`, `v2` NUL-terminated strings;
 * `index` an array of `index_len` values; `out` writable.
 */
enum BgStatus bg_graph_perturb(const struct BgGraph *graph,
                               const char *v1,
                               const char *v2,
                               const int64_t *index,
                               size_t index_len,
                               struct BgGraph **out);

/**
 * Builds the (d+1)-dimensional limit graph, reindexing the edge at
 * `added_edge` to the new axis.
 *
 * # Safety
 * `graph` must be a live handle; `out` writable.
 */
enum BgStatus bg_graph_lift_to_limit(const struct BgGraph *graph,
                                     size_t added_edge,
                                     struct BgGraph **out);

/**
 * Band functions at one quasimomentum: writes ν values (sorted ascending)
 * to `out_values`, which must hold `bg_graph_vertex_count` doubles.
 *
 * # Safety
 * `graph` must be a live handle; `k` an array of `k_len` doubles;
 * `out_values` writable storage for ν doubles.
 */
enum BgStatus bg_band_functions(const struct BgGraph *graph,
                                const double *k,
                                size_t k_len,
                                double *out_values);

/**
 * Eigenvalues of the fiber at k = 0 (the periodic spectrum): ν values.
 *
 * # Safety
 * `graph` must be a live handle; `out_values` writable storage for ν
 * doubles.
 */
enum BgStatus bg_periodic_spectrum(const struct BgGraph *graph, double *out_values);

/**
 * Computes the full band structure. `grid_points` = 0 selects the default
 * resolution for the graph dimension.
 *
 * # Safety
 * `graph` must be a live handle; `out` writable.
 */
enum BgStatus bg_spectrum(const struct BgGraph *graph,
                          size_t grid_points,
                          struct BgBandStructure **out);

/**
 * Number of bands in a band structure (0 on NULL).
 *
 * # Safety
 * `bs` must be a live handle or NULL.
 */
size_t bg_band_structure_band_count(const struct BgBandStructure *bs);

/**
 * Edges and flat flag of band `band` (1-based).
 *
 * # Safety
 * `bs` must be a live handle; the out pointers writable.
 */
enum BgStatus bg_band_structure_edges(const struct BgBandStructure *bs,
                                      size_t band,
                                      double *out_min,
                                      double *out_max,
                                      bool *out_flat);

/**
 * Number of disjoint intervals in the merged spectrum (0 on NULL).
 *
 * # Safety
 * `bs` must be a live handle or NULL.
 */
size_t bg_band_structure_interval_count(const struct BgBandStructure *bs);

/**
 * The `i`-th (0-based) interval of the merged spectrum.
 *
 * # Safety
 * `bs` must be a live handle; the out pointers writable.
 */
enum BgStatus bg_band_structure_interval(const struct BgBandStructure *bs,
                                         size_t i,
                                         double *out_lo,
                                         double *out_hi);

/**
 * Releases a band structure handle. NULL is ignored.
 *
 * # Safety
 * `bs` must be a handle from this library, not freed before.
 */
void bg_band_structure_free(struct BgBandStructure *bs);

/**
 * Max-norm deviation of the restriction identity
 * `H_{G_t}(k) = H_{G̃}(k, ⟨t, k⟩)`.
 *
 * # Safety
 * Both graphs must be live handles; `t` and `k` arrays of the given
 * lengths; `out_deviation` writable.
 */
enum BgStatus bg_restriction_check(const struct BgGraph *perturbed,
                                   const struct BgGraph *limit,
                                   const int64_t *t,
                                   size_t t_len,
                                   const double *k,
                                   size_t k_len,
                                   double *out_deviation);

/**
 * Runs the exact-isospectrality criterion for a perturbed graph against its
 * limit graph. `grid_points` = 0 selects the default resolution.
 *
 * # Safety
 * Both graphs must be live handles; `t` an array of `t_len` values;
 * `out_isospectral` writable.
 */
enum BgStatus bg_check_isospectral(const struct BgGraph *perturbed,
                                   const struct BgGraph *limit,
                                   const int64_t *t,
                                   size_t t_len,
                                   size_t grid_points,
                                   bool *out_isospectral);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* BANDGRAPH_H */
