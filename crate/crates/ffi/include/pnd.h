#ifndef PND_H
#define PND_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum PndStatus {
  PND_STATUS_OK = 0,
  // A required pointer was null.
  PND_STATUS_NULL_POINTER = 1,
  // Shapes, ranges or values were rejected.
  PND_STATUS_INVALID_INPUT = 2,
  // An iterative solver failed to converge or a value became non-finite.
  PND_STATUS_NUMERIC = 3,
  // The quantity is undefined for this input (e.g. homophily without edges).
  PND_STATUS_UNDEFINED = 4,
  PND_STATUS_PANIC = 5,
} PndStatus;

// Undirected graph together with its normalized adjacency `Ã`.
typedef struct PndGraph PndGraph;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message for the most recent failure on this thread. The pointer stays
// valid until the next failing call on the same thread.
const char *pnd_last_error(void);

// Library version as a static NUL-terminated string.
const char *pnd_version(void);

// Builds a graph from `num_edges` pairs stored as `edges[2*i], edges[2*i+1]`.
// Duplicate and reversed pairs collapse; self-loops are dropped.
//
// # Safety
// `edges` must point to `2 * num_edges` readable values and `out` must be
// a valid pointer.
enum PndStatus pnd_graph_new(size_t num_nodes,
                             const uint32_t *edges,
                             size_t num_edges,
                             struct PndGraph **out);

// Releases a graph. Null is ignored.
//
// # Safety
// `g` must come from [`pnd_graph_new`] and not be used afterwards.
void pnd_graph_free(struct PndGraph *g);

// Number of nodes, or 0 for a null handle.
//
// # Safety
// `g` must be null or a live handle.
size_t pnd_graph_num_nodes(const struct PndGraph *g);

// Number of undirected edges, or 0 for a null handle.
//
// # Safety
// `g` must be null or a live handle.
size_t pnd_graph_num_edges(const struct PndGraph *g);

// Fraction of edges joining equal labels; `labels` has one entry per node.
//
// # Safety
// `labels` must hold `num_nodes` values and `out` must be valid.
enum PndStatus pnd_graph_homophily(const struct PndGraph *g, const uint32_t *labels, double *out);

// `(γÃ + (1 − γ)I)^T P`.
//
// # Safety
// `p` and `out` must each hold `num_nodes * cols` doubles.
enum PndStatus pnd_propagate(const struct PndGraph *g,
                             const double *p,
                             size_t cols,
                             double gamma,
                             size_t iterations,
                             double *out);

// Like [`pnd_propagate`] but the rows listed in `fixed` are reset to their
// input values after every step.
//
// # Safety
// As for [`pnd_propagate`]; `fixed` must hold `num_fixed` indices.
enum PndStatus pnd_propagate_fix(const struct PndGraph *g,
                                 const double *p,
                                 size_t cols,
                                 double gamma,
                                 size_t iterations,
                                 const size_t *fixed,
                                 size_t num_fixed,
                                 double *out);

// Personalized PageRank `(1 − γ)(I − γÃ)^{-1} P` for `0 < γ < 1`.
//
// # Safety
// `p` and `out` must each hold `num_nodes * cols` doubles.
enum PndStatus pnd_ppr(const struct PndGraph *g,
                       const double *p,
                       size_t cols,
                       double gamma,
                       double *out);

// `(2I − γÃ) P`.
//
// # Safety
// `p` and `out` must each hold `num_nodes * cols` doubles.
enum PndStatus pnd_inverse_propagate(const struct PndGraph *g,
                                     const double *p,
                                     size_t cols,
                                     double gamma,
                                     double *out);

// Clamps entries below `floor` to `floor`, then rescales rows to sum to 1.
//
// # Safety
// `p` and `out` must each hold `rows * cols` doubles.
enum PndStatus pnd_normalize_rows(const double *p,
                                  size_t rows,
                                  size_t cols,
                                  double floor,
                                  double *out);

// `tr(Fᵀ(I − Ã)F)`.
//
// # Safety
// `f` must hold `num_nodes * cols` doubles and `out` must be valid.
enum PndStatus pnd_dirichlet_energy(const struct PndGraph *g,
                                    const double *f,
                                    size_t cols,
                                    double *out);

// Post-propagation scores `β` (true class) and `β'` (competing class) of
// a node whose teacher assigns `q` to its true class.
//
// # Safety
// `beta` and `beta_prime` must be valid pointers.
enum PndStatus pnd_beta_exact(double h,
                              double p,
                              size_t num_classes,
                              double gamma,
                              double epsilon,
                              double q,
                              double *beta,
                              double *beta_prime);

// Approximate lower bound on `q` above which one propagation step
// corrects the prediction.
//
// # Safety
// `out` must be a valid pointer.
enum PndStatus pnd_correction_threshold(double h,
                                        double p,
                                        size_t num_classes,
                                        double gamma,
                                        double epsilon,
                                        double *out);

// Largest teacher error rate for which correction remains possible.
//
// # Safety
// `out` must be a valid pointer.
enum PndStatus pnd_epsilon_bound(double h, size_t num_classes, double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* PND_H */
