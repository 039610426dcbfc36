#ifndef SOFTHOM_H
#define SOFTHOM_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum SofthomStatus {
  SOFTHOM_STATUS_OK = 0,
  SOFTHOM_STATUS_NULL_POINTER = 1,
  SOFTHOM_STATUS_INVALID_ARGUMENT = 2,
  SOFTHOM_STATUS_INVALID_GEOMETRY = 3,
  SOFTHOM_STATUS_INVALID_TENSOR = 4,
  SOFTHOM_STATUS_ELLIPTICITY_LOST = 5,
  SOFTHOM_STATUS_NOT_CONVERGED = 6,
  SOFTHOM_STATUS_SOLVER_FAILURE = 7,
  SOFTHOM_STATUS_CONFIG = 8,
  SOFTHOM_STATUS_IO = 9,
  SOFTHOM_STATUS_BUFFER_TOO_SMALL = 10,
  SOFTHOM_STATUS_PANIC = 11,
} SofthomStatus;

// The `d²` cell correctors for one `δ`.
typedef struct SofthomCorrectors SofthomCorrectors;

// Unit-cell microstructure.
typedef struct SofthomGeometry SofthomGeometry;

// Constant homogenized tensor.
typedef struct SofthomHomogenized SofthomHomogenized;

// Periodic elasticity coefficient field.
typedef struct SofthomTensorField SofthomTensorField;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Copies the last error message of this thread into `buf` (NUL-terminated, truncated
// to `len`). Returns the full message length in bytes, excluding the terminator.
size_t softhom_last_error_message(char *buf, size_t len);

// Library version as a static NUL-terminated string.
const char *softhom_version(void);

// Disk (d = 2) or ball (d = 3) inclusion of the given radius centred in the cell.
enum SofthomStatus softhom_geometry_disk(size_t dim, double radius, struct SofthomGeometry **out);

// Cell without inclusions.
enum SofthomStatus softhom_geometry_homogeneous(size_t dim, struct SofthomGeometry **out);

void softhom_geometry_free(struct SofthomGeometry *g);

// Distance between neighbouring inclusions.
enum SofthomStatus softhom_geometry_gap(const struct SofthomGeometry *g, double *out);

// Matrix volume fraction by midpoint quadrature with `resolution` points per side.
enum SofthomStatus softhom_geometry_volume_fraction(const struct SofthomGeometry *g,
                                                    size_t resolution,
                                                    double *out);

// Weight `k_δ(x/ε)` at a point with `dim` coordinates.
enum SofthomStatus softhom_geometry_weight(const struct SofthomGeometry *g,
                                           double delta,
                                           const double *point,
                                           double eps,
                                           double *out);

// Constant isotropic tensor with Lamé parameters `lambda`, `mu`.
enum SofthomStatus softhom_tensor_isotropic(double lambda,
                                            double mu,
                                            size_t dim,
                                            struct SofthomTensorField **out);

// Isotropic tensor scaled by `1 + amplitude · Π sin(2π y_i)`.
enum SofthomStatus softhom_tensor_modulated(double lambda,
                                            double mu,
                                            size_t dim,
                                            double amplitude,
                                            struct SofthomTensorField **out);

void softhom_tensor_free(struct SofthomTensorField *t);

// Ellipticity bounds `(κ₁, κ₂)` of the field.
enum SofthomStatus softhom_tensor_bounds(const struct SofthomTensorField *t,
                                         double *kappa1,
                                         double *kappa2);

// Solves the `d²` cell problems on an `n^d` periodic grid.
enum SofthomStatus softhom_correctors_compute(const struct SofthomGeometry *g,
                                              const struct SofthomTensorField *t,
                                              double delta,
                                              size_t n,
                                              double tol,
                                              struct SofthomCorrectors **out);

void softhom_correctors_free(struct SofthomCorrectors *c);

// `max_{j,β} (‖k χ‖ + ‖k ∇χ‖)` over the correctors.
enum SofthomStatus softhom_correctors_weighted_bound(const struct SofthomCorrectors *c,
                                                     double *out);

// Homogenized tensor from a corrector set.
enum SofthomStatus softhom_homogenize(const struct SofthomCorrectors *c,
                                      struct SofthomHomogenized **out);

void softhom_homogenized_free(struct SofthomHomogenized *h);

enum SofthomStatus softhom_homogenized_dim(const struct SofthomHomogenized *h, size_t *out);

// Copies the `d⁴` entries, index `((i·d + j)·d + α)·d + β` for `â_{ij}^{αβ}`.
// Returns `BufferTooSmall` when `len < d⁴`.
enum SofthomStatus softhom_homogenized_entries(const struct SofthomHomogenized *h,
                                               double *buf,
                                               size_t len);

// Ellipticity bounds `(κ̃₁, κ̃₂)` on symmetric matrices.
enum SofthomStatus softhom_homogenized_bounds(const struct SofthomHomogenized *h,
                                              double *kappa1,
                                              double *kappa2);

// Runs one experiment (`cell`, `delta-sweep`, `rate-sweep` or `regularity`).
// `config_path` may be null for the defaults; `out_dir` may be null for `[output] dir`.
// `passed` receives 1 when every check passed, else 0.
enum SofthomStatus softhom_run_experiment(const char *name,
                                          const char *config_path,
                                          const char *out_dir,
                                          int32_t *passed);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SOFTHOM_H */
