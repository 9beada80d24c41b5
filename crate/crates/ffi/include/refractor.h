#ifndef REFRACTOR_H
#define REFRACTOR_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Outcome of a call.
 */
typedef enum RfStatus {
  RF_STATUS_OK = 0,
  RF_STATUS_NULL_POINTER = 1,
  RF_STATUS_INVALID_INPUT = 2,
  RF_STATUS_INVALID_CONFIG = 3,
  /**
   * A coordinate window was skipped on the finest allowed grid.
   */
  RF_STATUS_NO_FEASIBLE_STEP = 4,
  /**
   * Refinement stopped above tolerance; the report is still returned.
   */
  RF_STATUS_NOT_CONVERGED = 5,
  RF_STATUS_SWEEP_CAP_EXCEEDED = 6,
  RF_STATUS_DEGENERATE_START = 7,
  /**
   * Directions, κ and grid violate the refraction geometry.
   */
  RF_STATUS_GEOMETRY = 8,
  RF_STATUS_IO = 9,
  RF_STATUS_INTERNAL = 10,
  RF_STATUS_PANIC = 11,
} RfStatus;

/**
 * Target directions, intensities, κ and the source grid.
 */
typedef struct RfProblem RfProblem;

/**
 * Result of a solve or refinement.
 */
typedef struct RfReport RfReport;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Builds a problem from `n` directions (`3n` doubles, any nonzero length) and
 * optional intensities (`n` doubles, normalized to sum 1; null means equal).
 * The source grid is the `(2m+1)²` lattice.
 *
 * # Safety
 * Pointers must be valid for the stated lengths; `out` must be writable.
 */
enum RfStatus rf_problem_new(const double *directions,
                             const double *intensities,
                             size_t n,
                             double kappa,
                             size_t m,
                             struct RfProblem **out);

/**
 * Equal intensities on the `(n+1)²` target lattice.
 *
 * # Safety
 * `out` must be writable.
 */
enum RfStatus rf_problem_uniform_lattice(size_t n, double kappa, size_t m, struct RfProblem **out);

/**
 * Number of target directions; 0 for null.
 *
 * # Safety
 * `p` must be null or a live handle.
 */
size_t rf_problem_len(const struct RfProblem *p);

/**
 * # Safety
 * `p` must be null or a handle not yet freed.
 */
void rf_problem_free(struct RfProblem *p);

/**
 * Discrete measure of `b` (length `n`) into `out_g` (length `n`).
 *
 * # Safety
 * Pointers must be valid for `n` doubles.
 */
enum RfStatus rf_measure(const struct RfProblem *p, const double *b, size_t n, double *out_g);

/**
 * Coordinate descent to `max_i |G_i - f_i| <= epsilon` (over `i >= 2` when
 * `skip_first` is nonzero). `delta <= 0` picks the default window. The
 * source grid is doubled up to `max_m` when a window is skipped.
 *
 * # Safety
 * `p` must be a live handle; `out` must be writable.
 */
enum RfStatus rf_solve(const struct RfProblem *p,
                       double epsilon,
                       double delta,
                       int skip_first,
                       size_t max_m,
                       struct RfReport **out);

/**
 * Quasi-Newton refinement of `start` (length `n`) to `max_i |G_i - f_i| <=
 * tolerance` on the problem's grid. On [`RfStatus::NotConverged`] `*out`
 * still receives the best iterate.
 *
 * # Safety
 * `p` must be a live handle, `start` valid for `n` doubles, `out` writable.
 */
enum RfStatus rf_refine(const struct RfProblem *p,
                        const double *start,
                        size_t n,
                        double tolerance,
                        struct RfReport **out);

/**
 * Copies the coefficients into `out` (length `len`, which must equal N).
 *
 * # Safety
 * `r` must be a live handle; `out` valid for `len` doubles.
 */
enum RfStatus rf_report_coefficients(const struct RfReport *r, double *out, size_t len);

/**
 * Certified deviation; NaN for null.
 *
 * # Safety
 * `r` must be null or a live handle.
 */
double rf_report_err(const struct RfReport *r);

/**
 * 1 when the tolerance was certified, else 0.
 *
 * # Safety
 * `r` must be null or a live handle.
 */
int rf_report_converged(const struct RfReport *r);

/**
 * Component adjustments (descent) or iterations (refinement).
 *
 * # Safety
 * `r` must be null or a live handle.
 */
size_t rf_report_adjustments(const struct RfReport *r);

/**
 * Source lattice parameter the report was certified on.
 *
 * # Safety
 * `r` must be null or a live handle.
 */
size_t rf_report_source_m(const struct RfReport *r);

/**
 * # Safety
 * `r` must be null or a handle not yet freed.
 */
void rf_report_free(struct RfReport *r);

/**
 * Writes the lens surface for `b` (length `n`) as `"obj"` or `"stl"`.
 *
 * # Safety
 * `p` must be a live handle, `b` valid for `n` doubles, strings nul-terminated.
 */
enum RfStatus rf_export_mesh(const struct RfProblem *p,
                             const double *b,
                             size_t n,
                             const char *format,
                             const char *path);

/**
 * Message of the last failed call on this thread, or null. Valid until the
 * next call on the same thread.
 */
const char *rf_last_error_message(void);

/**
 * Static name of a status code; `"Unknown"` outside the enum. Takes the raw
 * integer so that out-of-range values from C are harmless.
 */
const char *rf_status_name(int code);

/**
 * Library version, static.
 */
const char *rf_version(void);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* REFRACTOR_H */
