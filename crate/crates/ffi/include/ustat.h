#ifndef USTAT_H
#define USTAT_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result code of every fallible call.
 */
typedef enum UstStatus {
  UST_STATUS_OK = 0,
  UST_STATUS_NULL_POINTER = 1,
  UST_STATUS_DOMAIN = 2,
  UST_STATUS_CONFIG = 3,
  UST_STATUS_INFEASIBLE = 4,
  UST_STATUS_IO = 5,
  UST_STATUS_PANIC = 6,
} UstStatus;

/**
 * A kernel, possibly truncated.
 */
typedef struct UstKernel UstKernel;

/**
 * A sample path.
 */
typedef struct UstPath UstPath;

/**
 * Result of a convergence experiment.
 */
typedef struct UstReport UstReport;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or NULL. The pointer is
 * valid until the next failing call on the same thread.
 */
const char *ust_last_error(void);

/**
 * Simulates `experiment.n` points of `[process]` with `experiment.seed`.
 *
 * # Safety
 * `config_toml` must be a NUL-terminated string and `out` a valid pointer.
 */
enum UstStatus ust_path_simulate(const char *config_toml, struct UstPath **out);

/**
 * Builds a path from `n` points of dimension `dim`, stored row-major.
 *
 * # Safety
 * `values` must hold `n * dim` doubles and `out` must be valid.
 */
enum UstStatus ust_path_from_values(const double *values,
                                    size_t n,
                                    size_t dim,
                                    struct UstPath **out);

/**
 * Number of points, 0 for NULL.
 *
 * # Safety
 * `path` must be NULL or a live handle.
 */
size_t ust_path_len(const struct UstPath *path);

/**
 * Point dimension, 0 for NULL.
 *
 * # Safety
 * `path` must be NULL or a live handle.
 */
size_t ust_path_dim(const struct UstPath *path);

/**
 * Latent mixture component of a simulated path, or -1.
 *
 * # Safety
 * `path` must be NULL or a live handle.
 */
int64_t ust_path_latent_component(const struct UstPath *path);

/**
 * Copies the coordinates row-major into `out`, which holds `cap` doubles.
 *
 * # Safety
 * `path` must be a live handle and `out` must hold `cap` doubles.
 */
enum UstStatus ust_path_values(const struct UstPath *path, double *out, size_t cap);

/**
 * # Safety
 * `path` must be NULL or a handle not yet freed.
 */
void ust_path_free(struct UstPath *path);

/**
 * Builds the `[kernel]` table, truncated at `experiment.truncation` when set.
 *
 * # Safety
 * `config_toml` must be a NUL-terminated string and `out` a valid pointer.
 */
enum UstStatus ust_kernel_from_config(const char *config_toml, struct UstKernel **out);

/**
 * Kernel order, 0 for NULL.
 *
 * # Safety
 * `kernel` must be NULL or a live handle.
 */
size_t ust_kernel_order(const struct UstKernel *kernel);

/**
 * # Safety
 * `kernel` must be NULL or a handle not yet freed.
 */
void ust_kernel_free(struct UstKernel *kernel);

/**
 * Exact U-statistic.
 *
 * # Safety
 * Handles must be live and `out` valid.
 */
enum UstStatus ust_u_statistic(const struct UstPath *path,
                               const struct UstKernel *kernel,
                               double *out);

/**
 * V-statistic (all `n^m` index tuples).
 *
 * # Safety
 * Handles must be live and `out` valid.
 */
enum UstStatus ust_v_statistic(const struct UstPath *path,
                               const struct UstKernel *kernel,
                               double *out);

/**
 * Incomplete U-statistic over `b` uniformly drawn increasing tuples.
 *
 * # Safety
 * Handles must be live and `out` valid.
 */
enum UstStatus ust_incomplete_u_statistic(const struct UstPath *path,
                                          const struct UstKernel *kernel,
                                          size_t b,
                                          uint64_t seed,
                                          double *out);

/**
 * Exact U-statistics of the prefixes listed in `checkpoints`; writes
 * `len` values to `out`.
 *
 * # Safety
 * Handles must be live; `checkpoints` and `out` must hold `len` elements.
 */
enum UstStatus ust_prefix_u_statistics(const struct UstPath *path,
                                       const struct UstKernel *kernel,
                                       const size_t *checkpoints,
                                       size_t len,
                                       double *out);

/**
 * Limit of the U-statistic for this path: closed form when available,
 * Monte Carlo with `experiment.mc_samples` draws otherwise.
 *
 * # Safety
 * `config_toml` must be NUL-terminated, handles live, `value` valid;
 * `std_error` may be NULL.
 */
enum UstStatus ust_estimate_limit(const char *config_toml,
                                  const struct UstPath *path,
                                  const struct UstKernel *kernel,
                                  double *value,
                                  double *std_error);

/**
 * Runs the replicated convergence experiment described by the document.
 *
 * # Safety
 * `config_toml` must be NUL-terminated and `out` valid.
 */
enum UstStatus ust_converge(const char *config_toml, struct UstReport **out);

/**
 * Number of checkpoints in the report, 0 for NULL.
 *
 * # Safety
 * `report` must be NULL or a live handle.
 */
size_t ust_report_len(const struct UstReport *report);

/**
 * Copies the `L^p` error per checkpoint into `out` (`cap` doubles).
 *
 * # Safety
 * `report` must be live and `out` must hold `cap` doubles.
 */
enum UstStatus ust_report_lp_error(const struct UstReport *report, double *out, size_t cap);

/**
 * Writes the report CSV to `file` atomically.
 *
 * # Safety
 * `report` must be live and `file` NUL-terminated.
 */
enum UstStatus ust_report_write_csv(const struct UstReport *report, const char *file);

/**
 * # Safety
 * `report` must be NULL or a handle not yet freed.
 */
void ust_report_free(struct UstReport *report);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* USTAT_H */
