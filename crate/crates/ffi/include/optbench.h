/* C interface for the optbench analysis and diagnostics routines.
 *
 * Conventions:
 *   - Functions return an OPTBENCH_* status code and write results through
 *     out-pointers.
 *   - optbench_last_error() returns a thread-local message for the most
 *     recent failure; the pointer stays valid until the next failing call
 *     on the same thread.
 *   - Results files load into an opaque OptbenchResults handle; release it
 *     with optbench_results_free(). Name pointers borrowed from a handle
 *     stay valid until the handle is freed.
 */

#ifndef OPTBENCH_H
#define OPTBENCH_H

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

#define OPTBENCH_OK 0
#define OPTBENCH_EINVAL 1    /* invalid argument or precondition */
#define OPTBENCH_EFORMAT 2   /* malformed file or payload */
#define OPTBENCH_EIO 3       /* filesystem error */
#define OPTBENCH_ESPECTRUM 4 /* spectrum too small for a tail fit */
#define OPTBENCH_ENOTFOUND 5 /* empty result cell */
#define OPTBENCH_EPANIC 6    /* internal failure */

/* Opaque handle over a loaded results file. */
typedef struct OptbenchResults OptbenchResults;

const char *optbench_last_error(void);

/* Type-7 sample quantile at fraction q in [0,1]. */
int32_t optbench_quantile(const double *values, size_t len, double q, double *out);

/* Failure detection on one result column: flags[i] = 1 when values[i] falls
 * below max - min(IQR, gamma). flags must hold len bytes. */
int32_t optbench_detect_bocb(const double *values, size_t len, double gamma,
                             uint8_t *flags, double *threshold_out);

/* Mean / population std / range after dropping the single worst result. */
int32_t optbench_stability_stats(const double *values, size_t len, double *mean_out,
                                 double *std_out, double *range_out);

/* Variation of optimal (lr, wd) pairs from their grid modes.
 * mode: 0 = one-hot Manhattan, 1 = ordinal index distance. */
int32_t optbench_hyper_variation(const double *lrs, const double *wds, size_t n,
                                 const double *lr_grid, size_t lr_grid_len,
                                 const double *wd_grid, size_t wd_grid_len,
                                 int32_t mode, double *out);

/* Histogram entropy (natural log) over bins equal-width bins. */
int32_t optbench_entropy(const double *values, size_t len, size_t bins, double *out);

/* Euclidean norm. */
int32_t optbench_l2_norm(const double *values, size_t len, double *out);

/* Eigenvalues (descending) of a symmetric n x n row-major matrix; out must
 * hold n doubles. */
int32_t optbench_sym_eigenvalues(const double *matrix, size_t n, double *out);

/* Power-law tail exponent of the Gram spectrum of a rows x cols weight
 * matrix (row-major). */
int32_t optbench_pl_alpha(const double *matrix, size_t rows, size_t cols,
                          double *alpha_out, double *xmin_out);

/* Top-k spectral energy ratio of a rows x cols weight matrix. */
int32_t optbench_pca_topk(const double *matrix, size_t rows, size_t cols, size_t k,
                          double *out);

/* Results files (JSONL produced by `optbench bench`). */
int32_t optbench_results_load(const char *path, OptbenchResults **out);
void optbench_results_free(OptbenchResults *handle);
size_t optbench_results_num_models(const OptbenchResults *handle);
size_t optbench_results_num_optimizers(const OptbenchResults *handle);
const char *optbench_results_model_name(const OptbenchResults *handle, size_t index);
const char *optbench_results_optimizer_name(const OptbenchResults *handle, size_t index);

/* Best cell for (optimizer, model): seed-mean best accuracy and the winning
 * lr/wd. Returns OPTBENCH_ENOTFOUND for an empty cell. */
int32_t optbench_results_cell(const OptbenchResults *handle, size_t optimizer_index,
                              size_t model_index, double *acc_out, double *lr_out,
                              double *wd_out);

#ifdef __cplusplus
}
#endif

#endif /* OPTBENCH_H */
