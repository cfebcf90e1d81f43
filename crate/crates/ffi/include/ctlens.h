#ifndef CTLENS_H
#define CTLENS_H

#include <stddef.h>
#include <stdint.h>

typedef enum CtlStatus {
  CTL_STATUS_OK = 0,
  CTL_STATUS_NULL_POINTER = 1,
  CTL_STATUS_INVALID_UTF8 = 2,
  CTL_STATUS_INVALID_ARGUMENT = 3,
  CTL_STATUS_DOMAIN = 4,
  CTL_STATUS_UNDEFINED = 5,
  CTL_STATUS_DIMENSION = 6,
  CTL_STATUS_IO = 7,
  CTL_STATUS_NOT_FOUND = 8,
  CTL_STATUS_INTEGRITY = 9,
  CTL_STATUS_PANIC = 10,
  CTL_STATUS_OTHER = 11,
} CtlStatus;

typedef enum CtlStrategy {
  CTL_STRATEGY_SIMPLE = 0,
  CTL_STRATEGY_JUSTIFICATION = 1,
  CTL_STRATEGY_STEP_BY_STEP = 2,
} CtlStrategy;

// Parsed model answer.
typedef enum CtlVerdict {
  CTL_VERDICT_NO = 0,
  CTL_VERDICT_YES = 1,
  CTL_VERDICT_UNPARSEABLE = -1,
} CtlVerdict;

// Opaque empirical CDF.
typedef struct CtlEcdf CtlEcdf;

// Opaque read-only view of a store directory.
typedef struct CtlStore CtlStore;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Copy the calling thread's last error message into `buf` (NUL-terminated)
// and return the buffer size it needs, including the NUL. Returns 0 when
// the last call succeeded. `buf` may be null to query the size.
//
// # Safety
// `buf` must be null or valid for `len` writes.
size_t ctl_last_error_message(char *buf, size_t len);

// Cohen's kappa of two verdict vectors (1 = yes, 0 = no).
//
// # Safety
// `a` and `b` must be valid for `n` reads; `out` for one write.
enum CtlStatus ctl_cohen_kappa(const uint8_t *a, const uint8_t *b, size_t n, double *out);

// Rank AUC: probability a positive outscores a negative, ties count half.
//
// # Safety
// `pos`/`neg` must be valid for `n_pos`/`n_neg` reads; `out` for one write.
enum CtlStatus ctl_rank_auc(const double *pos,
                            size_t n_pos,
                            const double *neg,
                            size_t n_neg,
                            double *out);

// Two-sided Mann-Whitney U test. `exact_cap` bounds `n_x * n_y` for the
// exact distribution; pass 0 to always use the normal approximation.
//
// # Safety
// `x`/`y` must be valid for `n_x`/`n_y` reads; `u_out` and `p_out` for one
// write each.
enum CtlStatus ctl_mann_whitney_u(const double *x,
                                  size_t n_x,
                                  const double *y,
                                  size_t n_y,
                                  size_t exact_cap,
                                  double *u_out,
                                  double *p_out);

// Prevalence interval from a predicted-positive ratio and the classifier's
// precision and recall.
//
// # Safety
// `upper` and `lower` must be valid for one write each.
enum CtlStatus ctl_prevalence_bounds(double ratio,
                                     double precision,
                                     double recall,
                                     double *upper,
                                     double *lower);

// # Safety
// `a` and `b` must be valid for `n` reads; `out` for one write.
enum CtlStatus ctl_cosine_similarity(const double *a, const double *b, size_t n, double *out);

// Zero-shot instruction for `target`. The string is owned by the caller
// and must be released with [`ctl_string_free`].
//
// # Safety
// `target` must be a NUL-terminated string; `out` valid for one write.
enum CtlStatus ctl_render_prompt(enum CtlStrategy strategy, const char *target, char **out);

// # Safety
// `raw` must be a NUL-terminated string; `out` valid for one write.
enum CtlStatus ctl_parse_verdict(const char *raw, enum CtlStrategy strategy, enum CtlVerdict *out);

// # Safety
// `s` must be null or a pointer returned by this library.
void ctl_string_free(char *s);

// # Safety
// `values` must be valid for `n` reads; `out` for one write.
enum CtlStatus ctl_ecdf_new(const double *values, size_t n, struct CtlEcdf **out);

// Share of the sample at or below `x`; NaN for a null handle.
//
// # Safety
// `h` must be null or a live handle from [`ctl_ecdf_new`].
double ctl_ecdf_eval(const struct CtlEcdf *h, double x);

// # Safety
// `h` must be null or a handle from [`ctl_ecdf_new`], not yet freed.
void ctl_ecdf_free(struct CtlEcdf *h);

// Open a store directory read-only.
//
// # Safety
// `path` must be a NUL-terminated string; `out` valid for one write.
enum CtlStatus ctl_store_open(const char *path, struct CtlStore **out);

// # Safety
// `h` must be a live store handle; `out` valid for one write.
enum CtlStatus ctl_store_document_count(const struct CtlStore *h, size_t *out);

// Label of `post_id`: 1 for CT, 0 otherwise. `NotFound` when unlabeled.
//
// # Safety
// `h` must be a live store handle, `post_id` a NUL-terminated string and
// `out` valid for one write.
enum CtlStatus ctl_store_label(const struct CtlStore *h, const char *post_id, int32_t *out);

// # Safety
// `h` must be null or a handle from [`ctl_store_open`], not yet freed.
void ctl_store_free(struct CtlStore *h);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* CTLENS_H */
