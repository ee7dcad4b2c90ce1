#ifndef BNMOE_H
#define BNMOE_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum BnmoeStatus {
  BNMOE_STATUS_OK = 0,
  BNMOE_STATUS_NULL_POINTER = 1,
  BNMOE_STATUS_INVALID_ARGUMENT = 2,
  BNMOE_STATUS_NOT_FOUND = 3,
  // Malformed or inconsistent bundle or input data.
  BNMOE_STATUS_DATA = 4,
  BNMOE_STATUS_IO = 5,
  BNMOE_STATUS_PANIC = 6,
} BnmoeStatus;

// Opaque handle to a loaded ensemble.
typedef struct BnmoeEnsemble BnmoeEnsemble;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message for the last failed call on this thread, or NULL. The pointer
// stays valid until the next failing call on the same thread.
const char *bnmoe_last_error(void);

// Library version as a static NUL-terminated string.
const char *bnmoe_version(void);

// Load a bundle from its directory or manifest path. On success `*out`
// owns a handle that must be released with [`bnmoe_ensemble_free`].
//
// # Safety
// `path` must be a NUL-terminated string; `out` must be writable.
enum BnmoeStatus bnmoe_ensemble_load(const char *path, struct BnmoeEnsemble **out);

// Release a handle. NULL is ignored.
//
// # Safety
// `ens` must come from [`bnmoe_ensemble_load`] and not be used afterwards.
void bnmoe_ensemble_free(struct BnmoeEnsemble *ens);

// Number of input features, or 0 for NULL.
//
// # Safety
// `ens` must be NULL or a live handle.
size_t bnmoe_ensemble_num_features(const struct BnmoeEnsemble *ens);

// Number of experts (gate states), or 0 for NULL.
//
// # Safety
// `ens` must be NULL or a live handle.
size_t bnmoe_ensemble_num_experts(const struct BnmoeEnsemble *ens);

// Predict one row.
//
// `x` holds `n_features` values. `missing` is NULL (all observed) or
// `n_features` flags, nonzero meaning unobserved; unobserved values are
// ignored. Outputs: `label` (0 or 1), `scores` (2 values, may be NULL) and
// `gate` (`gate_len` values, may be NULL; `gate_len` must equal the expert
// count when given).
//
// # Safety
// All non-NULL pointers must be valid for the stated lengths.
enum BnmoeStatus bnmoe_ensemble_predict(const struct BnmoeEnsemble *ens,
                                        const double *x,
                                        const uint8_t *missing,
                                        size_t n_features,
                                        uint8_t *label,
                                        double *scores,
                                        double *gate,
                                        size_t gate_len);

// Predict `n_rows` complete rows stored row-major in `rows`
// (`n_rows × n_features`), writing one label per row to `labels`.
//
// # Safety
// `rows` must hold `n_rows * n_features` values and `labels` `n_rows` bytes.
enum BnmoeStatus bnmoe_ensemble_predict_batch(const struct BnmoeEnsemble *ens,
                                              const double *rows,
                                              size_t n_rows,
                                              size_t n_features,
                                              uint8_t *labels);

// Number of labelled DAGs on `nodes` nodes (1 to 8).
//
// # Safety
// `out` must be writable.
enum BnmoeStatus bnmoe_count_dags(size_t nodes, uint64_t *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* BNMOE_H */
