#ifndef M3FAIR_H
#define M3FAIR_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result code of every exported function.
 */
typedef enum M3fStatus {
  M3F_STATUS_OK = 0,
  M3F_STATUS_NULL_POINTER = 1,
  M3F_STATUS_INVALID_ARGUMENT = 2,
  M3F_STATUS_IO = 3,
  M3F_STATUS_PARSE = 4,
  M3F_STATUS_INVALID_DATA = 5,
  M3F_STATUS_UNDEFINED_METRIC = 6,
  M3F_STATUS_UNREACHABLE_CELL = 7,
  M3F_STATUS_FIT = 8,
  M3F_STATUS_PANIC = 9,
} M3fStatus;

/**
 * Opaque handle to a loaded dataset.
 */
typedef struct M3fDataset M3fDataset;

/**
 * Fairness and performance metrics for one attribute.
 */
typedef struct M3fFairness {
  double acc;
  double auroc;
  double auprc;
  /**
   * `INFINITY` when the privileged group has no predicted positives.
   */
  double di;
  double spd;
  double aod;
  double eod;
  bool partial_support;
} M3fFairness;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Last error message on this thread, or null. Valid until the next failing
 * call on the same thread.
 */
const char *m3f_last_error_message(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *m3f_version(void);

/**
 * Loads a CSV with a header row. `out` receives a handle to free with
 * [`m3f_dataset_free`].
 *
 * # Safety
 * String arguments must be NUL-terminated; `out` must be writable.
 */
enum M3fStatus m3f_dataset_load_csv(const char *path,
                                    const char *label_column,
                                    const char *positive_label,
                                    struct M3fDataset **out);

/**
 * # Safety
 * `dataset` must come from [`m3f_dataset_load_csv`] and not be used afterwards.
 */
void m3f_dataset_free(struct M3fDataset *dataset);

/**
 * Number of rows, or 0 for a null handle.
 *
 * # Safety
 * `dataset` must be null or a live handle.
 */
size_t m3f_dataset_n_rows(const struct M3fDataset *dataset);

/**
 * Number of feature columns, or 0 for a null handle.
 *
 * # Safety
 * `dataset` must be null or a live handle.
 */
size_t m3f_dataset_n_cols(const struct M3fDataset *dataset);

/**
 * Copies the 0/1 labels into `out`, which must hold exactly `n_rows` values.
 *
 * # Safety
 * `out` must point to `len` writable bytes.
 */
enum M3fStatus m3f_dataset_labels(const struct M3fDataset *dataset, uint8_t *out, size_t len);

/**
 * Reweights so that every partition cell has the same favorable rate.
 * `prior` may be null for unit weights. Writes `n` weights to `out`.
 *
 * # Safety
 * All non-null pointers must address `n` elements.
 */
enum M3fStatus m3f_reweight(const uint8_t *labels,
                            const uint32_t *partition,
                            const double *prior,
                            size_t n,
                            double *out);

/**
 * Multi-attribute reweighting. `membership` is attribute-major
 * (`n_attributes * n` values, 0/1), `privileged` and `level_weights` hold
 * one value per attribute. `prior` may be null.
 *
 * # Safety
 * Pointers must address the element counts described above.
 */
enum M3fStatus m3f_m3fair(const uint8_t *labels,
                          const uint8_t *membership,
                          const uint8_t *privileged,
                          const uint32_t *level_weights,
                          size_t n_attributes,
                          size_t n,
                          const double *prior,
                          double *out);

/**
 * # Safety
 * `scores` and `labels` must address `n` elements; `out` must be writable.
 */
enum M3fStatus m3f_auroc(const double *scores, const uint8_t *labels, size_t n, double *out);

/**
 * # Safety
 * `scores` and `labels` must address `n` elements; `out` must be writable.
 */
enum M3fStatus m3f_auprc(const double *scores, const uint8_t *labels, size_t n, double *out);

/**
 * All seven metrics for one binary attribute. Predictions are
 * `score >= threshold`.
 *
 * # Safety
 * Array pointers must address `n` elements; `out` must be writable.
 */
enum M3fStatus m3f_fairness(const double *scores,
                            const uint8_t *labels,
                            const uint8_t *membership,
                            uint8_t privileged,
                            size_t n,
                            double threshold,
                            struct M3fFairness *out);

/**
 * Runs an experiment described by a JSON config and returns the JSON
 * report in `out`. Relative dataset paths resolve against the working
 * directory. Free the result with [`m3f_string_free`].
 *
 * # Safety
 * `config_json` must be NUL-terminated; `out` must be writable.
 */
enum M3fStatus m3f_run_experiment_json(const char *config_json, char **out);

/**
 * # Safety
 * `s` must be null or a string returned by this library, freed once.
 */
void m3f_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* M3FAIR_H */
