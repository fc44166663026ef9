#ifndef HATESPEECH_H
#define HATESPEECH_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result code of every exported function.
 */
typedef enum HsStatus {
  HS_STATUS_OK = 0,
  HS_STATUS_NULL_POINTER = 1,
  HS_STATUS_INVALID_ARGUMENT = 2,
  HS_STATUS_IO = 3,
  HS_STATUS_MODEL_FORMAT = 4,
  HS_STATUS_INTERNAL = 5,
} HsStatus;

/**
 * A loaded classifier. Only ever handled through a pointer.
 */
typedef struct HsModel HsModel;

/**
 * Output of [`hs_ensemble_combine`].
 */
typedef struct HsDecision {
  /**
   * Class ordinal: 0 neutral, 1 racism, 2 sexism.
   */
  uint32_t label;
  /**
   * 1 when a majority vote decided, 0 when the most confident member did.
   */
  uint32_t by_vote;
  /**
   * Deciding member for the confidence fallback, or -1.
   */
  int32_t decisive_member;
} HsDecision;

/**
 * Per-class and weighted scores from a 3x3 confusion matrix.
 */
typedef struct HsMetrics {
  double precision[3];
  double recall[3];
  double f_score[3];
  double weighted_precision;
  double weighted_recall;
  double weighted_f;
  double accuracy;
} HsMetrics;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failure on this thread, or null. The pointer stays
 * valid until the next failing call on the same thread.
 */
const char *hs_last_error_message(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *hs_version(void);

/**
 * Loads a model file. On success `*out` owns a handle to release with
 * [`hs_model_free`].
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out` a writable pointer.
 */
enum HsStatus hs_model_load(const char *path, struct HsModel **out);

/**
 * Releases a handle. Null is ignored.
 *
 * # Safety
 * `model` must come from [`hs_model_load`] and not be freed twice.
 */
void hs_model_free(struct HsModel *model);

/**
 * Writes the model's feature-combination code (0 O, 1 NS, 2 NR, 3 RS, 4 NRS).
 *
 * # Safety
 * `model` must be a live handle and `out` writable.
 */
enum HsStatus hs_model_combination(const struct HsModel *model, uint32_t *out);

/**
 * Classifies one tweet. `tendency` holds the author's neutral, racism and
 * sexism shares; pass null to use the training priors. `probs` receives
 * three class probabilities in ordinal order.
 *
 * # Safety
 * `model` must be a live handle, `text` NUL-terminated, `tendency` null or
 * three readable doubles, and `probs` three writable doubles.
 */
enum HsStatus hs_model_predict_text(const struct HsModel *model,
                                    const char *text,
                                    const double *tendency,
                                    double *probs);

/**
 * Combines 3 or 5 member votes. `labels[i]` is member i's class ordinal and
 * `confidences[i]` the probability it gave that class.
 *
 * # Safety
 * `labels` and `confidences` must hold `n` readable elements and `out` be writable.
 */
enum HsStatus hs_ensemble_combine(const uint32_t *labels,
                                  const double *confidences,
                                  size_t n,
                                  struct HsDecision *out);

/**
 * Scores a row-major 3x3 confusion matrix (rows are gold classes).
 *
 * # Safety
 * `counts` must hold nine readable values and `out` be writable.
 */
enum HsStatus hs_metrics_from_confusion(const uint64_t *counts, struct HsMetrics *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* HATESPEECH_H */
