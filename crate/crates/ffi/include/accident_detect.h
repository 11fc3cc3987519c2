#ifndef ACCIDENT_DETECT_H
#define ACCIDENT_DETECT_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/*
 Number of raw feature values a window is flattened into.
 */
#define AD_FEATURE_COUNT 70

typedef enum AdStatus {
  AD_STATUS_OK = 0,
  AD_STATUS_NULL_POINTER = 1,
  AD_STATUS_INVALID_ARGUMENT = 2,
  AD_STATUS_IO = 3,
  AD_STATUS_PARSE = 4,
  AD_STATUS_SHAPE = 5,
  AD_STATUS_PANIC = 6,
} AdStatus;

/*
 Trained model loaded from a checkpoint.
 */
typedef struct AdModel AdModel;

typedef struct AdMetrics {
  double accuracy;
  double detection_rate;
  double false_alarm_rate;
} AdMetrics;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/*
 Message for the last failed call on this thread, or NULL after a
 success. Valid until the next call into this library on the same thread.
 */
const char *ad_last_error_message(void);

/*
 Load a checkpoint file. On success `*out` owns a new handle.

 # Safety
 `path` must be a NUL-terminated string; `out` must be writable.
 */
enum AdStatus ad_model_load(const char *path, struct AdModel **out);

/*
 Release a handle from [`ad_model_load`]. NULL is ignored.

 # Safety
 `model` must come from `ad_model_load` and not be freed twice.
 */
void ad_model_free(struct AdModel *model);

/*
 # Safety
 `model` must be a live handle; `out` must be writable.
 */
enum AdStatus ad_model_threshold(const struct AdModel *model, double *out);

/*
 Accident probability for one unscaled window given as
 [`AD_FEATURE_COUNT`] values: six 11-minute blocks (speed_up,
 speed_down, occ_up, occ_down, vol_up, vol_down) then weather, weekday,
 am_peak, pm_peak.

 # Safety
 `features` must point to `len` doubles; `out` must be writable.
 */
enum AdStatus ad_model_predict(const struct AdModel *model,
                               const double *features,
                               size_t len,
                               double *out);

/*
 1 if the probability reaches the model threshold, else 0.

 # Safety
 As [`ad_model_predict`].
 */
enum AdStatus ad_model_classify(const struct AdModel *model,
                                const double *features,
                                size_t len,
                                uint8_t *out);

/*
 Accuracy, detection rate and false-alarm rate (percent) from a
 confusion matrix.

 # Safety
 `out` must be writable.
 */
enum AdStatus ad_metrics(uint64_t tp,
                         uint64_t fp,
                         uint64_t fn_,
                         uint64_t tn,
                         struct AdMetrics *out);

/*
 Area under the ROC curve of `n` scores with 0/1 labels.

 # Safety
 `scores` and `labels` must point to `n` elements; `out` must be writable.
 */
enum AdStatus ad_auc(const double *scores, const uint8_t *labels, size_t n, double *out);

/*
 Library version as a static NUL-terminated string.
 */
const char *ad_version(void);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* ACCIDENT_DETECT_H */
