#ifndef HEATRACK_H
#define HEATRACK_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

// Result code of every fallible call.
typedef enum HtrkStatus {
  HTRK_STATUS_OK = 0,
  HTRK_STATUS_NULL_POINTER = 1,
  HTRK_STATUS_INVALID_ARGUMENT = 2,
  HTRK_STATUS_CONFIG = 3,
  HTRK_STATUS_IO = 4,
  HTRK_STATUS_CHECKPOINT = 5,
  HTRK_STATUS_BUFFER_TOO_SMALL = 6,
  HTRK_STATUS_INTERNAL = 7,
} HtrkStatus;

// Pipeline configuration.
typedef struct HtrkConfig HtrkConfig;

// Network with loaded parameters.
typedef struct HtrkModel HtrkModel;

// Sequential tracker over one frame stream.
typedef struct HtrkTracker HtrkTracker;

// One tracked object in the most recent frame.
typedef struct HtrkTrack {
  uint64_t id;
  uint32_t class_index;
  double x;
  double y;
  double confidence;
} HtrkTrack;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failed call on this thread, or null if none. The
// pointer stays valid until the next failing call on this thread.
const char *htrk_last_error(void);

// Library version as a static NUL-terminated string.
const char *htrk_version(void);

// Creates a configuration with default values.
//
// # Safety
// `out` must be a valid pointer to writable storage.
enum HtrkStatus htrk_config_new(struct HtrkConfig **out);

// Parses `key = value` configuration text.
//
// # Safety
// `text` must be a NUL-terminated string and `out` writable.
enum HtrkStatus htrk_config_parse(const char *text, struct HtrkConfig **out);

// Reads a configuration file.
//
// # Safety
// `path` must be a NUL-terminated string and `out` writable.
enum HtrkStatus htrk_config_load(const char *path, struct HtrkConfig **out);

// # Safety
// `config` must come from an `htrk_config_*` constructor or be null.
void htrk_config_free(struct HtrkConfig *config);

// Loads a parameter checkpoint.
//
// # Safety
// `path` must be a NUL-terminated string and `out` writable.
enum HtrkStatus htrk_model_load(const char *path, struct HtrkModel **out);

// Creates an untrained model with the network shape of `config`,
// initialized from `seed`.
//
// # Safety
// `config` must be a live handle and `out` writable.
enum HtrkStatus htrk_model_init(const struct HtrkConfig *config,
                                uint64_t seed,
                                struct HtrkModel **out);

// Number of output classes of the model, or 0 for a null handle.
//
// # Safety
// `model` must be a live handle or null.
uintptr_t htrk_model_classes(const struct HtrkModel *model);

// # Safety
// `model` must come from an `htrk_model_*` constructor or be null.
void htrk_model_free(struct HtrkModel *model);

// Starts a tracker. The tracker keeps its own reference to the model, so
// the model handle may be freed afterwards.
//
// # Safety
// `model` and `config` must be live handles and `out` writable.
enum HtrkStatus htrk_tracker_new(const struct HtrkModel *model,
                                 const struct HtrkConfig *config,
                                 struct HtrkTracker **out);

// Processes the next 8-bit grayscale frame, row-major, `width * height`
// bytes. Dimensions must match earlier frames and be divisible by the
// network's size multiple.
//
// # Safety
// `tracker` must be a live handle and `pixels` must point to
// `width * height` readable bytes.
enum HtrkStatus htrk_tracker_push_frame(struct HtrkTracker *tracker,
                                        const uint8_t *pixels,
                                        uintptr_t width,
                                        uintptr_t height);

// Number of frames processed so far, or 0 for a null handle.
//
// # Safety
// `tracker` must be a live handle or null.
uintptr_t htrk_tracker_frame_count(const struct HtrkTracker *tracker);

// Copies the objects tracked in the most recent frame into `tracks`.
// `count` receives the number of objects. If `capacity` is too small
// nothing is copied and `BufferTooSmall` is returned; passing a null
// `tracks` with zero capacity is a valid size query.
//
// # Safety
// `tracker` must be a live handle, `count` writable, and `tracks` valid
// for `capacity` elements.
enum HtrkStatus htrk_tracker_get_tracks(const struct HtrkTracker *tracker,
                                        struct HtrkTrack *tracks,
                                        uintptr_t capacity,
                                        uintptr_t *count);

// # Safety
// `tracker` must come from [`htrk_tracker_new`] or be null.
void htrk_tracker_free(struct HtrkTracker *tracker);

// Feedback confidence of a single peak of confidence `w`.
//
// # Safety
// `out` must be writable.
enum HtrkStatus htrk_sgr_confidence(double w, double theta, double lambda, double phi, double *out);

// Minimum-cost assignment. `costs` is row-major `rows * cols`; NaN marks a
// forbidden pair. `row_to_col` receives, for each row, the assigned column
// or -1.
//
// # Safety
// `costs` must hold `rows * cols` values and `row_to_col` `rows` slots.
enum HtrkStatus htrk_solve_assignment(const double *costs,
                                      uintptr_t rows,
                                      uintptr_t cols,
                                      int64_t *row_to_col);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* HEATRACK_H */
