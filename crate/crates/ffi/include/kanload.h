#ifndef KANLOAD_H
#define KANLOAD_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum KanloadChannel {
  KANLOAD_CHANNEL_V = 0,
  KANLOAD_CHANNEL_F = 1,
  KANLOAD_CHANNEL_P = 2,
  KANLOAD_CHANNEL_Q = 3,
} KanloadChannel;

typedef enum KanloadStatus {
  KANLOAD_STATUS_OK = 0,
  /**
   * Null pointer, bad channel or malformed string.
   */
  KANLOAD_STATUS_INVALID_ARGUMENT = 1,
  /**
   * Unreadable or malformed file, or an input that does not fit the model.
   */
  KANLOAD_STATUS_INPUT_ERROR = 2,
  /**
   * Numerical or structural failure.
   */
  KANLOAD_STATUS_RUNTIME_ERROR = 3,
  KANLOAD_STATUS_PANIC = 4,
} KanloadStatus;

/**
 * A set of extracted equations.
 */
typedef struct KanloadEquations KanloadEquations;

/**
 * A trained model file.
 */
typedef struct KanloadModel KanloadModel;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread, or null. The pointer
 * stays valid until the next call into this library on the same thread.
 */
const char *kanload_last_error(void);

/**
 * Library version as a static string.
 */
const char *kanload_version(void);

/**
 * Loads a `model.json` written by `kanload train`.
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out` a valid pointer.
 */
enum KanloadStatus kanload_model_load(const char *path, struct KanloadModel **out);

/**
 * # Safety
 * `model` must be null or a handle from [`kanload_model_load`] that has not
 * been freed.
 */
void kanload_model_free(struct KanloadModel *model);

/**
 * Number of input channels, or 0 for a null handle.
 *
 * # Safety
 * `model` must be null or a live handle.
 */
size_t kanload_model_input_count(const struct KanloadModel *model);

/**
 * Writes the `index`-th input channel to `out`.
 *
 * # Safety
 * `model` must be a live handle and `out` a valid pointer.
 */
enum KanloadStatus kanload_model_input(const struct KanloadModel *model,
                                       size_t index,
                                       enum KanloadChannel *out);

/**
 * Predicts `target` for `n_rows` rows of physical inputs. `inputs` is
 * row-major with one column per model input, in model order; `out` receives
 * `n_rows` values.
 *
 * # Safety
 * `inputs` must hold `n_rows * kanload_model_input_count(model)` doubles and
 * `out` room for `n_rows` doubles.
 */
enum KanloadStatus kanload_model_predict(const struct KanloadModel *model,
                                         enum KanloadChannel target,
                                         const double *inputs,
                                         size_t n_rows,
                                         double *out);

/**
 * Extracts symbolic equations with the default extraction settings.
 *
 * # Safety
 * `model` must be a live handle and `out` a valid pointer.
 */
enum KanloadStatus kanload_model_extract(const struct KanloadModel *model,
                                         uint32_t decimals,
                                         bool expand,
                                         struct KanloadEquations **out);

/**
 * Loads an `equations.json` written by `kanload extract`.
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out` a valid pointer.
 */
enum KanloadStatus kanload_equations_load(const char *path, struct KanloadEquations **out);

/**
 * # Safety
 * `eq` must be null or a live handle.
 */
void kanload_equations_free(struct KanloadEquations *eq);

/**
 * All equations as `<target> = <expression>` lines. Release the result
 * with [`kanload_string_free`]; null on failure.
 *
 * # Safety
 * `eq` must be a live handle.
 */
char *kanload_equations_text(const struct KanloadEquations *eq);

/**
 * Evaluates the equation for `target` at voltage `v` and frequency `f`.
 *
 * # Safety
 * `eq` must be a live handle and `out` a valid pointer.
 */
enum KanloadStatus kanload_equations_eval(const struct KanloadEquations *eq,
                                          enum KanloadChannel target,
                                          double v,
                                          double f,
                                          double *out);

/**
 * # Safety
 * `s` must be null or a string returned by this library and not yet freed.
 */
void kanload_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* KANLOAD_H */
