/* C interface for the dynamic extreme-learning-machine trainer. */

#ifndef ELM_H
#define ELM_H

/* This file is generated by cbindgen from the elm-ffi crate; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/*
 Result of every fallible call.
 */
typedef enum {
  ELM_STATUS_OK = 0,
  /*
   A pointer argument was null or a size was zero where it must not be.
   */
  ELM_STATUS_NULL_ARGUMENT = 1,
  /*
   An argument value is invalid (bad index, bad count, bad enum value).
   */
  ELM_STATUS_INVALID_ARGUMENT = 2,
  /*
   Buffer or matrix dimensions do not line up.
   */
  ELM_STATUS_SHAPE_MISMATCH = 3,
  /*
   A matrix that must be positive definite is not.
   */
  ELM_STATUS_SINGULAR = 4,
  /*
   An update became numerically degenerate.
   */
  ELM_STATUS_DEGENERATE = 5,
  /*
   The session or model lacks required state.
   */
  ELM_STATUS_INVALID_STATE = 6,
  /*
   File could not be read, written, or parsed.
   */
  ELM_STATUS_IO = 7,
  /*
   A string argument was not valid UTF-8.
   */
  ELM_STATUS_INVALID_UTF8 = 8,
  /*
   An internal invariant failed.
   */
  ELM_STATUS_INTERNAL = 9,
} ElmStatus;

/*
 Which update engine a session maintains.
 */
typedef enum {
  /*
   Dense inverse of the regularized Gram matrix.
   */
  ELM_VARIANT_GRAM_INVERSE = 0,
  /*
   Inverse-LDL factors of the Gram matrix.
   */
  ELM_VARIANT_FACTORED = 1,
} ElmVariant;

/*
 Hidden-node activation function.
 */
typedef enum {
  ELM_ACTIVATION_SIGMOID = 0,
  ELM_ACTIVATION_TANH = 1,
  ELM_ACTIVATION_GAUSSIAN = 2,
  ELM_ACTIVATION_LINEAR = 3,
} ElmActivation;

/*
 Opaque training session; create with `elm_train` or `elm_load_session`,
 release with `elm_session_free`.
 */
typedef struct ElmSession ElmSession;

/*
 Deviations of the maintained state from a direct solve, plus the current
 mean squared error.
 */
typedef struct {
  double weight_deviation;
  double gram_deviation;
  double mse;
  size_t node_count;
  size_t sample_count;
} ElmVerifyReport;

/*
 Message for the most recent failure on this thread. The pointer stays
 valid until the next failing call on the same thread.
 */
const char *elm_last_error_message(void);

/*
 Trains a fresh session. `x` is `inputs x samples` row-major, `y` is
 `outputs x samples` row-major. On success writes a handle to `out`.
 */
ElmStatus elm_train(const double *x,
                    size_t inputs,
                    size_t samples,
                    const double *y,
                    size_t outputs,
                    size_t hidden,
                    double ridge,
                    ElmVariant variant,
                    ElmActivation activation,
                    uint64_t seed,
                    bool allow_zero_ridge,
                    ElmSession **out);

/*
 Loads a saved model (with incremental state) and resumes it against the
 given training data.
 */
ElmStatus elm_load_session(const char *path,
                           const double *x,
                           size_t inputs,
                           size_t samples,
                           const double *y,
                           size_t outputs,
                           ElmSession **out);

/*
 Adds `count` freshly drawn hidden nodes (node `j` uses seed `seed + j`).
 */
ElmStatus elm_session_grow(ElmSession *session, size_t count, uint64_t seed);

/*
 Removes the hidden nodes at the given 0-based indices.
 */
ElmStatus elm_session_prune(ElmSession *session, const size_t *indices, size_t count);

/*
 Compares the maintained state against a direct solve.
 */
ElmStatus elm_session_verify(const ElmSession *session, ElmVerifyReport *out);

size_t elm_session_node_count(const ElmSession *session);

size_t elm_session_input_count(const ElmSession *session);

size_t elm_session_output_count(const ElmSession *session);

/*
 Copies the output weights (`outputs x nodes`, row-major) into `out`,
 which must hold `len >= outputs * nodes` values.
 */
ElmStatus elm_session_weights(const ElmSession *session, double *out, size_t len);

/*
 Runs the network on `samples` new inputs; writes `outputs x samples`
 row-major predictions into `out`, which must hold `len` values.
 */
ElmStatus elm_session_predict(const ElmSession *session,
                              const double *x,
                              size_t inputs,
                              size_t samples,
                              double *out,
                              size_t len);

/*
 Saves the session's model; `light` drops the incremental state.
 */
ElmStatus elm_session_save(const ElmSession *session, const char *path, bool light);

/*
 Releases a session handle. Passing null is a no-op.
 */
void elm_session_free(ElmSession *session);

#endif  /* ELM_H */
