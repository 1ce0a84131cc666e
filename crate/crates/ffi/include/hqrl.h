#ifndef HQRL_H
#define HQRL_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum HqrlOutputKind {
  HQRL_OUTPUT_KIND_DISCRETE = 0,
  HQRL_OUTPUT_KIND_CONTINUOUS_BETA = 1,
  HQRL_OUTPUT_KIND_VALUE = 2,
} HqrlOutputKind;

typedef enum HqrlStatus {
  HQRL_STATUS_OK = 0,
  HQRL_STATUS_NULL_POINTER = 1,
  HQRL_STATUS_INVALID_ARGUMENT = 2,
  HQRL_STATUS_INVALID_UTF8 = 3,
  HQRL_STATUS_CONFIG = 4,
  HQRL_STATUS_ENVIRONMENT = 5,
  HQRL_STATUS_TRAINING = 6,
  HQRL_STATUS_BUFFER_TOO_SMALL = 7,
  HQRL_STATUS_PANIC = 8,
} HqrlStatus;

typedef struct HqrlEnv HqrlEnv;

typedef struct HqrlNetwork HqrlNetwork;

typedef struct HqrlTrainer HqrlTrainer;

/**
 * Outcome of one environment step.
 */
typedef struct HqrlStep {
  double reward;
  bool terminated;
  bool truncated;
} HqrlStep;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or NULL. The pointer
 * stays valid until the next call into this library on the same thread.
 */
const char *hqrl_last_error_message(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *hqrl_version(void);

/**
 * Frees a string returned by this library. NULL is ignored.
 */
void hqrl_string_free(char *s);

/**
 * Builds a hybrid network with constant initialisers, pre-encoding when
 * `state_dim != n_qubits`, and exact execution.
 */
enum HqrlStatus hqrl_network_new(size_t n_qubits,
                                 size_t n_layers,
                                 size_t state_dim,
                                 enum HqrlOutputKind kind,
                                 size_t output_size,
                                 uint64_t seed,
                                 struct HqrlNetwork **out);

/**
 * Builds a hybrid network from its JSON configuration.
 */
enum HqrlStatus hqrl_network_from_json(const char *config_json,
                                       uint64_t seed,
                                       struct HqrlNetwork **out);

void hqrl_network_free(struct HqrlNetwork *net);

/**
 * Writes the quantum and total trainable parameter counts.
 */
enum HqrlStatus hqrl_network_param_counts(const struct HqrlNetwork *net,
                                          size_t *quantum,
                                          size_t *total);

/**
 * Width of one row of raw outputs.
 */
enum HqrlStatus hqrl_network_output_width(const struct HqrlNetwork *net, size_t *width);

/**
 * Raw outputs for `n_rows` row-major states of `state_dim` values each;
 * `out` receives `n_rows * output_width` values.
 */
enum HqrlStatus hqrl_network_forward(struct HqrlNetwork *net,
                                     const double *states,
                                     size_t n_rows,
                                     size_t state_dim,
                                     double *out,
                                     size_t out_len);

/**
 * Gradient of `sum(d_out * outputs)` over the rows with respect to every
 * trainable parameter; `grad` receives `total` values.
 */
enum HqrlStatus hqrl_network_backward(struct HqrlNetwork *net,
                                      const double *states,
                                      size_t n_rows,
                                      size_t state_dim,
                                      const double *d_out,
                                      double *grad,
                                      size_t grad_len);

/**
 * Copies the flat parameter vector.
 */
enum HqrlStatus hqrl_network_get_params(const struct HqrlNetwork *net, double *out, size_t out_len);

/**
 * Replaces the flat parameter vector.
 */
enum HqrlStatus hqrl_network_set_params(struct HqrlNetwork *net, const double *params, size_t len);

/**
 * Switches the execution mode, parsed from `exact`, `shots:N[:SEED]` or
 * `noisy:N:P:R[:SEED]`.
 */
enum HqrlStatus hqrl_network_set_backend(struct HqrlNetwork *net, const char *mode);

/**
 * Creates an environment from its id, e.g. `"CartPole-v1"`.
 */
enum HqrlStatus hqrl_env_new(const char *id, struct HqrlEnv **out);

void hqrl_env_free(struct HqrlEnv *env);

/**
 * Observation width; for discrete spaces `action_dim` is the number of
 * actions, for boxes the action vector length.
 */
enum HqrlStatus hqrl_env_dims(const struct HqrlEnv *env,
                              size_t *state_dim,
                              size_t *action_dim,
                              bool *discrete);

/**
 * Starts an episode from `seed` and writes the first observation.
 */
enum HqrlStatus hqrl_env_reset(struct HqrlEnv *env, uint64_t seed, double *obs, size_t obs_len);

enum HqrlStatus hqrl_env_step_discrete(struct HqrlEnv *env,
                                       size_t action,
                                       double *obs,
                                       size_t obs_len,
                                       struct HqrlStep *result);

enum HqrlStatus hqrl_env_step_continuous(struct HqrlEnv *env,
                                         const double *action,
                                         size_t action_len,
                                         double *obs,
                                         size_t obs_len,
                                         struct HqrlStep *result);

/**
 * Creates a trainer from experiment TOML (file contents, not a path).
 */
enum HqrlStatus hqrl_trainer_new(const char *config_toml, uint64_t seed, struct HqrlTrainer **out);

/**
 * Restores a trainer from checkpoint JSON.
 */
enum HqrlStatus hqrl_trainer_from_checkpoint(const char *json, struct HqrlTrainer **out);

void hqrl_trainer_free(struct HqrlTrainer *trainer);

/**
 * Runs one collect/update iteration and reports the curve row's mean
 * return (NaN until an episode has finished) and total environment steps.
 */
enum HqrlStatus hqrl_trainer_run_iteration(struct HqrlTrainer *trainer,
                                           double *return_mean,
                                           size_t *env_steps);

/**
 * Checkpoint JSON; release it with [`hqrl_string_free`].
 */
enum HqrlStatus hqrl_trainer_checkpoint(const struct HqrlTrainer *trainer, char **json);

/**
 * Mean return of the current policy over `episodes` episodes on the
 * training environment, seeded from `seed`, with exact execution.
 */
enum HqrlStatus hqrl_trainer_evaluate(const struct HqrlTrainer *trainer,
                                      size_t episodes,
                                      uint64_t seed,
                                      bool deterministic,
                                      double *mean);

/**
 * Builds the reference actor networks and writes how many match their
 * expected parameter counts; returns `Config` unless all do.
 */
enum HqrlStatus hqrl_verify_tables(size_t *passed, size_t *total);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* HQRL_H */
