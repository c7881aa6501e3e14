#ifndef RANKFORGE_H
#define RANKFORGE_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Training loss.
 */
typedef enum RfLoss {
  RF_LOSS_LOG = 0,
  RF_LOSS_FIVB = 1,
} RfLoss;

/**
 * Result code of every call.
 */
typedef enum RfStatus {
  RF_STATUS_OK = 0,
  RF_STATUS_NULL_POINTER = 1,
  RF_STATUS_INVALID_ARGUMENT = 2,
  RF_STATUS_IO = 3,
  RF_STATUS_PARSE = 4,
  RF_STATUS_NOT_CONVERGED = 5,
  RF_STATUS_NUMERICAL = 6,
  RF_STATUS_BUFFER_TOO_SMALL = 7,
  RF_STATUS_PANIC = 8,
} RfStatus;

/**
 * Match list with its team names.
 */
typedef struct RfDataset RfDataset;

/**
 * Model parameters.
 */
typedef struct RfParams RfParams;

/**
 * Online ranking state.
 */
typedef struct RfRanker RfRanker;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or NULL. Valid until the
 * next call into the library from the same thread.
 */
const char *rf_last_error_message(void);

/**
 * Frees a string returned by this library. NULL is ignored.
 *
 * # Safety
 * `s` must come from this library and not have been freed.
 */
void rf_string_free(char *s);

/**
 * The official FIVB configuration.
 *
 * # Safety
 * `out` must be a valid pointer.
 */
enum RfStatus rf_params_fivb(struct RfParams **out);

/**
 * Parameters from JSON. Fields left out keep their FIVB values.
 *
 * # Safety
 * `json` must be a NUL-terminated string and `out` a valid pointer.
 */
enum RfStatus rf_params_from_json(const char *json, struct RfParams **out);

/**
 * JSON form of the parameters; free it with [`rf_string_free`].
 *
 * # Safety
 * `p` must be a live handle and `out` a valid pointer.
 */
enum RfStatus rf_params_to_json(const struct RfParams *p, char **out);

/**
 * # Safety
 * `p` must be a live handle.
 */
enum RfStatus rf_params_set_gamma(struct RfParams *p, double gamma);

/**
 * # Safety
 * `p` must be a live handle.
 */
enum RfStatus rf_params_set_eta(struct RfParams *p, double eta);

/**
 * # Safety
 * `p` must be a live handle.
 */
enum RfStatus rf_params_set_mu(struct RfParams *p, double mu);

/**
 * Number of outcome levels `L`.
 *
 * # Safety
 * `p` must be a live handle.
 */
size_t rf_params_levels(const struct RfParams *p);

/**
 * # Safety
 * `p` must be NULL or a handle not yet freed.
 */
void rf_params_free(struct RfParams *p);

/**
 * Loads a match CSV with the FIVB category table.
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out` a valid pointer.
 */
enum RfStatus rf_dataset_load_csv(const char *path, struct RfDataset **out);

/**
 * # Safety
 * `d` must be a live handle.
 */
size_t rf_dataset_team_count(const struct RfDataset *d);

/**
 * # Safety
 * `d` must be a live handle.
 */
size_t rf_dataset_match_count(const struct RfDataset *d);

/**
 * Name of team `i`, owned by the dataset; NULL when out of range.
 *
 * # Safety
 * `d` must be a live handle.
 */
const char *rf_dataset_team_name(const struct RfDataset *d, size_t i);

/**
 * # Safety
 * `d` must be NULL or a handle not yet freed.
 */
void rf_dataset_free(struct RfDataset *d);

/**
 * Writes the `L` outcome probabilities at model argument `z`.
 *
 * # Safety
 * `p` must be a live handle; `out` must hold `len` doubles.
 */
enum RfStatus rf_outcome_probs(const struct RfParams *p, double z, double *out, size_t len);

/**
 * Matched numerical scores for the `n` interior thresholds `c`; writes
 * `n + 1` values.
 *
 * # Safety
 * `c` must hold `n` doubles; `out` must hold `len` doubles.
 */
enum RfStatus rf_matched_scores(const double *c, size_t n, double r0, double *out, size_t len);

/**
 * Batch fit. Writes one latent skill per team, in dataset order, and the
 * objective value when `objective` is not NULL.
 *
 * # Safety
 * `d` and `p` must be live handles; `skills` must hold `len` doubles.
 */
enum RfStatus rf_fit(const struct RfDataset *d,
                     const struct RfParams *p,
                     enum RfLoss loss,
                     double *skills,
                     size_t len,
                     double *objective);

/**
 * Approximate leave-one-out: average log-score `U` and `V = e^{-U}`.
 *
 * # Safety
 * `d` and `p` must be live handles; `u` and `v` NULL or valid.
 */
enum RfStatus rf_alo(const struct RfDataset *d,
                     const struct RfParams *p,
                     enum RfLoss loss,
                     double *u,
                     double *v);

/**
 * Online ranker over `teams` teams. `init` holds their display-scale skills,
 * or is NULL for all zeros.
 *
 * # Safety
 * `p` must be a live handle; `init` NULL or holding `teams` doubles.
 */
enum RfStatus rf_ranker_new(const struct RfParams *p,
                            enum RfLoss loss,
                            size_t teams,
                            const double *init,
                            struct RfRanker **out);

/**
 * Scores one match with the current skills, then updates them. `pred_loss`
 * (log-score of the prediction) and `delta_home` may be NULL.
 *
 * # Safety
 * `r` must be a live handle.
 */
enum RfStatus rf_ranker_step(struct RfRanker *r,
                             size_t home,
                             size_t away,
                             size_t outcome,
                             bool home_venue,
                             size_t category,
                             double *pred_loss,
                             double *delta_home);

/**
 * Copies the current display-scale skills.
 *
 * # Safety
 * `r` must be a live handle; `out` must hold `len` doubles.
 */
enum RfStatus rf_ranker_skills(const struct RfRanker *r, double *out, size_t len);

/**
 * # Safety
 * `r` must be NULL or a handle not yet freed.
 */
void rf_ranker_free(struct RfRanker *r);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* RANKFORGE_H */
