#ifndef LLP_H
#define LLP_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result code of every fallible call.
typedef enum LlpStatus {
  LLP_STATUS_OK = 0,
  LLP_STATUS_NULL_POINTER = 1,
  LLP_STATUS_INVALID_ARGUMENT = 2,
  LLP_STATUS_INVALID_MIXING = 3,
  LLP_STATUS_SINGULAR = 4,
  LLP_STATUS_INSUFFICIENT_DATA = 5,
  LLP_STATUS_DIMENSION_MISMATCH = 6,
  LLP_STATUS_GENERATION_FAILED = 7,
  LLP_STATUS_NO_CONVERGENCE = 8,
  LLP_STATUS_PARSE = 9,
  LLP_STATUS_IO = 10,
  // The call panicked; the handle it touched should be freed.
  LLP_STATUS_PANIC = 11,
} LlpStatus;

// Online label-proportion decoder: running statistics plus the latest classifier.
typedef struct LlpDecoder LlpDecoder;

// Mixing matrix with one row of target / non-target proportions per group.
typedef struct LlpMixing LlpMixing;

// One speller trial of 68 stimuli on the default 6 × 7 grid.
typedef struct LlpTrial LlpTrial;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failed call on this thread, or null.
// The pointer stays valid until the next failing call on the thread.
const char *llp_last_error_message(void);

// Builds a mixing matrix from `groups` rows of two proportions, row-major.
enum LlpStatus llp_mixing_new(const double *rows, size_t groups, struct LlpMixing **out);

// The two-group speller matrix `[[3/8, 5/8], [2/18, 16/18]]`.
enum LlpStatus llp_mixing_speller(struct LlpMixing **out);

void llp_mixing_free(struct LlpMixing *m);

size_t llp_mixing_groups(const struct LlpMixing *m);

// Noise amplification factor.
enum LlpStatus llp_mixing_naf(const struct LlpMixing *m, double *out);

// Reconstruction coefficients; `plus` and `minus` hold `len` = groups values each.
enum LlpStatus llp_mixing_pseudoinverse(const struct LlpMixing *m,
                                        double *plus,
                                        double *minus,
                                        size_t len);

// Empty decoder for `dim` features; the mixing matrix is copied.
enum LlpStatus llp_decoder_new(size_t dim, const struct LlpMixing *mixing, struct LlpDecoder **out);

void llp_decoder_free(struct LlpDecoder *d);

// Adds one epoch of zero-based `group`.
enum LlpStatus llp_decoder_update(struct LlpDecoder *d, const double *x, size_t dim, size_t group);

// Retrains the classifier from everything seen so far.
enum LlpStatus llp_decoder_train(struct LlpDecoder *d);

// `wᵀx` with the latest classifier.
enum LlpStatus llp_decoder_score(const struct LlpDecoder *d,
                                 const double *x,
                                 size_t dim,
                                 double *out);

// Copies the weight vector into `out` (`dim` values).
enum LlpStatus llp_decoder_weights(const struct LlpDecoder *d, double *out, size_t dim);

// Epochs absorbed since creation or the last reset.
size_t llp_decoder_count(const struct LlpDecoder *d);

// Forgets all statistics and the classifier.
enum LlpStatus llp_decoder_reset(struct LlpDecoder *d);

// Generates a speller trial from `seed`.
enum LlpStatus llp_trial_generate(uint64_t seed, struct LlpTrial **out);

void llp_trial_free(struct LlpTrial *t);

// Number of stimuli.
size_t llp_trial_len(const struct LlpTrial *t);

// Highlighted cell ids and zero-based group of stimulus `index`.
// `ids` must hold `cap` values; the count written goes to `len_out`.
enum LlpStatus llp_trial_stimulus(const struct LlpTrial *t,
                                  size_t index,
                                  size_t *ids,
                                  size_t cap,
                                  size_t *len_out,
                                  size_t *group_out);

// Selected symbol for one score per stimulus.
enum LlpStatus llp_trial_select(const struct LlpTrial *t,
                                const double *scores,
                                size_t n,
                                size_t *out);

// Mann-Whitney AUC; labels are +1 (target) or -1 (non-target).
enum LlpStatus llp_auc(const double *scores, const int32_t *labels, size_t n, double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* LLP_H */
