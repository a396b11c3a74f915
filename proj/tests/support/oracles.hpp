#pragma once

// Independent reference computations shared by the unit and acceptance tests.
// Nothing here calls the code path it checks, except where noted.

#include <cstdint>
#include <string>
#include <vector>

#include "softaug/augment.hpp"
#include "softaug/corpus.hpp"
#include "softaug/rng.hpp"
#include "softaug/seq2seq.hpp"

namespace softaug::testing {

// Random sample over non-reserved ids; the response ends with kEos.
DialogueSample random_sample(Rng& rng, int vocab, int max_history, int max_response);

// Random soft set rooted at `token` with up to `max_extra` distinct
// non-reserved neighbors, scores in (0.05, 1).
SoftWordSet random_soft_set(Rng& rng, TokenId token, int vocab, int max_extra);

// Plan with a soft set at (at least one) history and response position,
// chosen without looking at eligibility.
AugmentationPlan random_plan(Rng& rng, const DialogueSample& sample, int vocab, int max_extra);

// p_j = s_j / sum s, summed left to right.
std::vector<double> oracle_distribution(const SoftWordSet& set);
// sum_j p_j E[c_j] coordinate by coordinate.
Vector oracle_fuse(const SoftWordSet& set, const Matrix& embedding);
// -sum_j p_j log g(c_j) with a plain loop.
double oracle_soft_ce(const Vector& g, const SoftWordSet& set);

// Training objective of one sample: token-mean cross-entropy, soft labels at
// response targets. Used as the function under finite differences.
double objective(const Seq2SeqParams& params, const DialogueSample& sample, const AugmentationPlan& plan);
// Analytic gradient of `objective`, via backward().
Seq2SeqParams analytic_gradient(const Seq2SeqParams& params, const DialogueSample& sample,
                                const AugmentationPlan& plan);

struct BlockError {
  std::string name;
  double max_rel_error = 0.0;
  double max_abs_grad = 0.0;
};
// Central differences with step h on every entry of every block.
// Relative error of an entry: |a - n| / max(|a|, |n|, floor).
std::vector<BlockError> gradient_check(const Seq2SeqParams& params, const DialogueSample& sample,
                                       const AugmentationPlan& plan, double h = 1e-5, double floor = 1e-6);

struct Enumerated {
  TokenSeq tokens;  // without EOS
  double score = 0.0;
};
// Best EOS-terminated sequence of at most max_len steps over every token
// sequence, ties to the lexicographically smallest; scored with decode_step.
Enumerated brute_force_decode(const Seq2SeqParams& params, const TokenSeq& history, int max_len);

}  // namespace softaug::testing
