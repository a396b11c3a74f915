#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "softaug/augment.hpp"
#include "softaug/corpus.hpp"
#include "softaug/neighbors.hpp"
#include "softaug/seq2seq.hpp"

namespace softaug {

// L = -sum_j p(c_j) log g(c_j). Throws NumericError if some g(c_j) is zero.
double soft_ce_loss(const Vector& probs, const SoftWordSet& set);
// L = -log g(target).
double hard_ce_loss(const Vector& probs, TokenId target);

// Cross-entropy against a sparse target distribution, from log-probabilities.
double cross_entropy(const Vector& log_probs, const MixedToken& target);
// d/dz of cross_entropy(log_softmax(z), target): softmax(z) - target.
Vector logit_gradient(const Vector& probs, const MixedToken& target);

// Supervision for each decoder step: the soft set at response targets when
// `soft_labels`, a one-hot label elsewhere.
std::vector<MixedToken> step_labels(const DialogueSample& sample, const AugmentationPlan& plan, bool soft_labels);

// Mean over positions of the per-position cross-entropy.
double sequence_loss(const std::vector<StepOutput>& outputs, const std::vector<MixedToken>& labels);
double sequence_loss(const std::vector<StepOutput>& outputs, const DialogueSample& sample,
                     const AugmentationPlan& plan);

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Bias-corrected Adam on one flat block; `step` is the 1-based step number.
// Throws NumericError on a non-finite gradient entry.
void adam_update(std::span<double> param, std::span<const double> grad, std::span<double> m,
                 std::span<double> v, long step, const AdamConfig& config);

struct AdamState {
  Seq2SeqParams m;
  Seq2SeqParams v;
  long step = 0;

  static AdamState zeros(const ModelDims& dims);
};

void adam_step(Seq2SeqParams& params, const Seq2SeqParams& grads, AdamState& state, const AdamConfig& config);

// Rescales grads in place to global L2 norm `max_norm` if larger; returns the
// norm before clipping.
double clip_global_norm(Seq2SeqParams& grads, double max_norm);

enum class TrainMode { kEA, kBaseline, kRep, kNoSoftLabel, kNoHistoryAug };

std::string_view to_string(TrainMode mode);
TrainMode parse_train_mode(std::string_view name);  // throws ConfigError
bool uses_augmentation(TrainMode mode);

struct TrainConfig {
  AugmentConfig augment;
  AdamConfig adam;
  int batch_size = 32;
  int epochs = 30;
  std::uint64_t seed = 1;
  TrainMode mode = TrainMode::kEA;
  double clip_norm = 5.0;

  void validate() const;
};

struct EpochLog {
  int epoch = 0;
  long step_count = 0;        // cumulative optimizer steps
  long augmented_steps = 0;   // cumulative steps scheduled with augmentation
  double train_loss = 0.0;    // token-mean over the epoch
  double valid_ppl = 0.0;     // NaN without a validation split
};

struct TrainResult {
  Seq2SeqParams params;  // from the epoch with the lowest validation PPL
  AdamState adam;        // optimizer state after the last step
  int best_epoch = 0;    // 1-based; 0 when no epoch ran
  std::vector<EpochLog> epochs;
  std::vector<bool> step_augmented;
  // FNV-1a digest over the effective plans of all augmented samples, and
  // their target totals.
  std::uint64_t plan_digest = 0;
  long history_targets = 0;
  long response_targets = 0;
};

struct TrainInputs {
  const CorpusSplit& train;
  const CorpusSplit* valid = nullptr;
  const Vocabulary& vocab;
  const NeighborModel* neighbors = nullptr;  // required unless mode is baseline
  ModelDims dims;
  const Matrix* initial_embedding = nullptr;
};

// Per-step callback (step index, augmented, batch loss); optional.
using StepObserver = std::function<void(long, bool, double)>;

TrainResult train(const TrainInputs& inputs, const TrainConfig& config, const StepObserver& observer = {});

// exp(token-mean NLL) with teacher forcing and no augmentation.
double perplexity(const Seq2SeqParams& params, const CorpusSplit& split);

void write_training_log(const std::filesystem::path& path, const std::vector<EpochLog>& epochs);

}  // namespace softaug
