#include "softaug/training.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numeric>

#include "softaug/rng.hpp"

namespace softaug {

namespace {

std::vector<std::span<double>> flat_blocks(Seq2SeqParams& p) {
  std::vector<std::span<double>> out;
  p.for_each_block([&](std::string_view, auto& b) { out.emplace_back(b.data(), static_cast<std::size_t>(b.size())); });
  return out;
}

std::vector<std::span<const double>> flat_blocks(const Seq2SeqParams& p) {
  std::vector<std::span<const double>> out;
  p.for_each_block(
      [&](std::string_view, const auto& b) { out.emplace_back(b.data(), static_cast<std::size_t>(b.size())); });
  return out;
}

}  // namespace

double soft_ce_loss(const Vector& probs, const SoftWordSet& set) {
  const auto p = set.distribution();
  double loss = 0.0;
  for (std::size_t j = 0; j < p.size(); ++j) {
    const double g = probs[set.entries[j].token];
    if (!(g > 0.0)) throw NumericError("soft_ce_loss: zero probability for a set member");
    loss -= p[j] * std::log(g);
  }
  return loss;
}

double hard_ce_loss(const Vector& probs, TokenId target) {
  const double g = probs[target];
  if (!(g > 0.0)) throw NumericError("hard_ce_loss: zero probability for the target");
  return -std::log(g);
}

double cross_entropy(const Vector& log_probs, const MixedToken& target) {
  double loss = 0.0;
  for (const auto& [id, w] : target.terms) loss -= w * log_probs[id];
  return loss;
}

Vector logit_gradient(const Vector& probs, const MixedToken& target) {
  Vector g = probs;
  for (const auto& [id, w] : target.terms) g[id] -= w;
  return g;
}

std::vector<MixedToken> step_labels(const DialogueSample& sample, const AugmentationPlan& plan, bool soft_labels) {
  std::vector<MixedToken> labels;
  labels.reserve(sample.response.size());
  for (TokenId t : sample.response) labels.push_back(MixedToken::plain(t));
  if (soft_labels) {
    for (const auto& t : plan.response_targets) labels.at(t.position) = MixedToken::from_set(t.set);
  }
  return labels;
}

double sequence_loss(const std::vector<StepOutput>& outputs, const std::vector<MixedToken>& labels) {
  if (outputs.size() != labels.size()) throw std::invalid_argument("outputs and labels differ in length");
  if (outputs.empty()) throw std::invalid_argument("empty sequence");
  double total = 0.0;
  for (std::size_t j = 0; j < outputs.size(); ++j) total += cross_entropy(outputs[j].log_probs, labels[j]);
  const double loss = total / static_cast<double>(outputs.size());
  if (!std::isfinite(loss)) throw NumericError("non-finite sequence loss");
  return loss;
}

double sequence_loss(const std::vector<StepOutput>& outputs, const DialogueSample& sample,
                     const AugmentationPlan& plan) {
  return sequence_loss(outputs, step_labels(sample, plan, true));
}

void adam_update(std::span<double> param, std::span<const double> grad, std::span<double> m, std::span<double> v,
                 long step, const AdamConfig& c) {
  const double bc1 = 1.0 - std::pow(c.beta1, static_cast<double>(step));
  const double bc2 = 1.0 - std::pow(c.beta2, static_cast<double>(step));
  for (std::size_t i = 0; i < param.size(); ++i) {
    const double g = grad[i];
    if (!std::isfinite(g)) throw NumericError("non-finite gradient in Adam update");
    m[i] = c.beta1 * m[i] + (1.0 - c.beta1) * g;
    v[i] = c.beta2 * v[i] + (1.0 - c.beta2) * g * g;
    const double m_hat = m[i] / bc1;
    const double v_hat = v[i] / bc2;
    param[i] -= c.lr * m_hat / (std::sqrt(v_hat) + c.eps);
  }
}

AdamState AdamState::zeros(const ModelDims& dims) {
  return {Seq2SeqParams::zeros(dims), Seq2SeqParams::zeros(dims), 0};
}

void adam_step(Seq2SeqParams& params, const Seq2SeqParams& grads, AdamState& state, const AdamConfig& config) {
  if (!grads.all_finite()) throw NumericError("non-finite gradient in Adam step");
  ++state.step;
  auto p = flat_blocks(params);
  auto g = flat_blocks(grads);
  auto m = flat_blocks(state.m);
  auto v = flat_blocks(state.v);
  for (std::size_t b = 0; b < p.size(); ++b) adam_update(p[b], g[b], m[b], v[b], state.step, config);
}

double clip_global_norm(Seq2SeqParams& grads, double max_norm) {
  double sq = 0.0;
  grads.for_each_block([&](std::string_view, const auto& b) { sq += b.squaredNorm(); });
  const double norm = std::sqrt(sq);
  if (max_norm > 0.0 && norm > max_norm) {
    const double scale = max_norm / norm;
    grads.for_each_block([&](std::string_view, auto& b) { b *= scale; });
  }
  return norm;
}

std::string_view to_string(TrainMode mode) {
  switch (mode) {
    case TrainMode::kEA: return "EA";
    case TrainMode::kBaseline: return "baseline";
    case TrainMode::kRep: return "rep";
    case TrainMode::kNoSoftLabel: return "no-soft-label";
    case TrainMode::kNoHistoryAug: return "no-history-aug";
  }
  return "?";
}

TrainMode parse_train_mode(std::string_view name) {
  for (auto m : {TrainMode::kEA, TrainMode::kBaseline, TrainMode::kRep, TrainMode::kNoSoftLabel,
                 TrainMode::kNoHistoryAug}) {
    if (to_string(m) == name) return m;
  }
  throw ConfigError("unknown mode \"" + std::string(name) +
                    "\" (expected EA, baseline, rep, no-soft-label or no-history-aug)");
}

bool uses_augmentation(TrainMode mode) { return mode != TrainMode::kBaseline; }

void TrainConfig::validate() const {
  augment.validate();
  if (!(adam.lr > 0.0)) throw ConfigError("lr must be positive");
  if (!(adam.beta1 >= 0.0 && adam.beta1 < 1.0)) throw ConfigError("beta1 must lie in [0, 1)");
  if (!(adam.beta2 >= 0.0 && adam.beta2 < 1.0)) throw ConfigError("beta2 must lie in [0, 1)");
  if (!(adam.eps > 0.0)) throw ConfigError("eps must be positive");
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (epochs < 0) throw ConfigError("epochs must be >= 0");
}

double perplexity(const Seq2SeqParams& params, const CorpusSplit& split) {
  if (split.empty()) throw std::invalid_argument("perplexity of an empty split");
  double nll = 0.0;
  std::size_t tokens = 0;
  for (const auto& s : split.samples) {
    const auto trace = forward(params, s);
    for (std::size_t j = 0; j < s.response.size(); ++j) nll -= trace.outputs[j].log_probs[s.response[j]];
    tokens += s.response.size();
  }
  return std::exp(nll / static_cast<double>(tokens));
}

TrainResult train(const TrainInputs& in, const TrainConfig& config, const StepObserver& observer) {
  config.validate();
  if (in.train.empty()) throw ConfigError("training split is empty");
  if (uses_augmentation(config.mode) && in.neighbors == nullptr) {
    throw ConfigError("mode " + std::string(to_string(config.mode)) + " requires a neighbor model");
  }
  if (in.neighbors && in.neighbors->vocab_size() != in.vocab.size()) {
    throw ConfigError("neighbor model vocabulary size does not match the corpus vocabulary");
  }
  ModelDims dims = in.dims;
  dims.vocab = static_cast<int>(in.vocab.size());
  dims.validate();

  TrainResult result;
  Rng init_rng = Rng::stream(config.seed, "init");
  result.params = Seq2SeqParams::random(dims, init_rng);
  if (in.initial_embedding) {
    if (in.initial_embedding->rows() != dims.vocab || in.initial_embedding->cols() != dims.embed) {
      throw ConfigError("initial embedding shape does not match the model");
    }
    result.params.embedding = *in.initial_embedding;
  }
  result.adam = AdamState::zeros(dims);
  result.plan_digest = fnv1a64("softaug-plans");

  const EligibilityMask eligible(in.vocab);
  std::optional<NeighborIndex> neighbors;
  if (in.neighbors) neighbors.emplace(*in.neighbors, config.augment.k, config.augment.tau);

  Seq2SeqParams current = result.params;
  Seq2SeqParams grads = Seq2SeqParams::zeros(dims);
  Rng shuffle_rng = Rng::stream(config.seed, "shuffle");
  std::vector<std::size_t> order(in.train.size());
  double best_ppl = std::numeric_limits<double>::infinity();
  long step = 0;
  long augmented_steps = 0;

  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    shuffle_rng.shuffle(std::span<std::size_t>(order));

    double epoch_nll = 0.0;
    std::size_t epoch_tokens = 0;
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(config.batch_size), ++step) {
      const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(config.batch_size));
      const bool augmented = uses_augmentation(config.mode) && step % 2 == 0;
      result.step_augmented.push_back(augmented);
      if (augmented) ++augmented_steps;

      Rng selection = Rng::stream(config.seed, "selection", static_cast<std::uint64_t>(step));
      std::vector<ForwardTrace> traces;
      std::vector<std::vector<MixedToken>> labels;
      traces.reserve(end - start);
      labels.reserve(end - start);
      std::size_t batch_tokens = 0;
      double batch_nll = 0.0;

      for (std::size_t b = start; b < end; ++b) {
        const DialogueSample& sample = in.train.samples[order[b]];
        AugmentationPlan plan;
        if (augmented && config.augment.rho > 0.0) {
          plan = make_plan(sample, eligible, *neighbors, config.augment.rho, selection);
          if (config.mode == TrainMode::kNoHistoryAug) plan = response_only(std::move(plan));
          result.plan_digest = fnv1a64(plan.serialize() + "|", result.plan_digest);
          result.history_targets += static_cast<long>(plan.history_targets.size());
          result.response_targets += static_cast<long>(plan.response_targets.size());
        }
        if (config.mode == TrainMode::kRep) {
          const DialogueSample replaced = apply_replacement(sample, plan);
          traces.push_back(forward(current, replaced));
          labels.push_back(step_labels(replaced, {}, false));
        } else {
          const bool soft = config.mode != TrainMode::kNoSoftLabel;
          traces.push_back(forward(current, sample, plan));
          labels.push_back(step_labels(sample, plan, soft));
        }
        for (std::size_t j = 0; j < labels.back().size(); ++j) {
          batch_nll += cross_entropy(traces.back().outputs[j].log_probs, labels.back()[j]);
        }
        batch_tokens += labels.back().size();
      }
      if (!std::isfinite(batch_nll)) throw NumericError("non-finite training loss at step " + std::to_string(step));

      grads.set_zero();
      const double inv_tokens = 1.0 / static_cast<double>(batch_tokens);
      std::vector<Vector> logit_grads;
      for (std::size_t i = 0; i < traces.size(); ++i) {
        logit_grads.clear();
        for (std::size_t j = 0; j < labels[i].size(); ++j) {
          logit_grads.push_back(logit_gradient(traces[i].outputs[j].probs, labels[i][j]) * inv_tokens);
        }
        backward(current, traces[i], logit_grads, grads);
      }
      clip_global_norm(grads, config.clip_norm);
      adam_step(current, grads, result.adam, config.adam);

      epoch_nll += batch_nll;
      epoch_tokens += batch_tokens;
      if (observer) observer(step, augmented, batch_nll * inv_tokens);
    }

    EpochLog log;
    log.epoch = epoch;
    log.step_count = step;
    log.augmented_steps = augmented_steps;
    log.train_loss = epoch_nll / static_cast<double>(epoch_tokens);
    log.valid_ppl = in.valid && !in.valid->empty() ? perplexity(current, *in.valid)
                                                   : std::numeric_limits<double>::quiet_NaN();
    result.epochs.push_back(log);

    const bool has_valid = !std::isnan(log.valid_ppl);
    if (!has_valid || log.valid_ppl < best_ppl) {
      if (has_valid) best_ppl = log.valid_ppl;
      result.params = current;
      result.best_epoch = epoch;
    }
  }
  return result;
}

void write_training_log(const std::filesystem::path& path, const std::vector<EpochLog>& epochs) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "epoch,step_count,augmented_steps,train_loss,valid_ppl\n";
  char buf[64];
  for (const auto& e : epochs) {
    out << e.epoch << ',' << e.step_count << ',' << e.augmented_steps << ',';
    std::snprintf(buf, sizeof buf, "%.17g", e.train_loss);
    out << buf << ',';
    if (std::isnan(e.valid_ppl)) {
      out << "nan";
    } else {
      std::snprintf(buf, sizeof buf, "%.17g", e.valid_ppl);
      out << buf;
    }
    out << '\n';
  }
}

}  // namespace softaug
