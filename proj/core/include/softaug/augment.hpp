#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "softaug/corpus.hpp"
#include "softaug/neighbors.hpp"
#include "softaug/rng.hpp"
#include "softaug/types.hpp"

namespace softaug {

// A token together with its semantic neighbors. entries[0] is the original
// token with score exactly 1; the distribution is p_j = s_j / sum_l s_l.
struct SoftWordSet {
  struct Entry {
    TokenId token;
    double score;
    bool operator==(const Entry&) const = default;
  };
  std::vector<Entry> entries;

  static SoftWordSet singleton(TokenId token) { return SoftWordSet{{{token, 1.0}}}; }

  TokenId original() const { return entries.front().token; }
  bool degenerate() const { return entries.size() == 1; }
  std::vector<double> distribution() const;

  bool operator==(const SoftWordSet&) const = default;
};

struct AugmentTarget {
  std::size_t position;
  SoftWordSet set;
  bool operator==(const AugmentTarget&) const = default;
};

// Selected positions of one sample, ascending, each bound to its soft set.
struct AugmentationPlan {
  std::vector<AugmentTarget> history_targets;
  std::vector<AugmentTarget> response_targets;

  bool empty() const { return history_targets.empty() && response_targets.empty(); }
  // Exact text form (scores printed with 17 significant digits).
  std::string serialize() const;
  bool operator==(const AugmentationPlan&) const = default;
};

struct AugmentConfig {
  double rho = 0.4;
  double tau = 0.4;
  int k = 5;

  void validate() const;
};

// False for reserved tokens, tokens without any alphanumeric character,
// articles and a fixed preposition list.
bool is_eligible(TokenId token, const Vocabulary& vocab);

// is_eligible precomputed over a whole vocabulary.
class EligibilityMask {
 public:
  explicit EligibilityMask(const Vocabulary& vocab);
  bool operator()(TokenId token) const { return mask_.at(static_cast<std::size_t>(token)); }

 private:
  std::vector<bool> mask_;
};

struct TargetPositions {
  std::vector<std::size_t> history;
  std::vector<std::size_t> response;
};

// One Bernoulli(rho) draw per eligible position, history first.
TargetPositions select_targets(const DialogueSample& sample, const EligibilityMask& eligible, double rho,
                               Rng& rng);

SoftWordSet build_soft_word_set(TokenId token, const NeighborIndex& neighbors);
SoftWordSet build_soft_word_set(TokenId token, const NeighborModel& model, int k, double tau);

// sum_j p_j * E.row(c_j). A singleton set reproduces E.row(t) exactly.
Vector fuse_embedding(const SoftWordSet& set, const Matrix& embedding);

AugmentationPlan make_plan(const DialogueSample& sample, const EligibilityMask& eligible,
                           const NeighborIndex& neighbors, double rho, Rng& rng);

// Top neighbor if any survives the filters, otherwise the token itself.
TokenId replace_most_similar(TokenId token, const NeighborIndex& neighbors);
TokenId replace_most_similar(TokenId token, const NeighborModel& model, int k, double tau);

// Hard replacement of every planned position by its top candidate (the
// "rep" baseline). Labels follow the replaced response.
DialogueSample apply_replacement(const DialogueSample& sample, const AugmentationPlan& plan);

AugmentationPlan response_only(AugmentationPlan plan);

// Human-readable dump of one plan: per target the original token, candidates,
// raw scores and p to 6 decimals.
std::string describe_plan(const DialogueSample& sample, const AugmentationPlan& plan, const Vocabulary& vocab);

}  // namespace softaug
