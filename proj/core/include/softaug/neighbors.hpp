#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <unordered_map>
#include <utility>
#include <vector>

#include "softaug/corpus.hpp"
#include "softaug/rng.hpp"
#include "softaug/types.hpp"

namespace softaug {

struct CbowConfig {
  int dim = 100;
  int window = 4;
  int epochs = 100;
  int negatives = 5;
  double lr = 0.05;
  std::uint64_t seed = 1;
};

// Word-level CBOW model with negative sampling. Only `input` is used for
// neighbor queries; `output` exists for training.
struct NeighborModel {
  Matrix input;   // |V| x dim
  Matrix output;  // |V| x dim
  CbowConfig config;
  int trained_epochs = 0;
  std::vector<double> epoch_losses;  // mean instance loss per epoch

  std::size_t vocab_size() const { return static_cast<std::size_t>(input.rows()); }
  int dim() const { return static_cast<int>(input.cols()); }
};

struct Neighbor {
  TokenId token;
  double score;  // cosine similarity, in (0, 1]

  bool operator==(const Neighbor&) const = default;
};

// Ordered by score descending, ties by ascending token id.
using NeighborList = std::vector<Neighbor>;

// Sentences used for CBOW: history segments split at kSep plus the response,
// with reserved tokens removed.
std::vector<TokenSeq> cbow_sentences(const CorpusSplit& corpus);

// Randomly initialized, untrained model (what train_cbow starts from).
NeighborModel init_cbow(std::size_t vocab_size, const CbowConfig& config);

// Throws ConfigError if the corpus has fewer than two distinct non-reserved
// tokens or the configuration is invalid.
NeighborModel train_cbow(const CorpusSplit& corpus, std::size_t vocab_size, const CbowConfig& config);

// Loss and sparse gradients of one negative-sampling CBOW instance:
//   L = -log s(o_t . h) - sum_n log s(-o_n . h),  h = mean of input rows of context.
// Repeated ids appear as repeated entries; callers sum them.
struct CbowInstanceGrad {
  double loss = 0.0;
  std::vector<std::pair<TokenId, Vector>> input_grads;
  std::vector<std::pair<TokenId, Vector>> output_grads;
};

CbowInstanceGrad cbow_instance_gradient(const Matrix& input, const Matrix& output,
                                        std::span<const TokenId> context, TokenId target,
                                        std::span<const TokenId> negatives);

// Cosine neighbors of `token` over the input matrix. Reserved tokens never
// appear; non-positive scores are dropped, then scores < tau, then all but
// the top k. Throws std::invalid_argument for a reserved or out-of-range query.
NeighborList query_neighbors(const NeighborModel& model, TokenId token, int k, double tau);

// Memoized query_neighbors for fixed (k, tau). Not thread-safe.
class NeighborIndex {
 public:
  NeighborIndex(const NeighborModel& model, int k, double tau);

  const NeighborList& query(TokenId token) const;
  int k() const { return k_; }
  double tau() const { return tau_; }
  const NeighborModel& model() const { return *model_; }

 private:
  const NeighborModel* model_;
  int k_;
  double tau_;
  mutable std::unordered_map<TokenId, NeighborList> cache_;
};

// word2vec text format: "count dim" header then "token v1 ... vd" lines.
void export_vectors(const Matrix& vectors, const Vocabulary& vocab, const std::filesystem::path& path);

// Rows are aligned to `vocab`; tokens absent from the file keep a uniform
// (-init_scale, init_scale) draw from `rng`. Every row is drawn, so which
// tokens are missing does not shift the random stream. Throws ConfigError on a
// malformed file or when the file dimension differs from `dim`.
Matrix import_vectors(const std::filesystem::path& path, const Vocabulary& vocab, int dim, Rng& rng,
                      double init_scale);

}  // namespace softaug
