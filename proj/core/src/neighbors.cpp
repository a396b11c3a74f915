#include "softaug/neighbors.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <numeric>
#include <set>
#include <sstream>

namespace softaug {

namespace {

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// -log(sigmoid(x)) without overflow for large |x|.
double neg_log_sigmoid(double x) {
  return x > 0 ? std::log1p(std::exp(-x)) : -x + std::log1p(std::exp(x));
}

// Unigram^0.75 sampler over token ids.
class NoiseTable {
 public:
  explicit NoiseTable(const std::vector<long>& counts) {
    cumulative_.reserve(counts.size());
    double total = 0.0;
    for (long c : counts) {
      total += c > 0 ? std::pow(static_cast<double>(c), 0.75) : 0.0;
      cumulative_.push_back(total);
    }
    for (double& c : cumulative_) c /= total;
  }

  TokenId sample(Rng& rng) const {
    const double u = rng.uniform();
    auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), u);
    if (it == cumulative_.end()) --it;
    return static_cast<TokenId>(it - cumulative_.begin());
  }

 private:
  std::vector<double> cumulative_;
};

void validate(const CbowConfig& c) {
  if (c.dim < 1) throw ConfigError("neighbor.dim must be >= 1");
  if (c.window < 1) throw ConfigError("neighbor.window must be >= 1");
  if (c.epochs < 0) throw ConfigError("neighbor.epochs must be >= 0");
  if (c.negatives < 1) throw ConfigError("neighbor.negatives must be >= 1");
  if (!(c.lr > 0.0)) throw ConfigError("neighbor lr must be positive");
}

}  // namespace

std::vector<TokenSeq> cbow_sentences(const CorpusSplit& corpus) {
  std::vector<TokenSeq> sentences;
  auto push_clean = [&](TokenSeq& current) {
    if (!current.empty()) sentences.push_back(std::move(current));
    current.clear();
  };
  for (const auto& s : corpus.samples) {
    TokenSeq current;
    for (TokenId t : s.history) {
      if (t == kSep) {
        push_clean(current);
      } else if (!Vocabulary::is_reserved(t)) {
        current.push_back(t);
      }
    }
    push_clean(current);
    for (TokenId t : s.response) {
      if (!Vocabulary::is_reserved(t)) current.push_back(t);
    }
    push_clean(current);
  }
  return sentences;
}

NeighborModel init_cbow(std::size_t vocab_size, const CbowConfig& config) {
  validate(config);
  NeighborModel model;
  model.config = config;
  const auto rows = static_cast<Eigen::Index>(vocab_size);
  model.input.resize(rows, config.dim);
  model.output = Matrix::Zero(rows, config.dim);
  Rng rng = Rng::stream(config.seed, "neighbors/init");
  const double scale = 0.5 / config.dim;
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < config.dim; ++c) model.input(r, c) = rng.uniform(-scale, scale);
  }
  return model;
}

CbowInstanceGrad cbow_instance_gradient(const Matrix& input, const Matrix& output,
                                        std::span<const TokenId> context, TokenId target,
                                        std::span<const TokenId> negatives) {
  if (context.empty()) throw std::invalid_argument("CBOW instance needs a non-empty context");
  const Eigen::Index dim = input.cols();
  Vector h = Vector::Zero(dim);
  for (TokenId c : context) h += input.row(c).transpose();
  const double inv = 1.0 / static_cast<double>(context.size());
  h *= inv;

  CbowInstanceGrad g;
  Vector grad_h = Vector::Zero(dim);
  auto score = [&](TokenId id, bool positive) {
    const double x = output.row(id).dot(h);
    // d/dx of -log s(x) is s(x) - 1; of -log s(-x) is s(x).
    g.loss += positive ? neg_log_sigmoid(x) : neg_log_sigmoid(-x);
    const double coeff = positive ? sigmoid(x) - 1.0 : sigmoid(x);
    grad_h += coeff * output.row(id).transpose();
    g.output_grads.emplace_back(id, coeff * h);
  };
  score(target, true);
  for (TokenId n : negatives) score(n, false);

  for (TokenId c : context) g.input_grads.emplace_back(c, grad_h * inv);
  return g;
}

NeighborModel train_cbow(const CorpusSplit& corpus, std::size_t vocab_size, const CbowConfig& config) {
  NeighborModel model = init_cbow(vocab_size, config);
  const auto sentences = cbow_sentences(corpus);

  std::vector<long> counts(vocab_size, 0);
  std::size_t total_tokens = 0;
  for (const auto& s : sentences) {
    for (TokenId t : s) {
      if (static_cast<std::size_t>(t) >= vocab_size) throw ConfigError("token id exceeds vocabulary size");
      ++counts[static_cast<std::size_t>(t)];
      ++total_tokens;
    }
  }
  const auto distinct = std::count_if(counts.begin(), counts.end(), [](long c) { return c > 0; });
  if (distinct < 2) throw ConfigError("CBOW training needs at least two distinct non-reserved tokens");

  const NoiseTable noise(counts);
  Rng rng = Rng::stream(config.seed, "neighbors/negatives");
  const double total_steps = static_cast<double>(config.epochs) * static_cast<double>(total_tokens);
  double processed = 0.0;

  std::vector<TokenId> context;
  std::vector<TokenId> negatives;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    double loss_sum = 0.0;
    std::size_t instances = 0;
    for (const auto& sentence : sentences) {
      const auto len = static_cast<long>(sentence.size());
      for (long pos = 0; pos < len; ++pos, processed += 1.0) {
        context.clear();
        const long lo = std::max(0L, pos - config.window);
        const long hi = std::min(len - 1, pos + config.window);
        for (long j = lo; j <= hi; ++j) {
          if (j != pos) context.push_back(sentence[static_cast<std::size_t>(j)]);
        }
        if (context.empty()) continue;

        const TokenId target = sentence[static_cast<std::size_t>(pos)];
        negatives.clear();
        for (int n = 0; n < config.negatives; ++n) {
          TokenId neg = noise.sample(rng);
          if (neg != target) negatives.push_back(neg);
        }

        const double lr = config.lr * std::max(1e-4, 1.0 - processed / total_steps);
        auto grad = cbow_instance_gradient(model.input, model.output, context, target, negatives);
        for (auto& [id, gv] : grad.output_grads) model.output.row(id) -= lr * gv.transpose();
        for (auto& [id, gv] : grad.input_grads) model.input.row(id) -= lr * gv.transpose();
        loss_sum += grad.loss;
        ++instances;
      }
    }
    model.epoch_losses.push_back(instances ? loss_sum / static_cast<double>(instances) : 0.0);
    ++model.trained_epochs;
  }
  return model;
}

NeighborList query_neighbors(const NeighborModel& model, TokenId token, int k, double tau) {
  if (token < 0 || static_cast<std::size_t>(token) >= model.vocab_size()) {
    throw std::invalid_argument("neighbor query for out-of-range token " + std::to_string(token));
  }
  if (Vocabulary::is_reserved(token)) {
    throw std::invalid_argument("neighbor query for reserved token " + std::to_string(token));
  }
  NeighborList out;
  if (k <= 0) return out;

  const auto& w = model.input;
  const double qn = w.row(token).norm();
  if (qn == 0.0) return out;
  for (Eigen::Index c = kNumReserved; c < w.rows(); ++c) {
    if (c == token) continue;
    const double cn = w.row(c).norm();
    if (cn == 0.0) continue;
    const double cos = std::min(1.0, w.row(token).dot(w.row(c)) / (qn * cn));
    if (cos > 0.0 && cos >= tau) out.push_back({static_cast<TokenId>(c), cos});
  }
  auto by_rank = [](const Neighbor& a, const Neighbor& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.token < b.token;
  };
  const auto keep = std::min(out.size(), static_cast<std::size_t>(k));
  std::partial_sort(out.begin(), out.begin() + static_cast<long>(keep), out.end(), by_rank);
  out.resize(keep);
  return out;
}

NeighborIndex::NeighborIndex(const NeighborModel& model, int k, double tau)
    : model_(&model), k_(k), tau_(tau) {}

const NeighborList& NeighborIndex::query(TokenId token) const {
  auto it = cache_.find(token);
  if (it == cache_.end()) it = cache_.emplace(token, query_neighbors(*model_, token, k_, tau_)).first;
  return it->second;
}

void export_vectors(const Matrix& vectors, const Vocabulary& vocab, const std::filesystem::path& path) {
  if (static_cast<std::size_t>(vectors.rows()) != vocab.size()) {
    throw std::invalid_argument("vector rows do not match vocabulary size");
  }
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << vectors.rows() << ' ' << vectors.cols() << '\n';
  out << std::setprecision(17);
  for (Eigen::Index r = 0; r < vectors.rows(); ++r) {
    out << vocab.token(static_cast<TokenId>(r));
    for (Eigen::Index c = 0; c < vectors.cols(); ++c) out << ' ' << vectors(r, c);
    out << '\n';
  }
}

Matrix import_vectors(const std::filesystem::path& path, const Vocabulary& vocab, int dim, Rng& rng,
                      double init_scale) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open vector file: " + path.string());

  Matrix m(static_cast<Eigen::Index>(vocab.size()), dim);
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < dim; ++c) m(r, c) = rng.uniform(-init_scale, init_scale);
  }

  std::string line;
  if (!std::getline(in, line)) throw ConfigError(path.string() + ": missing header");
  std::istringstream header(line);
  long count = 0;
  long file_dim = 0;
  std::string extra;
  if (!(header >> count >> file_dim) || (header >> extra) || count < 0 || file_dim < 1) {
    throw ConfigError(path.string() + ": header must be \"count dim\"");
  }
  if (file_dim != dim) {
    throw ConfigError(path.string() + ": vector dimension " + std::to_string(file_dim) +
                      " does not match configured " + std::to_string(dim));
  }

  std::set<TokenId> seen;
  long line_no = 1;
  long rows_read = 0;
  std::vector<double> values(static_cast<std::size_t>(dim));
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream fields(line);
    std::string token;
    fields >> token;
    std::size_t n = 0;
    double v;
    while (fields >> v) {
      if (n == values.size()) {
        throw ConfigError(path.string() + ": line " + std::to_string(line_no) + " has more than " +
                          std::to_string(dim) + " components");
      }
      values[n++] = v;
    }
    if (!fields.eof() || n != values.size()) {
      throw ConfigError(path.string() + ": line " + std::to_string(line_no) + " expected " +
                        std::to_string(dim) + " numeric components");
    }
    ++rows_read;
    if (!vocab.contains(token)) continue;
    const TokenId id = vocab.id(token);
    if (!seen.insert(id).second) continue;
    for (int c = 0; c < dim; ++c) m(id, c) = values[static_cast<std::size_t>(c)];
  }
  if (rows_read != count) {
    throw ConfigError(path.string() + ": header announces " + std::to_string(count) + " rows, found " +
                      std::to_string(rows_read));
  }
  return m;
}

}  // namespace softaug
