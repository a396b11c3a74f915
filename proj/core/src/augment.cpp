#include "softaug/augment.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <cstdio>
#include <sstream>
#include <string_view>

namespace softaug {

namespace {

constexpr std::array<std::string_view, 3> kArticles = {"a", "an", "the"};
constexpr std::array<std::string_view, 16> kPrepositions = {
    "in", "on", "at", "to", "of", "for", "with", "from",
    "by", "about", "as", "into", "over", "under", "up", "down"};

bool has_alnum(std::string_view s) {
  return std::any_of(s.begin(), s.end(), [](unsigned char c) { return std::isalnum(c) || c >= 0x80; });
}

std::string fixed6(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

}  // namespace

std::vector<double> SoftWordSet::distribution() const {
  double total = 0.0;
  for (const auto& e : entries) total += e.score;
  std::vector<double> p;
  p.reserve(entries.size());
  for (const auto& e : entries) p.push_back(e.score / total);
  return p;
}

std::string AugmentationPlan::serialize() const {
  std::ostringstream out;
  out.precision(17);
  auto dump = [&](char side, const std::vector<AugmentTarget>& targets) {
    for (const auto& t : targets) {
      out << side << ' ' << t.position;
      for (const auto& e : t.set.entries) out << ' ' << e.token << ':' << e.score;
      out << '\n';
    }
  };
  dump('H', history_targets);
  dump('R', response_targets);
  return out.str();
}

void AugmentConfig::validate() const {
  if (!(rho >= 0.0 && rho <= 1.0)) throw ConfigError("rho must lie in [0, 1]");
  if (!(tau >= 0.0 && tau <= 1.0)) throw ConfigError("tau must lie in [0, 1]");
  if (k < 0) throw ConfigError("k must be >= 0");
}

bool is_eligible(TokenId token, const Vocabulary& vocab) {
  if (Vocabulary::is_reserved(token)) return false;
  const std::string& s = vocab.token(token);
  if (!has_alnum(s)) return false;
  for (auto a : kArticles) {
    if (s == a) return false;
  }
  for (auto p : kPrepositions) {
    if (s == p) return false;
  }
  return true;
}

EligibilityMask::EligibilityMask(const Vocabulary& vocab) : mask_(vocab.size()) {
  for (std::size_t i = 0; i < vocab.size(); ++i) mask_[i] = is_eligible(static_cast<TokenId>(i), vocab);
}

TargetPositions select_targets(const DialogueSample& sample, const EligibilityMask& eligible, double rho,
                               Rng& rng) {
  TargetPositions out;
  auto scan = [&](const TokenSeq& seq, std::vector<std::size_t>& dst) {
    for (std::size_t i = 0; i < seq.size(); ++i) {
      if (eligible(seq[i]) && rng.bernoulli(rho)) dst.push_back(i);
    }
  };
  scan(sample.history, out.history);
  scan(sample.response, out.response);
  return out;
}

SoftWordSet build_soft_word_set(TokenId token, const NeighborIndex& neighbors) {
  SoftWordSet set = SoftWordSet::singleton(token);
  for (const auto& n : neighbors.query(token)) set.entries.push_back({n.token, n.score});
  return set;
}

SoftWordSet build_soft_word_set(TokenId token, const NeighborModel& model, int k, double tau) {
  NeighborIndex index(model, k, tau);
  return build_soft_word_set(token, index);
}

Vector fuse_embedding(const SoftWordSet& set, const Matrix& embedding) {
  const auto p = set.distribution();
  Vector out = p[0] * embedding.row(set.entries[0].token).transpose();
  for (std::size_t j = 1; j < p.size(); ++j) out += p[j] * embedding.row(set.entries[j].token).transpose();
  return out;
}

AugmentationPlan make_plan(const DialogueSample& sample, const EligibilityMask& eligible,
                           const NeighborIndex& neighbors, double rho, Rng& rng) {
  const auto positions = select_targets(sample, eligible, rho, rng);
  AugmentationPlan plan;
  for (auto i : positions.history) {
    plan.history_targets.push_back({i, build_soft_word_set(sample.history[i], neighbors)});
  }
  for (auto i : positions.response) {
    plan.response_targets.push_back({i, build_soft_word_set(sample.response[i], neighbors)});
  }
  return plan;
}

TokenId replace_most_similar(TokenId token, const NeighborIndex& neighbors) {
  const auto& list = neighbors.query(token);
  return list.empty() ? token : list.front().token;
}

TokenId replace_most_similar(TokenId token, const NeighborModel& model, int k, double tau) {
  const auto list = query_neighbors(model, token, k, tau);
  return list.empty() ? token : list.front().token;
}

DialogueSample apply_replacement(const DialogueSample& sample, const AugmentationPlan& plan) {
  DialogueSample out = sample;
  for (const auto& t : plan.history_targets) {
    if (!t.set.degenerate()) out.history.at(t.position) = t.set.entries[1].token;
  }
  for (const auto& t : plan.response_targets) {
    if (!t.set.degenerate()) out.response.at(t.position) = t.set.entries[1].token;
  }
  return out;
}

AugmentationPlan response_only(AugmentationPlan plan) {
  plan.history_targets.clear();
  return plan;
}

std::string describe_plan(const DialogueSample& sample, const AugmentationPlan& plan, const Vocabulary& vocab) {
  std::ostringstream out;
  auto join = [&](const TokenSeq& seq) {
    std::string s;
    for (TokenId t : seq) {
      if (!s.empty()) s += ' ';
      s += vocab.token(t);
    }
    return s;
  };
  out << "  history:  " << join(sample.history) << '\n';
  out << "  response: " << join(sample.response) << '\n';
  if (plan.empty()) {
    out << "  no targets\n";
    return out.str();
  }
  auto dump = [&](const char* side, const std::vector<AugmentTarget>& targets, const TokenSeq& seq) {
    for (const auto& t : targets) {
      out << "  [" << side << ' ' << t.position << "] " << vocab.token(seq[t.position]) << '\n';
      const auto p = t.set.distribution();
      for (std::size_t j = 0; j < p.size(); ++j) {
        out << "      " << vocab.token(t.set.entries[j].token) << "  s=" << fixed6(t.set.entries[j].score)
            << "  p=" << fixed6(p[j]) << '\n';
      }
    }
  };
  dump("H", plan.history_targets, sample.history);
  dump("R", plan.response_targets, sample.response);
  return out.str();
}

}  // namespace softaug
