#pragma once

#include <array>
#include <string>
#include <vector>

namespace softaug {

using Sentence = std::vector<std::string>;

// |unique n-grams| / |n-grams|, pooled over all sentences; 0 when there are
// no n-grams.
double dist_n(const std::vector<Sentence>& responses, int n);

// Entropy (nats) of the pooled n-gram frequency distribution; 0 when there
// are no n-grams.
double ent_n(const std::vector<Sentence>& responses, int n);

// Mean of per-sentence distinct ratios; a sentence with no n-gram counts
// as 1.0. 0 for an empty list.
double sen_n(const std::vector<Sentence>& responses, int n);

// Per-order statistics shared by BLEU and its tests.
struct BleuStats {
  std::array<long, 4> matches{};
  std::array<long, 4> totals{};
  long candidate_length = 0;
  long reference_length = 0;
};

BleuStats bleu_stats(const std::vector<Sentence>& candidates, const std::vector<Sentence>& references);

// Corpus BLEU-4 with one reference per candidate. Orders with zero matches
// are smoothed geometrically: the k-th such order uses 1 / (2^k * total).
// Throws std::invalid_argument on a length mismatch.
double bleu(const std::vector<Sentence>& candidates, const std::vector<Sentence>& references);
double bleu_from_stats(const BleuStats& stats);

// NIST-4: information-weighted matches summed over n = 1..4 with
// Info(w1..wn) = log2(count(w1..wn-1) / count(w1..wn)) on reference counts,
// times exp(beta * log^2(min(1, c / r))), beta chosen so that the factor is
// 0.5 at c / r = 2/3.
double nist(const std::vector<Sentence>& candidates, const std::vector<Sentence>& references, int max_n = 4);

// Throws std::invalid_argument on an empty list.
double avg_len(const std::vector<Sentence>& responses);

struct MetricsReport {
  double bleu = 0.0;
  double nist4 = 0.0;
  std::array<double, 3> ent{};
  std::array<double, 3> dist{};
  std::array<double, 3> sen{};
  double avg_len = 0.0;
  double ppl = 0.0;  // NaN when no model was supplied

  std::string to_json() const;  // flat object, NaN written as null
  std::string to_table() const;
};

MetricsReport evaluate(const std::vector<Sentence>& candidates, const std::vector<Sentence>& references,
                       double ppl);

}  // namespace softaug
