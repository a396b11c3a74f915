#include "softaug/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <stdexcept>

#include <json.hpp>

namespace softaug {

namespace {

using NGram = std::vector<std::string>;
using NGramCounts = std::map<NGram, long>;

NGramCounts count_ngrams(const Sentence& s, int n) {
  NGramCounts counts;
  const auto len = static_cast<long>(s.size());
  for (long i = 0; i + n <= len; ++i) ++counts[NGram(s.begin() + i, s.begin() + i + n)];
  return counts;
}

long ngram_total(const Sentence& s, int n) { return std::max(0L, static_cast<long>(s.size()) - n + 1); }

void check_n(int n) {
  if (n < 1) throw std::invalid_argument("n-gram order must be >= 1");
}

void check_aligned(const std::vector<Sentence>& c, const std::vector<Sentence>& r) {
  if (c.size() != r.size()) throw std::invalid_argument("candidate and reference counts differ");
}

}  // namespace

double dist_n(const std::vector<Sentence>& responses, int n) {
  check_n(n);
  NGramCounts pooled;
  long total = 0;
  for (const auto& s : responses) {
    for (auto& [g, c] : count_ngrams(s, n)) pooled[g] += c;
    total += ngram_total(s, n);
  }
  return total == 0 ? 0.0 : static_cast<double>(pooled.size()) / static_cast<double>(total);
}

double ent_n(const std::vector<Sentence>& responses, int n) {
  check_n(n);
  NGramCounts pooled;
  long total = 0;
  for (const auto& s : responses) {
    for (auto& [g, c] : count_ngrams(s, n)) pooled[g] += c;
    total += ngram_total(s, n);
  }
  if (total == 0) return 0.0;
  double h = 0.0;
  for (const auto& [g, c] : pooled) {
    const double p = static_cast<double>(c) / static_cast<double>(total);
    h -= p * std::log(p);
  }
  return h;
}

double sen_n(const std::vector<Sentence>& responses, int n) {
  check_n(n);
  if (responses.empty()) return 0.0;
  double sum = 0.0;
  for (const auto& s : responses) {
    const long total = ngram_total(s, n);
    sum += total == 0 ? 1.0 : static_cast<double>(count_ngrams(s, n).size()) / static_cast<double>(total);
  }
  return sum / static_cast<double>(responses.size());
}

BleuStats bleu_stats(const std::vector<Sentence>& candidates, const std::vector<Sentence>& references) {
  check_aligned(candidates, references);
  BleuStats st;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    st.candidate_length += static_cast<long>(candidates[i].size());
    st.reference_length += static_cast<long>(references[i].size());
    for (int n = 1; n <= 4; ++n) {
      const auto ref = count_ngrams(references[i], n);
      for (const auto& [g, c] : count_ngrams(candidates[i], n)) {
        auto it = ref.find(g);
        if (it != ref.end()) st.matches[static_cast<std::size_t>(n - 1)] += std::min(c, it->second);
      }
      st.totals[static_cast<std::size_t>(n - 1)] += ngram_total(candidates[i], n);
    }
  }
  return st;
}

double bleu_from_stats(const BleuStats& st) {
  if (st.candidate_length == 0) return 0.0;
  double log_sum = 0.0;
  double smooth = 1.0;
  for (std::size_t n = 0; n < 4; ++n) {
    double p;
    if (st.matches[n] > 0) {
      p = static_cast<double>(st.matches[n]) / static_cast<double>(st.totals[n]);
    } else {
      smooth *= 2.0;
      p = 1.0 / (smooth * static_cast<double>(std::max(1L, st.totals[n])));
    }
    log_sum += std::log(p);
  }
  const double c = static_cast<double>(st.candidate_length);
  const double r = static_cast<double>(st.reference_length);
  const double bp = c > r ? 1.0 : std::exp(1.0 - r / c);
  return bp * std::exp(log_sum / 4.0);
}

double bleu(const std::vector<Sentence>& candidates, const std::vector<Sentence>& references) {
  return bleu_from_stats(bleu_stats(candidates, references));
}

double nist(const std::vector<Sentence>& candidates, const std::vector<Sentence>& references, int max_n) {
  check_aligned(candidates, references);
  check_n(max_n);

  // Reference-side counts for information weights; key length identifies n.
  NGramCounts ref_counts;
  long ref_words = 0;
  for (const auto& r : references) {
    ref_words += static_cast<long>(r.size());
    for (int n = 1; n <= max_n; ++n) {
      for (auto& [g, c] : count_ngrams(r, n)) ref_counts[g] += c;
    }
  }
  auto info = [&](const NGram& g) {
    const double count = static_cast<double>(ref_counts.at(g));
    const double parent = g.size() == 1 ? static_cast<double>(ref_words)
                                        : static_cast<double>(ref_counts.at(NGram(g.begin(), g.end() - 1)));
    return std::log2(parent / count);
  };

  long cand_words = 0;
  double score = 0.0;
  for (int n = 1; n <= max_n; ++n) {
    double weighted = 0.0;
    long total = 0;
    for (std::size_t i = 0; i < candidates.size(); ++i) {
      const auto ref = count_ngrams(references[i], n);
      for (const auto& [g, c] : count_ngrams(candidates[i], n)) {
        auto it = ref.find(g);
        if (it != ref.end()) weighted += static_cast<double>(std::min(c, it->second)) * info(g);
      }
      total += ngram_total(candidates[i], n);
    }
    if (total > 0) score += weighted / static_cast<double>(total);
  }
  for (const auto& c : candidates) cand_words += static_cast<long>(c.size());
  if (cand_words == 0 || ref_words == 0) return 0.0;

  const double beta = std::log(0.5) / std::pow(std::log(1.5), 2);
  const double ratio = std::min(1.0, static_cast<double>(cand_words) / static_cast<double>(ref_words));
  return score * std::exp(beta * std::pow(std::log(ratio), 2));
}

double avg_len(const std::vector<Sentence>& responses) {
  if (responses.empty()) throw std::invalid_argument("avg_len of an empty response list");
  double total = 0.0;
  for (const auto& s : responses) total += static_cast<double>(s.size());
  return total / static_cast<double>(responses.size());
}

std::string MetricsReport::to_json() const {
  auto num = [](double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); };
  nlohmann::ordered_json j;
  j["bleu"] = num(bleu);
  j["nist4"] = num(nist4);
  for (int n = 0; n < 3; ++n) j["ent" + std::to_string(n + 1)] = num(ent[n]);
  for (int n = 0; n < 3; ++n) j["dist" + std::to_string(n + 1)] = num(dist[n]);
  for (int n = 0; n < 3; ++n) j["sen" + std::to_string(n + 1)] = num(sen[n]);
  j["avg_len"] = num(avg_len);
  j["ppl"] = num(ppl);
  return j.dump(2);
}

std::string MetricsReport::to_table() const {
  std::string out;
  char buf[128];
  auto row = [&](const char* name, double v) {
    std::snprintf(buf, sizeof buf, "%-8s %10.4f\n", name, v);
    out += buf;
  };
  out += "# BLEU, Dist-n and Sen-n in %; Ent-n in nats\n";
  row("PPL", ppl);
  row("avg.len", avg_len);
  row("BLEU", 100.0 * bleu);
  row("NIST-4", nist4);
  const char* ent_names[] = {"Ent-1", "Ent-2", "Ent-3"};
  const char* dist_names[] = {"Dist-1", "Dist-2", "Dist-3"};
  const char* sen_names[] = {"Sen-1", "Sen-2", "Sen-3"};
  for (int n = 0; n < 3; ++n) row(ent_names[n], ent[n]);
  for (int n = 0; n < 3; ++n) row(dist_names[n], 100.0 * dist[n]);
  for (int n = 0; n < 3; ++n) row(sen_names[n], 100.0 * sen[n]);
  return out;
}

MetricsReport evaluate(const std::vector<Sentence>& candidates, const std::vector<Sentence>& references,
                       double ppl) {
  if (candidates.empty()) throw std::invalid_argument("no responses to evaluate");
  MetricsReport r;
  r.bleu = bleu(candidates, references);
  r.nist4 = nist(candidates, references, 4);
  for (int n = 1; n <= 3; ++n) {
    r.ent[static_cast<std::size_t>(n - 1)] = ent_n(candidates, n);
    r.dist[static_cast<std::size_t>(n - 1)] = dist_n(candidates, n);
    r.sen[static_cast<std::size_t>(n - 1)] = sen_n(candidates, n);
  }
  r.avg_len = avg_len(candidates);
  r.ppl = ppl;
  return r;
}

}  // namespace softaug
