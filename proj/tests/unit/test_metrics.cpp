#include <cmath>
#include <map>
#include <set>

#include <gtest/gtest.h>
#include <json.hpp>

#include "metric_fixtures.hpp"
#include "softaug/metrics.hpp"
#include "softaug/rng.hpp"

namespace softaug {
namespace {

using testing::sents;

TEST(Diversity, HandFixtures) {
  for (const auto& f : testing::diversity_fixtures()) {
    double got = 0;
    switch (f.kind) {
      case testing::DiversityFixture::kDist: got = dist_n(sents(f.responses), f.n); break;
      case testing::DiversityFixture::kEnt: got = ent_n(sents(f.responses), f.n); break;
      case testing::DiversityFixture::kSen: got = sen_n(sents(f.responses), f.n); break;
    }
    EXPECT_NEAR(got, f.expected, 1e-15) << f.label;
  }
}

std::vector<Sentence> random_corpus(Rng& rng) {
  std::vector<Sentence> out(1 + rng.below(12));
  for (auto& s : out) {
    s.resize(rng.below(8));
    for (auto& w : s) w = std::string(1, static_cast<char>('a' + rng.below(4)));
  }
  return out;
}

TEST(Diversity, RandomCorporaAgainstBruteForce) {
  Rng rng(77);
  for (int trial = 0; trial < 200; ++trial) {
    const auto corpus = random_corpus(rng);
    for (int n = 1; n <= 3; ++n) {
      std::map<Sentence, long> freq;
      long total = 0;
      double sen_sum = 0;
      for (const auto& s : corpus) {
        std::set<Sentence> local;
        long local_total = 0;
        for (std::size_t i = 0; i + n <= s.size(); ++i) {
          const Sentence g(s.begin() + static_cast<long>(i), s.begin() + static_cast<long>(i) + n);
          ++freq[g];
          local.insert(g);
          ++local_total;
        }
        total += local_total;
        sen_sum += local_total ? static_cast<double>(local.size()) / static_cast<double>(local_total) : 1.0;
      }
      const double dist = total ? static_cast<double>(freq.size()) / static_cast<double>(total) : 0.0;
      double ent = 0;
      for (const auto& [g, c] : freq) {
        const double p = static_cast<double>(c) / static_cast<double>(total);
        ent -= p * std::log(p);
      }
      EXPECT_EQ(dist_n(corpus, n), dist);
      EXPECT_NEAR(ent_n(corpus, n), ent, 1e-12);
      EXPECT_NEAR(sen_n(corpus, n), sen_sum / static_cast<double>(corpus.size()), 1e-15);
      EXPECT_GE(ent_n(corpus, n), 0.0);
      if (!freq.empty()) EXPECT_LE(ent_n(corpus, n), std::log(static_cast<double>(freq.size())) + 1e-12);
    }
  }
}

TEST(Bleu, HandCountedFixtures) {
  for (const auto& f : testing::bleu_fixtures()) {
    const auto c = sents(f.candidates);
    const auto r = sents(f.references);
    const auto st = bleu_stats(c, r);
    for (int n = 0; n < 4; ++n) {
      EXPECT_EQ(st.matches[n], f.matches[n]) << f.candidates[0] << " n=" << n + 1;
      EXPECT_EQ(st.totals[n], f.totals[n]) << f.candidates[0] << " n=" << n + 1;
    }
    EXPECT_EQ(st.candidate_length, f.cand_len);
    EXPECT_EQ(st.reference_length, f.ref_len);
    EXPECT_NEAR(bleu(c, r), testing::bleu_from_counts(f), 1e-9) << f.candidates[0];
  }
}

TEST(Bleu, SelfMatchAndNoOverlap) {
  const auto x = sents({"the cat sat on the mat", "a b c d e", "hi"});
  EXPECT_EQ(bleu(x, x), 1.0);
  const double floor = bleu(sents({"a b c d e f g h i j"}), sents({"k l m n o p q r s t"}));
  EXPECT_GT(floor, 0.0);
  EXPECT_LT(floor, 0.05);
  EXPECT_THROW(bleu(x, sents({"a"})), std::invalid_argument);
  EXPECT_EQ(bleu(sents({""}), sents({"a b"})), 0.0);
}

TEST(Nist, HandTraces) {
  for (const auto& f : testing::nist_fixtures())
    EXPECT_NEAR(nist(sents(f.candidates), sents(f.references)), f.expected, 1e-9) << f.label;
}

TEST(Nist, EmptyCandidatesAndMonotone) {
  EXPECT_EQ(nist(sents({"", ""}), sents({"a b", "c"})), 0.0);
  const auto ref = sents({"we went to the market on sunday"});
  EXPECT_GE(nist(sents({"we went to the market on sunday"}), ref), nist(sents({"we went to the market"}), ref));
}

TEST(AvgLen, Cases) {
  EXPECT_THROW(avg_len({}), std::invalid_argument);
  EXPECT_EQ(avg_len(sents({"a"})), 1.0);
  EXPECT_EQ(avg_len(sents({"a b", "a b c d"})), 3.0);
  Rng rng(3);
  for (int t = 0; t < 20; ++t) {
    const auto c = random_corpus(rng);
    double sum = 0;
    for (const auto& s : c) sum += static_cast<double>(s.size());
    EXPECT_NEAR(avg_len(c), sum / static_cast<double>(c.size()), 1e-15);
  }
}

TEST(Report, JsonHasEveryField) {
  const auto rep = evaluate(sents({"a b c", "a b"}), sents({"a b c", "b c"}), NAN);
  const auto j = nlohmann::json::parse(rep.to_json());
  for (const char* key : {"bleu", "nist4", "ent1", "ent2", "ent3", "dist1", "dist2", "dist3", "sen1", "sen2", "sen3",
                          "avg_len", "ppl"})
    EXPECT_TRUE(j.contains(key)) << key;
  EXPECT_TRUE(j["ppl"].is_null());
  EXPECT_EQ(j["avg_len"].get<double>(), 2.5);
  EXPECT_NE(rep.to_table().find("Dist-2"), std::string::npos);
}

}  // namespace
}  // namespace softaug
