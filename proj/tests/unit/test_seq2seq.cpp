#include <algorithm>
#include <cmath>
#include <set>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "softaug/seq2seq.hpp"
#include "softaug/training.hpp"

namespace softaug {
namespace {

using V = std::vector<double>;

double sig(double x) { return 1.0 / (1.0 + std::exp(-x)); }

V matvec(const Matrix& m, const V& x) {
  V y(static_cast<std::size_t>(m.rows()), 0.0);
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) y[r] += m(r, c) * x[c];
  return y;
}

// GRU cell written out gate by gate.
V gru(const GruWeights& w, const V& x, const V& hp) {
  const auto ax = matvec(w.wx, x);
  const auto ah = matvec(w.wh, hp);
  const std::size_t h = hp.size();
  V out(h);
  for (std::size_t i = 0; i < h; ++i) {
    const double r = sig(ax[i] + w.bx[i] + ah[i] + w.bh[i]);
    const double z = sig(ax[h + i] + w.bx[h + i] + ah[h + i] + w.bh[h + i]);
    const double n = std::tanh(ax[2 * h + i] + w.bx[2 * h + i] + r * (ah[2 * h + i] + w.bh[2 * h + i]));
    out[i] = (1 - z) * n + z * hp[i];
  }
  return out;
}

V row(const Matrix& m, Eigen::Index r) { return V(m.row(r).data(), m.row(r).data() + m.cols()); }

// Teacher-forced logits of every decoder step with plain token inputs.
std::vector<V> scripted_logits(const Seq2SeqParams& p, const DialogueSample& s) {
  const std::size_t n = s.history.size();
  const auto h = static_cast<std::size_t>(p.dims.hidden);
  std::vector<V> fwd(n), bwd(n);
  V state(h, 0.0);
  for (std::size_t i = 0; i < n; ++i) fwd[i] = state = gru(p.enc_fwd, row(p.embedding, s.history[i]), state);
  state.assign(h, 0.0);
  for (std::size_t i = n; i-- > 0;) bwd[i] = state = gru(p.enc_bwd, row(p.embedding, s.history[i]), state);
  std::vector<V> annot(n);
  for (std::size_t i = 0; i < n; ++i) {
    annot[i] = fwd[i];
    annot[i].insert(annot[i].end(), bwd[i].begin(), bwd[i].end());
  }
  V summary = fwd[n - 1];
  summary.insert(summary.end(), bwd[0].begin(), bwd[0].end());
  auto s0 = matvec(p.bridge_w, summary);
  for (std::size_t i = 0; i < h; ++i) s0[i] = std::tanh(s0[i] + p.bridge_b[i]);

  std::vector<V> logits;
  TokenId prev = kBos;
  state = s0;
  for (TokenId target : s.response) {
    const auto q = matvec(p.att_state, state);
    V score(n);
    for (std::size_t i = 0; i < n; ++i) {
      const auto k = matvec(p.att_annot, annot[i]);
      double e = 0;
      for (std::size_t j = 0; j < h; ++j) e += p.att_v[j] * std::tanh(q[j] + k[j]);
      score[i] = e;
    }
    const double mx = *std::max_element(score.begin(), score.end());
    double z = 0;
    for (auto& e : score) z += (e = std::exp(e - mx));
    V ctx(2 * h, 0.0);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < 2 * h; ++j) ctx[j] += score[i] / z * annot[i][j];
    V x = row(p.embedding, prev);
    x.insert(x.end(), ctx.begin(), ctx.end());
    state = gru(p.dec, x, state);
    auto l = matvec(p.out_w, state);
    for (std::size_t i = 0; i < l.size(); ++i) l[i] += p.out_b[i];
    logits.push_back(l);
    prev = target;
  }
  return logits;
}

Seq2SeqParams make_params(int vocab, int d, int h, std::uint64_t seed, double scale = 0.5) {
  Rng rng(seed);
  return Seq2SeqParams::random({vocab, d, h}, rng, scale);
}

TEST(Params, TwentyBlocksWithExpectedShapes) {
  const auto p = make_params(12, 3, 2, 1);
  std::set<std::string> names;
  std::size_t count = 0;
  p.for_each_block([&](std::string_view n, const auto& b) {
    names.insert(std::string(n));
    count += static_cast<std::size_t>(b.size());
  });
  EXPECT_EQ(names.size(), Seq2SeqParams::kNumBlocks);
  EXPECT_EQ(count, p.parameter_count());
  EXPECT_EQ(p.dec.wx.cols(), 3 + 4);
  EXPECT_EQ(p.bridge_w.cols(), 4);
  EXPECT_TRUE(p.all_finite());
}

TEST(Embed, LookupAndMixtures) {
  const auto p = make_params(10, 3, 2, 2);
  EXPECT_TRUE(embed(7, p.embedding) == Vector(p.embedding.row(7).transpose()));
  EXPECT_TRUE(embed(MixedToken::from_set(SoftWordSet::singleton(7)), p.embedding) == embed(7, p.embedding));
  const SoftWordSet set{{{7, 1.0}, {8, 0.6}}};
  const auto mixed = embed(MixedToken::from_set(set), p.embedding);
  EXPECT_FALSE(mixed == embed(7, p.embedding));
  EXPECT_LT((mixed - fuse_embedding(set, p.embedding)).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(Encode, ShapesAndZeroWeights) {
  const auto p = make_params(10, 3, 2, 3);
  Matrix one(1, 3);
  one.row(0) = p.embedding.row(5);
  const auto enc = encode(p, one);
  EXPECT_EQ(enc.annotations.rows(), 1);
  EXPECT_EQ(enc.annotations.cols(), 4);

  // With zero weights only biases act: r=z=s(b_r), s(b_z); n=tanh(bx_n + r*bh_n).
  auto z = Seq2SeqParams::zeros({10, 3, 2});
  z.enc_fwd.bx << 0.1, 0.2, -0.3, 0.4, 0.5, 0.6;
  z.enc_fwd.bh << 0.0, 0.0, 0.0, 0.0, 0.1, -0.2;
  Matrix in = Matrix::Ones(2, 3);
  const auto e = encode(z, in);
  double h1[2], h2[2];
  for (int i = 0; i < 2; ++i) {
    const double r = sig(z.enc_fwd.bx[i]);
    const double u = sig(z.enc_fwd.bx[2 + i]);
    const double n = std::tanh(z.enc_fwd.bx[4 + i] + r * z.enc_fwd.bh[4 + i]);
    h1[i] = (1 - u) * n;
    h2[i] = (1 - u) * n + u * h1[i];
  }
  EXPECT_NEAR(e.annotations(0, 0), h1[0], 1e-15);
  EXPECT_NEAR(e.annotations(0, 1), h1[1], 1e-15);
  EXPECT_NEAR(e.annotations(1, 0), h2[0], 1e-15);
  EXPECT_NEAR(e.annotations(1, 1), h2[1], 1e-15);
  EXPECT_EQ(e.annotations.rightCols(2).cwiseAbs().maxCoeff(), 0.0);
}

TEST(Encode, ReversalSwapsDirections) {
  auto p = make_params(10, 3, 2, 4);
  p.enc_bwd = p.enc_fwd;
  Matrix in(3, 3);
  for (int i = 0; i < 3; ++i) in.row(i) = p.embedding.row(5 + i);
  const Matrix rev = in.colwise().reverse();
  const auto a = encode(p, in);
  const auto b = encode(p, rev);
  for (int i = 0; i < 3; ++i) {
    EXPECT_LT((a.annotations.row(i).head(2) - b.annotations.row(2 - i).tail(2)).cwiseAbs().maxCoeff(), 1e-15);
    EXPECT_LT((a.annotations.row(i).tail(2) - b.annotations.row(2 - i).head(2)).cwiseAbs().maxCoeff(), 1e-15);
  }
}

TEST(DecodeStep, AttentionEdgeCases) {
  const auto p = make_params(10, 3, 2, 5);
  Matrix one(1, 3);
  one.row(0) = p.embedding.row(6);
  const auto e1 = encode(p, one);
  EXPECT_EQ(decode_step(p, embed(kBos, p.embedding), e1.init_state, e1).attention[0], 1.0);

  auto enc = e1;
  enc.annotations = Matrix(3, 4);
  for (int i = 0; i < 3; ++i) enc.annotations.row(i) = e1.annotations.row(0);
  enc.keys = enc.annotations * p.att_annot.transpose();
  const auto out = decode_step(p, embed(kBos, p.embedding), e1.init_state, enc);
  for (int i = 0; i < 3; ++i) EXPECT_NEAR(out.attention[i], 1.0 / 3.0, 1e-15);
  EXPECT_NEAR(out.probs.sum(), 1.0, 1e-12);
}

TEST(Forward, MatchesScriptedTrace) {
  Rng rng(6);
  for (int trial = 0; trial < 20; ++trial) {
    const auto p = make_params(9, 2, 2, 100 + trial, 0.9);
    const auto s = testing::random_sample(rng, 9, trial < 10 ? 2 : 5, 4);
    const auto trace = forward(p, s);
    const auto want = scripted_logits(p, s);
    ASSERT_EQ(trace.outputs.size(), s.response.size());
    for (std::size_t j = 0; j < want.size(); ++j)
      for (std::size_t v = 0; v < want[j].size(); ++v) EXPECT_NEAR(trace.outputs[j].logits[v], want[j][v], 1e-12);
  }
}

TEST(Forward, PlanHandling) {
  const auto p = make_params(10, 3, 2, 7);
  const DialogueSample s{{5, 6}, {7, 8, kEos}};
  const auto plain = forward(p, s);
  const auto empty = forward(p, s, AugmentationPlan{});
  for (std::size_t j = 0; j < 3; ++j) EXPECT_TRUE(plain.outputs[j].logits == empty.outputs[j].logits);

  const AugmentationPlan plan{{{0, {{{5, 1.0}, {9, 0.5}}}}}, {}};
  const auto fused = forward(p, s, plan);
  EXPECT_FALSE(fused.outputs[0].logits == plain.outputs[0].logits);

  const DialogueSample single{{5}, {kEos}};
  EXPECT_EQ(forward(p, single).outputs.size(), 1u);

  const AugmentationPlan resp{{}, {{1, {{{8, 1.0}, {9, 0.5}}}}}};
  const auto in = teacher_forced_inputs(s, resp);
  ASSERT_EQ(in.decoder.size(), 3u);
  EXPECT_EQ(in.decoder[0], MixedToken::plain(kBos));
  EXPECT_EQ(in.decoder[1], MixedToken::plain(7));
  EXPECT_EQ(in.decoder[2].terms.size(), 2u);
}

TEST(Backward, AllBlocksMatchFiniteDifferences) {
  Rng rng(21);
  for (int trial = 0; trial < 5; ++trial) {
    const auto p = make_params(12, 4, 4, 300 + trial);
    const auto s = testing::random_sample(rng, 12, 5, 5);
    const auto plan = testing::random_plan(rng, s, 12, 3);
    for (const auto& b : testing::gradient_check(p, s, plan)) EXPECT_LT(b.max_rel_error, 1e-4) << b.name;
  }
}

TEST(Backward, UnreachedRowsAndDegenerateSets) {
  const auto p = make_params(12, 4, 3, 8);
  const DialogueSample s{{5, 6}, {7, kEos}};
  const auto g = testing::analytic_gradient(p, s, {});
  for (TokenId t : {8, 9, 10, 11, int{kPad}}) EXPECT_EQ(g.embedding.row(t).cwiseAbs().maxCoeff(), 0.0) << t;

  const AugmentationPlan degenerate{{{0, SoftWordSet::singleton(5)}}, {{0, SoftWordSet::singleton(7)}}};
  const auto gd = testing::analytic_gradient(p, s, degenerate);
  EXPECT_TRUE(gd.embedding == g.embedding);
}

TEST(Beam, GreedyWhenSizeOne) {
  const auto p = make_params(8, 3, 3, 9, 1.5);
  const TokenSeq history{5, 6, 7};
  const auto res = beam_search(p, history, 1, 6);
  Matrix in(3, 3);
  for (int i = 0; i < 3; ++i) in.row(i) = p.embedding.row(history[i]);
  const auto enc = encode(p, in);
  Vector state = enc.init_state;
  TokenId prev = kBos;
  TokenSeq greedy;
  double score = 0;
  for (int step = 0; step < 6; ++step) {
    const auto out = decode_step(p, embed(prev, p.embedding), state, enc);
    Eigen::Index best;
    out.log_probs.maxCoeff(&best);
    score += out.log_probs[best];
    if (best == kEos) break;
    greedy.push_back(static_cast<TokenId>(best));
    prev = static_cast<TokenId>(best);
    state = out.state;
  }
  EXPECT_EQ(res.tokens, greedy);
  EXPECT_NEAR(res.score, score, 1e-12);
}

TEST(Beam, ExhaustiveEquivalence) {
  Rng rng(31);
  for (int trial = 0; trial < 50; ++trial) {
    const auto p = make_params(6, 3, 3, 500 + trial, 1.5);
    const TokenSeq history{5, static_cast<TokenId>(rng.below(6)), 5};
    const auto brute = testing::brute_force_decode(p, history, 3);
    const auto beam = beam_search(p, history, 216, 3);
    EXPECT_TRUE(beam.completed);
    EXPECT_EQ(beam.tokens, brute.tokens) << "trial " << trial;
    EXPECT_NEAR(beam.score, brute.score, 1e-12);
    EXPECT_EQ(beam_search(p, history, 216, 3).tokens, beam.tokens);
  }
}

}  // namespace
}  // namespace softaug
