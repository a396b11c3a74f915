#include <benchmark/benchmark.h>

#include "softaug/metrics.hpp"
#include "softaug/neighbors.hpp"
#include "softaug/seq2seq.hpp"
#include "softaug/toy_corpus.hpp"
#include "softaug/training.hpp"

namespace {

using namespace softaug;

DialogueSample sample_of(int history, int response) {
  DialogueSample s;
  for (int i = 0; i < history; ++i) s.history.push_back(static_cast<TokenId>(kNumReserved + i % 50));
  for (int i = 0; i < response; ++i) s.response.push_back(static_cast<TokenId>(kNumReserved + (7 * i) % 50));
  s.response.push_back(kEos);
  return s;
}

void BM_ForwardBackward(benchmark::State& state) {
  const int h = static_cast<int>(state.range(0));
  Rng rng(1);
  const auto params = Seq2SeqParams::random({200, 32, h}, rng);
  auto grad = Seq2SeqParams::zeros(params.dims);
  const auto s = sample_of(20, 12);
  const AugmentationPlan plan{{{3, {{{8, 1.0}, {9, 0.7}, {10, 0.5}}}}}, {{2, {{{19, 1.0}, {20, 0.6}}}}}};
  const auto labels = step_labels(s, plan, true);
  for (auto _ : state) {
    const auto trace = forward(params, s, plan);
    std::vector<Vector> dz;
    for (std::size_t j = 0; j < labels.size(); ++j) dz.push_back(logit_gradient(trace.outputs[j].probs, labels[j]));
    backward(params, trace, dz, grad);
    benchmark::DoNotOptimize(grad.out_b.data());
  }
}
BENCHMARK(BM_ForwardBackward)->Arg(32)->Arg(64)->Arg(128);

void BM_BeamSearch(benchmark::State& state) {
  Rng rng(2);
  const auto params = Seq2SeqParams::random({200, 32, 64}, rng);
  const auto s = sample_of(20, 1);
  for (auto _ : state) benchmark::DoNotOptimize(beam_search(params, s.history, static_cast<int>(state.range(0)), 20));
}
BENCHMARK(BM_BeamSearch)->Arg(1)->Arg(3)->Arg(10);

void BM_CbowEpoch(benchmark::State& state) {
  const auto records = make_toy_dialogues(2000, 1);
  const auto vocab = build_vocab(records, 1);
  const auto split = encode_corpus(records, vocab, SplitTag::kTrain);
  CbowConfig cfg;
  cfg.dim = 32;
  cfg.epochs = 1;
  for (auto _ : state) benchmark::DoNotOptimize(train_cbow(split, vocab.size(), cfg).input.data());
}
BENCHMARK(BM_CbowEpoch)->Unit(benchmark::kMillisecond);

void BM_NeighborQuery(benchmark::State& state) {
  NeighborModel m;
  Rng rng(3);
  m.input = Matrix(static_cast<Eigen::Index>(state.range(0)), 100);
  for (Eigen::Index i = 0; i < m.input.size(); ++i) m.input.data()[i] = rng.uniform(-1, 1);
  TokenId t = kNumReserved;
  for (auto _ : state) {
    benchmark::DoNotOptimize(query_neighbors(m, t, 5, 0.0));
    t = t + 1 < m.input.rows() ? t + 1 : kNumReserved;
  }
}
BENCHMARK(BM_NeighborQuery)->Arg(1000)->Arg(20000);

void BM_Metrics(benchmark::State& state) {
  const auto records = make_toy_dialogues(static_cast<std::size_t>(state.range(0)), 4);
  std::vector<Sentence> cands, refs;
  for (std::size_t i = 0; i < records.size(); ++i) {
    refs.push_back(tokenize(records[i].response));
    cands.push_back(tokenize(records[(i + 1) % records.size()].response));
  }
  for (auto _ : state) benchmark::DoNotOptimize(evaluate(cands, refs, 1.0));
}
BENCHMARK(BM_Metrics)->Arg(200)->Arg(2000)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
