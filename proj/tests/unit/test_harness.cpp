#include <cstdlib>
#include <filesystem>

#include <gtest/gtest.h>
#include <json.hpp>

#include "softaug/checkpoint.hpp"
#include "softaug/config.hpp"
#include "softaug/experiment.hpp"
#include "softaug/toy_corpus.hpp"
#include "test_util.hpp"

namespace softaug {
namespace {

namespace fs = std::filesystem;

TEST(Config, SetParseAndRoundTrip) {
  RunConfig c;
  c.set("rho", "0.25");
  c.set("neighbor.dim", "12");
  c.set("mode", "no-history-aug");
  EXPECT_EQ(c.rho, 0.25);
  EXPECT_EQ(c.neighbor.dim, 12);
  EXPECT_EQ(c.mode, TrainMode::kNoHistoryAug);
  RunConfig d;
  for (const auto& [k, v] : c.to_map()) d.set(k, v);
  EXPECT_EQ(d.to_map(), c.to_map());
  EXPECT_EQ(c.cbow_config().seed, c.seed);
  EXPECT_THROW(c.set("learning_rate", "1"), ConfigError);
  EXPECT_THROW(c.set("k", "five"), ConfigError);
  EXPECT_THROW(c.set("epochs", "3x"), ConfigError);
}

TEST(Config, ValidateRanges) {
  RunConfig c;
  c.rho = 1.5;
  EXPECT_THROW(c.validate(), ConfigError);
  c = RunConfig{};
  c.beam = 0;
  EXPECT_THROW(c.validate(), ConfigError);
  c = RunConfig{};
  c.tau = -0.1;
  EXPECT_THROW(c.validate(), ConfigError);
}

TEST(Config, FileWithCommentsAndErrors) {
  test::TempDir dir;
  test::write_file(dir.path() / "a.cfg", "# run\nrho = 0.6   # ratio\n\nseed=7\nneighbor.window = 2\n");
  const auto c = RunConfig::from_file(dir.path() / "a.cfg");
  EXPECT_EQ(c.rho, 0.6);
  EXPECT_EQ(c.seed, 7u);
  EXPECT_EQ(c.neighbor.window, 2);
  test::write_file(dir.path() / "b.cfg", "rho = 0.6\nbogus line\n");
  try {
    RunConfig::from_file(dir.path() / "b.cfg");
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find(":2:"), std::string::npos) << e.what();
  }
  EXPECT_THROW(RunConfig::from_file(dir.path() / "missing.cfg"), ConfigError);
}

Checkpoint sample_checkpoint() {
  const auto records = make_toy_dialogues(40, 1);
  Checkpoint ck;
  ck.vocab = build_vocab(records, 1);
  Rng rng(1);
  ck.model = Seq2SeqParams::random({static_cast<int>(ck.vocab.size()), 3, 2}, rng);
  ck.adam = AdamState::zeros(ck.model->dims);
  ck.adam->step = 5;
  ck.adam->m.out_b[2] = 0.25;
  CbowConfig cc;
  cc.dim = 4;
  ck.neighbors = init_cbow(ck.vocab.size(), cc);
  ck.neighbors->epoch_losses = {1.5, 1.25};
  ck.neighbors->trained_epochs = 2;
  ck.manifest.command = "train";
  ck.manifest.vocab_hash = ck.vocab.hash();
  ck.manifest.config = {{"rho", "0.4"}};
  ck.manifest.results = {{"x", "1"}};
  return ck;
}

TEST(Checkpoint, RoundTripIsExact) {
  const auto ck = sample_checkpoint();
  const auto bytes = encode_checkpoint(ck);
  EXPECT_EQ(bytes.substr(0, 8), std::string("SOFTAUG\0", 8));
  const auto back = decode_checkpoint(bytes);
  EXPECT_EQ(encode_checkpoint(back), bytes);
  EXPECT_EQ(back.vocab.tokens(), ck.vocab.tokens());
  EXPECT_TRUE(back.model->embedding == ck.model->embedding);
  EXPECT_EQ(back.adam->step, 5);
  EXPECT_EQ(back.adam->m.out_b[2], 0.25);
  EXPECT_TRUE(back.neighbors->input == ck.neighbors->input);
  EXPECT_EQ(back.neighbors->epoch_losses, ck.neighbors->epoch_losses);
  EXPECT_EQ(back.manifest, ck.manifest);
}

TEST(Checkpoint, RejectsCorruptionAndForeignVocab) {
  const auto bytes = encode_checkpoint(sample_checkpoint());
  EXPECT_THROW(decode_checkpoint("NOTSOFT" + bytes.substr(7)), ConfigError);
  EXPECT_THROW(decode_checkpoint(bytes.substr(0, bytes.size() / 2)), ConfigError);
  EXPECT_THROW(decode_checkpoint(bytes, 12345u), ConfigError);
  auto bad = sample_checkpoint();
  bad.manifest.vocab_hash ^= 1;
  EXPECT_THROW(decode_checkpoint(encode_checkpoint(bad)), ConfigError);
}

TEST(Manifest, JsonRoundTrip) {
  RunManifest m;
  m.command = "ablation";
  m.seed = 1ull << 60;
  m.vocab_hash = 0xfedcba9876543210ull;
  m.inputs = {{"train", "a b/c.jsonl"}};
  m.results = {{"plan_digest.EA", "00ff"}};
  EXPECT_EQ(RunManifest::from_json(m.to_json()), m);
  EXPECT_THROW(RunManifest::from_json("{"), ConfigError);
}

struct ToyFiles {
  test::TempDir dir;
  fs::path train, valid, test;
  RunConfig config;
  ToyFiles() {
    const auto records = make_toy_dialogues(90, 2);
    train = dir.path() / "train.jsonl";
    valid = dir.path() / "valid.jsonl";
    test = dir.path() / "test.jsonl";
    save_records(train, {records.begin(), records.begin() + 70});
    save_records(valid, {records.begin() + 70, records.begin() + 80});
    save_records(test, {records.begin() + 80, records.end()});
    for (const char* kv : {"d=6", "hidden=6", "epochs=2", "batch_size=16", "neighbor.dim=8", "neighbor.epochs=3",
                           "tau=0.2", "beam=2", "max_len=6"}) {
      const std::string s = kv;
      config.set(s.substr(0, s.find('=')), s.substr(s.find('=') + 1));
    }
  }
};

TEST(Commands, TrainNeighborsAndReload) {
  ToyFiles f;
  const auto out = f.dir.path() / "nb";
  const auto ck = cmd_train_neighbors(f.config, f.train, out);
  EXPECT_TRUE(fs::exists(out / "neighbors.ckpt"));
  EXPECT_TRUE(fs::exists(out / "manifest.json"));
  const auto back = load_checkpoint(out / "neighbors.ckpt");
  for (TokenId t = kNumReserved; t < kNumReserved + 10; ++t)
    EXPECT_EQ(query_neighbors(*back.neighbors, t, 5, 0.0), query_neighbors(*ck.neighbors, t, 5, 0.0));
  EXPECT_THROW(cmd_train_neighbors(f.config, f.dir.path() / "missing.jsonl", out), ConfigError);
}

TEST(Commands, TrainGenerateEvaluate) {
  ToyFiles f;
  cmd_train_neighbors(f.config, f.train, f.dir.path() / "nb");
  const auto nb = f.dir.path() / "nb" / "neighbors.ckpt";
  EXPECT_THROW(cmd_train(f.config, {f.train, f.valid, {}}, std::nullopt, f.dir.path() / "m"), ConfigError);

  const auto ck = cmd_train(f.config, {f.train, f.valid, {}}, nb, f.dir.path() / "m");
  const auto log = test::read_file(f.dir.path() / "m" / "train_log.csv");
  EXPECT_EQ(std::count(log.begin(), log.end(), '\n'), 1 + f.config.epochs);

  auto base = f.config;
  base.mode = TrainMode::kBaseline;
  EXPECT_NO_THROW(cmd_train(base, {f.train, f.valid, {}}, std::nullopt, f.dir.path() / "b"));

  const auto model = f.dir.path() / "m" / "model.ckpt";
  const auto lines = cmd_generate(model, f.test, 2, 6, f.dir.path() / "gen.txt");
  EXPECT_EQ(lines.size(), load_records(f.test).size());
  cmd_generate(model, f.test, 2, 6, f.dir.path() / "gen2.txt");
  EXPECT_EQ(test::read_file(f.dir.path() / "gen.txt"), test::read_file(f.dir.path() / "gen2.txt"));

  // beam 1 against a hand-rolled greedy decode of the same checkpoint.
  cmd_generate(model, f.test, 1, 6, f.dir.path() / "g1.txt");
  const auto loaded = load_checkpoint(model);
  const auto split = load_corpus(f.test, loaded.vocab, SplitTag::kTest);
  std::vector<std::string> greedy;
  for (const auto& s : split.samples) {
    Matrix in(static_cast<Eigen::Index>(s.history.size()), loaded.model->dims.embed);
    for (std::size_t i = 0; i < s.history.size(); ++i)
      in.row(static_cast<Eigen::Index>(i)) = loaded.model->embedding.row(s.history[i]);
    const auto enc = encode(*loaded.model, in);
    Vector state = enc.init_state;
    TokenId prev = kBos;
    TokenSeq out;
    for (int step = 0; step < 6; ++step) {
      const auto o = decode_step(*loaded.model, embed(prev, loaded.model->embedding), state, enc);
      Eigen::Index best;
      o.log_probs.maxCoeff(&best);
      if (best == kEos) break;
      out.push_back(prev = static_cast<TokenId>(best));
      state = o.state;
    }
    greedy.push_back(detokenize(out, loaded.vocab));
  }
  EXPECT_EQ(load_generated(f.dir.path() / "g1.txt"), greedy);

  const auto report = cmd_evaluate(f.dir.path() / "gen.txt", f.test, model, f.dir.path() / "r.json");
  EXPECT_GE(report.ppl, 1.0);
  const auto j = nlohmann::json::parse(test::read_file(f.dir.path() / "r.json"));
  EXPECT_EQ(j.size(), 13u);

  test::write_file(f.dir.path() / "empty.txt", "");
  EXPECT_THROW(cmd_evaluate(f.dir.path() / "empty.txt", f.test, std::nullopt, std::nullopt), ConfigError);
  EXPECT_TRUE(std::isnan(cmd_evaluate(f.dir.path() / "gen.txt", f.test, std::nullopt, std::nullopt).ppl));
}

TEST(Commands, AugmentPreview) {
  ToyFiles f;
  cmd_train_neighbors(f.config, f.train, f.dir.path() / "nb");
  const auto nb = f.dir.path() / "nb" / "neighbors.ckpt";
  auto zero = f.config;
  zero.rho = 0.0;
  const auto none = cmd_augment_preview(nb, f.test, zero, 3);
  std::size_t count = 0;
  for (auto pos = none.find("no targets"); pos != std::string::npos; pos = none.find("no targets", pos + 1)) ++count;
  EXPECT_EQ(count, 3u);

  auto all = f.config;
  all.rho = 1.0;
  all.tau = 0.0;
  const auto text = cmd_augment_preview(nb, f.test, all, 3);
  for (const char* excluded : {"] ,", "] .", "] the", "] a\n", "] in\n", "] <sep>"})
    EXPECT_EQ(text.find(excluded), std::string::npos) << excluded;
  EXPECT_NE(text.find("p="), std::string::npos);
}

TEST(Commands, SweepAndAblation) {
  ToyFiles f;
  f.config.epochs = 1;
  const auto rows = cmd_sweep_rho(f.config, {f.train, f.valid, f.test}, std::nullopt, {0.0, 0.5}, f.dir.path() / "s");
  EXPECT_EQ(rows.size(), 2u);
  const auto csv = test::read_file(f.dir.path() / "s" / "sweep.csv");
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 3);
  cmd_sweep_rho(f.config, {f.train, f.valid, f.test}, std::nullopt, {0.0, 0.5}, f.dir.path() / "s");
  EXPECT_EQ(test::read_file(f.dir.path() / "s" / "sweep.csv"), csv);

  auto base = f.config;
  base.mode = TrainMode::kBaseline;
  const auto rho0 = run_experiment(
      prepare_data(load_records(f.train), load_records(f.valid), load_records(f.test), 1), load_records(f.test), nullptr,
      base);
  EXPECT_EQ(rows[0].metrics.bleu, rho0.metrics.bleu);
  EXPECT_EQ(rows[0].metrics.dist, rho0.metrics.dist);

  const auto ab = cmd_ablation(f.config, {f.train, f.valid, f.test}, std::nullopt, f.dir.path() / "a");
  ASSERT_EQ(ab.size(), 5u);
  EXPECT_EQ(ab[1].mode, TrainMode::kBaseline);
  EXPECT_EQ(ab[1].metrics.bleu, rho0.metrics.bleu);
  const auto manifest = RunManifest::from_json(test::read_file(f.dir.path() / "a" / "manifest.json"));
  EXPECT_EQ(manifest.seed, f.config.seed);
  EXPECT_EQ(manifest.results.at("plan_digest.EA"), manifest.results.at("plan_digest.no-soft-label"));
  EXPECT_EQ(manifest.results.at("history_targets.no-history-aug"), "0");
}

#ifdef SOFTAUG_CLI_PATH
int run_cli(const std::string& args) {
  const int status = std::system((std::string(SOFTAUG_CLI_PATH) + " " + args + " >/dev/null 2>&1").c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

TEST(Cli, ExitCodes) {
  ToyFiles f;
  const auto d = f.dir.path().string();
  EXPECT_EQ(run_cli(""), 2);
  EXPECT_EQ(run_cli("--help"), 0);
  EXPECT_EQ(run_cli("train-neighbors --corpus " + d + "/missing.jsonl --out " + d + "/nb"), 2);
  EXPECT_EQ(run_cli("train-neighbors --corpus " + f.train.string() + " --out " + d +
                    "/nb --set neighbor.dim=4 --set neighbor.epochs=1"),
            0);
  EXPECT_EQ(run_cli("train --corpus " + f.train.string() + " --out " + d + "/m"), 2);
  EXPECT_EQ(run_cli("train --corpus " + f.train.string() + " --out " + d + "/m --set rho=7"), 2);
  EXPECT_EQ(run_cli("train --corpus " + f.train.string() + " --out " + d + "/m --set nonsense=1"), 2);
  EXPECT_EQ(run_cli("evaluate --responses " + d + "/none.txt --corpus " + f.test.string()), 2);
  // An output path below a regular file cannot be created: a runtime failure.
  test::write_file(f.dir.path() / "file", "x");
  EXPECT_EQ(run_cli("train --corpus " + f.train.string() + " --out " + d +
                    "/file/sub --set mode=baseline --set d=4 --set hidden=4 --set epochs=1"),
            1);
}
#endif

}  // namespace
}  // namespace softaug
