// softaug: train, decode and evaluate soft-embedding-augmented dialogue models.
//
// Exit codes: 0 success, 1 runtime failure, 2 usage or configuration error.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "softaug/checkpoint.hpp"
#include "softaug/config.hpp"
#include "softaug/experiment.hpp"
#include "softaug/neighbors.hpp"

namespace fs = std::filesystem;
using namespace softaug;

namespace {

struct ConfigOptions {
  std::string file;
  std::vector<std::string> overrides;

  void attach(CLI::App* cmd) {
    cmd->add_option("--config", file, "key = value configuration file");
    cmd->add_option("--set", overrides, "override one key, e.g. --set rho=0.5 (repeatable)");
  }

  RunConfig resolve() const {
    RunConfig c = file.empty() ? RunConfig{} : RunConfig::from_file(file);
    for (const auto& kv : overrides) {
      const auto eq = kv.find('=');
      if (eq == std::string::npos) throw ConfigError("--set expects key=value, got \"" + kv + "\"");
      c.set(kv.substr(0, eq), kv.substr(eq + 1));
    }
    c.validate();
    return c;
  }
};

std::optional<fs::path> opt_path(const std::string& s) {
  if (s.empty()) return std::nullopt;
  return fs::path(s);
}

std::vector<double> parse_rhos(const std::string& list) {
  std::vector<double> out;
  std::stringstream ss(list);
  std::string item;
  while (std::getline(ss, item, ',')) {
    RunConfig probe;
    probe.set("rho", item);
    out.push_back(probe.rho);
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Soft embedding augmentation for dialogue generation"};
  app.require_subcommand(1);

  std::string corpus, valid, test, out, neighbors, model, responses, vectors, rhos = "0,0.2,0.4,0.6,0.8";
  int beam = -1;
  int max_len = -1;
  std::size_t n_samples = 5;

  ConfigOptions cfg_nb, cfg_train, cfg_prev, cfg_sweep, cfg_abl;

  auto* nb = app.add_subcommand("train-neighbors", "train the CBOW semantic-neighbor model");
  nb->add_option("--corpus", corpus, "training corpus (JSONL)")->required();
  nb->add_option("--out", out, "output directory")->required();
  cfg_nb.attach(nb);

  auto* tr = app.add_subcommand("train", "train the dialogue model");
  tr->add_option("--corpus", corpus, "training corpus (JSONL)")->required();
  tr->add_option("--valid", valid, "validation corpus for model selection");
  tr->add_option("--neighbors", neighbors, "neighbor checkpoint (required unless mode=baseline)");
  tr->add_option("--vectors", vectors, "word2vec text file to initialize the embedding layer");
  tr->add_option("--out", out, "output directory")->required();
  cfg_train.attach(tr);

  auto* gen = app.add_subcommand("generate", "beam-search responses for a corpus");
  gen->add_option("--model", model, "model checkpoint")->required();
  gen->add_option("--corpus", corpus, "input corpus (JSONL)")->required();
  gen->add_option("--beam", beam, "beam size (default 3)");
  gen->add_option("--max-len", max_len, "maximum response length incl. EOS (default 20)");
  gen->add_option("--out", out, "responses file, one line per record")->required();

  auto* ev = app.add_subcommand("evaluate", "score generated responses");
  ev->add_option("--responses", responses, "responses file")->required();
  ev->add_option("--corpus", corpus, "reference corpus (JSONL)")->required();
  ev->add_option("--model", model, "model checkpoint, to report perplexity");
  ev->add_option("--out", out, "write the report as JSON here");

  auto* pv = app.add_subcommand("augment-preview", "print augmentation plans for a few samples");
  pv->add_option("--neighbors", neighbors, "neighbor checkpoint")->required();
  pv->add_option("--corpus", corpus, "corpus (JSONL)")->required();
  pv->add_option("--n-samples", n_samples, "number of samples");
  cfg_prev.attach(pv);

  auto* sw = app.add_subcommand("sweep-rho", "train EA models over a list of augmentation ratios");
  sw->add_option("--corpus", corpus, "training corpus")->required();
  sw->add_option("--valid", valid, "validation corpus");
  sw->add_option("--test", test, "test corpus")->required();
  sw->add_option("--neighbors", neighbors, "neighbor checkpoint (trained on the fly if absent)");
  sw->add_option("--rhos", rhos, "comma-separated ratios");
  sw->add_option("--out", out, "output directory")->required();
  cfg_sweep.attach(sw);

  auto* ab = app.add_subcommand("ablation", "compare EA, baseline, rep, no-soft-label and no-history-aug");
  ab->add_option("--corpus", corpus, "training corpus")->required();
  ab->add_option("--valid", valid, "validation corpus");
  ab->add_option("--test", test, "test corpus")->required();
  ab->add_option("--neighbors", neighbors, "neighbor checkpoint (trained on the fly if absent)");
  ab->add_option("--out", out, "output directory")->required();
  cfg_abl.attach(ab);

  auto* ex = app.add_subcommand("export-vectors", "write neighbor-model vectors in word2vec text format");
  ex->add_option("--neighbors", neighbors, "neighbor checkpoint")->required();
  ex->add_option("--out", out, "output file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (*nb) {
      const auto ckpt = cmd_train_neighbors(cfg_nb.resolve(), corpus, out);
      std::cout << "neighbor model: " << ckpt.vocab.size() << " tokens, " << ckpt.neighbors->trained_epochs
                << " epochs -> " << (fs::path(out) / "neighbors.ckpt").string() << '\n';
    } else if (*tr) {
      const RunConfig config = cfg_train.resolve();
      const auto ckpt =
          cmd_train(config, {corpus, opt_path(valid), std::nullopt}, opt_path(neighbors), out, opt_path(vectors));
      std::cout << "model: best epoch " << ckpt.manifest.results.at("best_epoch") << " -> "
                << (fs::path(out) / "model.ckpt").string() << '\n';
    } else if (*gen) {
      RunConfig defaults;
      const auto lines = cmd_generate(model, corpus, beam > 0 ? beam : defaults.beam,
                                      max_len > 0 ? max_len : defaults.max_len, out);
      std::cout << lines.size() << " responses -> " << out << '\n';
    } else if (*ev) {
      const auto report = cmd_evaluate(responses, corpus, opt_path(model), opt_path(out));
      std::cout << report.to_table();
    } else if (*pv) {
      std::cout << cmd_augment_preview(neighbors, corpus, cfg_prev.resolve(), n_samples);
    } else if (*sw) {
      const auto rows =
          cmd_sweep_rho(cfg_sweep.resolve(), {corpus, opt_path(valid), opt_path(test)}, opt_path(neighbors),
                        parse_rhos(rhos), out);
      std::cout << sweep_csv(rows);
    } else if (*ab) {
      const auto rows = cmd_ablation(cfg_abl.resolve(), {corpus, opt_path(valid), opt_path(test)},
                                     opt_path(neighbors), out);
      std::cout << ablation_table(rows);
    } else if (*ex) {
      const Checkpoint ckpt = load_checkpoint(neighbors);
      if (!ckpt.neighbors) throw ConfigError(neighbors + " does not contain a neighbor model");
      export_vectors(ckpt.neighbors->input, ckpt.vocab, out);
    }
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
