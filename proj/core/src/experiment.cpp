#include "softaug/experiment.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "softaug/augment.hpp"
#include "softaug/rng.hpp"

namespace softaug {

namespace fs = std::filesystem;

namespace {

std::string hex64(std::uint64_t v) {
  char buf[24];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw std::runtime_error("cannot create directory " + dir.string() + ": " + ec.message());
}

std::vector<DialogueRecord> load_optional(const std::optional<fs::path>& path) {
  return path ? load_records(*path) : std::vector<DialogueRecord>{};
}

RunManifest base_manifest(const std::string& command, const RunConfig& config, const Vocabulary& vocab,
                          const fs::path& out_dir) {
  RunManifest m;
  m.command = command;
  m.config = config.to_map();
  m.seed = config.seed;
  m.vocab_hash = vocab.hash();
  m.mode = std::string(to_string(config.mode));
  m.output_dir = out_dir.string();
  return m;
}

void add_corpus_inputs(RunManifest& m, const CorpusPaths& corpus) {
  m.inputs["train"] = corpus.train.string();
  if (corpus.valid) m.inputs["valid"] = corpus.valid->string();
  if (corpus.test) m.inputs["test"] = corpus.test->string();
}

NeighborModel load_neighbors(const fs::path& path, const Vocabulary& vocab) {
  Checkpoint ckpt = load_checkpoint(path, vocab.hash());
  if (!ckpt.neighbors) throw ConfigError(path.string() + " does not contain a neighbor model");
  return std::move(*ckpt.neighbors);
}

}  // namespace

PreparedData prepare_data(const std::vector<DialogueRecord>& train, const std::vector<DialogueRecord>& valid,
                          const std::vector<DialogueRecord>& test, int min_count) {
  PreparedData d;
  d.vocab = build_vocab(train, min_count);
  d.train = encode_corpus(train, d.vocab, SplitTag::kTrain);
  d.valid = encode_corpus(valid, d.vocab, SplitTag::kValid);
  d.test = encode_corpus(test, d.vocab, SplitTag::kTest);
  return d;
}

NeighborModel train_neighbor_model(const PreparedData& data, const RunConfig& config) {
  return train_cbow(data.train, data.vocab.size(), config.cbow_config());
}

std::vector<std::string> generate_responses(const Seq2SeqParams& params, const Vocabulary& vocab,
                                            const CorpusSplit& split, int beam, int max_len) {
  std::vector<std::string> out;
  out.reserve(split.size());
  for (const auto& s : split.samples) out.push_back(detokenize(beam_search(params, s.history, beam, max_len).tokens, vocab));
  return out;
}

std::vector<Sentence> reference_sentences(const std::vector<DialogueRecord>& records) {
  std::vector<Sentence> out;
  out.reserve(records.size());
  for (const auto& r : records) out.push_back(tokenize(r.response));
  return out;
}

std::vector<Sentence> split_sentences(const std::vector<std::string>& lines) {
  std::vector<Sentence> out;
  out.reserve(lines.size());
  for (const auto& l : lines) out.push_back(tokenize(l));
  return out;
}

RunOutcome run_experiment(const PreparedData& data, const std::vector<DialogueRecord>& test_records,
                          const NeighborModel* neighbors, const RunConfig& config) {
  config.validate();
  if (data.test.empty()) throw ConfigError("a test split is required for evaluation");
  RunOutcome out;
  TrainInputs in{data.train, data.valid.empty() ? nullptr : &data.valid, data.vocab, neighbors,
                 config.dims(data.vocab.size())};
  out.training = train(in, config.train_config());
  out.generated = generate_responses(out.training.params, data.vocab, data.test, config.beam, config.max_len);
  out.metrics = evaluate(split_sentences(out.generated), reference_sentences(test_records),
                         perplexity(out.training.params, data.test));
  return out;
}

std::string sweep_csv(const std::vector<SweepRow>& rows) {
  std::string out = "rho,bleu,dist2,sen2\n";
  for (const auto& r : rows) {
    out += num(r.rho) + "," + num(r.metrics.bleu) + "," + num(r.metrics.dist[1]) + "," + num(r.metrics.sen[1]) + "\n";
  }
  return out;
}

std::string ablation_table(const std::vector<AblationRow>& rows) {
  std::string out;
  char buf[256];
  std::snprintf(buf, sizeof buf, "%-16s %9s %8s %8s %8s %8s %8s  %s\n", "mode", "PPL", "BLEU", "N-4", "Ent",
                "Dist", "Sen", "plans");
  out += buf;
  for (const auto& r : rows) {
    const auto& m = r.metrics;
    const double ent = (m.ent[0] + m.ent[1] + m.ent[2]) / 3.0;
    const double dist = (m.dist[0] + m.dist[1] + m.dist[2]) / 3.0;
    const double sen = (m.sen[0] + m.sen[1] + m.sen[2]) / 3.0;
    std::snprintf(buf, sizeof buf, "%-16s %9.3f %8.3f %8.3f %8.3f %8.3f %8.3f  %s H=%ld R=%ld\n",
                  std::string(to_string(r.mode)).c_str(), m.ppl, 100.0 * m.bleu, m.nist4, ent, 100.0 * dist,
                  100.0 * sen, hex64(r.plan_digest).c_str(), r.history_targets, r.response_targets);
    out += buf;
  }
  return out;
}

Checkpoint cmd_train_neighbors(const RunConfig& config, const fs::path& corpus, const fs::path& out_dir) {
  config.validate();
  const auto records = load_records(corpus);
  const Vocabulary vocab = build_vocab(records, config.min_count);
  const CorpusSplit split = encode_corpus(records, vocab, SplitTag::kTrain);

  Checkpoint ckpt;
  ckpt.vocab = vocab;
  ckpt.neighbors = train_cbow(split, vocab.size(), config.cbow_config());
  ckpt.manifest = base_manifest("train-neighbors", config, vocab, out_dir);
  ckpt.manifest.inputs["train"] = corpus.string();
  ckpt.manifest.results["trained_epochs"] = std::to_string(ckpt.neighbors->trained_epochs);
  if (!ckpt.neighbors->epoch_losses.empty()) {
    ckpt.manifest.results["first_epoch_loss"] = num(ckpt.neighbors->epoch_losses.front());
    ckpt.manifest.results["last_epoch_loss"] = num(ckpt.neighbors->epoch_losses.back());
  }

  ensure_dir(out_dir);
  save_checkpoint(out_dir / "neighbors.ckpt", ckpt);
  write_text(out_dir / "manifest.json", ckpt.manifest.to_json() + "\n");
  return ckpt;
}

Checkpoint cmd_train(const RunConfig& config, const CorpusPaths& corpus, const std::optional<fs::path>& neighbor_ckpt,
                     const fs::path& out_dir, const std::optional<fs::path>& init_vectors) {
  config.validate();
  if (uses_augmentation(config.mode) && !neighbor_ckpt) {
    throw ConfigError("mode " + std::string(to_string(config.mode)) + " requires --neighbors <checkpoint>");
  }
  const auto train_records = load_records(corpus.train);
  const auto valid_records = load_optional(corpus.valid);
  const PreparedData data = prepare_data(train_records, valid_records, {}, config.min_count);

  std::optional<NeighborModel> neighbors;
  if (neighbor_ckpt && uses_augmentation(config.mode)) neighbors = load_neighbors(*neighbor_ckpt, data.vocab);

  std::optional<Matrix> embedding;
  if (init_vectors) {
    Rng rng = Rng::stream(config.seed, "embedding-import");
    embedding = import_vectors(*init_vectors, data.vocab, config.d, rng, 0.08);
  }

  TrainInputs in{data.train, data.valid.empty() ? nullptr : &data.valid, data.vocab,
                 neighbors ? &*neighbors : nullptr, config.dims(data.vocab.size()),
                 embedding ? &*embedding : nullptr};
  TrainResult result = train(in, config.train_config());

  Checkpoint ckpt;
  ckpt.vocab = data.vocab;
  ckpt.model = std::move(result.params);
  ckpt.adam = std::move(result.adam);
  ckpt.manifest = base_manifest("train", config, data.vocab, out_dir);
  add_corpus_inputs(ckpt.manifest, corpus);
  if (neighbor_ckpt) ckpt.manifest.inputs["neighbors"] = neighbor_ckpt->string();
  if (init_vectors) ckpt.manifest.inputs["vectors"] = init_vectors->string();
  auto& res = ckpt.manifest.results;
  res["best_epoch"] = std::to_string(result.best_epoch);
  res["steps"] = std::to_string(result.step_augmented.size());
  res["augmented_steps"] = result.epochs.empty() ? "0" : std::to_string(result.epochs.back().augmented_steps);
  res["plan_digest"] = hex64(result.plan_digest);
  res["history_targets"] = std::to_string(result.history_targets);
  res["response_targets"] = std::to_string(result.response_targets);

  ensure_dir(out_dir);
  save_checkpoint(out_dir / "model.ckpt", ckpt);
  write_training_log(out_dir / "train_log.csv", result.epochs);
  write_text(out_dir / "manifest.json", ckpt.manifest.to_json() + "\n");
  return ckpt;
}

std::vector<std::string> cmd_generate(const fs::path& model_ckpt, const fs::path& corpus, int beam, int max_len,
                                      const fs::path& out_file) {
  if (beam < 1) throw ConfigError("beam must be >= 1");
  if (max_len < 1) throw ConfigError("max_len must be >= 1");
  const Checkpoint ckpt = load_checkpoint(model_ckpt);
  if (!ckpt.model) throw ConfigError(model_ckpt.string() + " does not contain a dialogue model");
  const CorpusSplit split = load_corpus(corpus, ckpt.vocab, SplitTag::kTest);
  auto responses = generate_responses(*ckpt.model, ckpt.vocab, split, beam, max_len);
  save_generated(out_file, responses);
  return responses;
}

MetricsReport cmd_evaluate(const fs::path& responses, const fs::path& corpus, const std::optional<fs::path>& model_ckpt,
                           const std::optional<fs::path>& out_json) {
  const auto lines = load_generated(responses);
  if (lines.empty()) throw ConfigError(responses.string() + " is empty");
  const auto records = load_records(corpus);
  if (records.size() != lines.size()) {
    throw ConfigError("responses file has " + std::to_string(lines.size()) + " lines but the corpus has " +
                      std::to_string(records.size()) + " records");
  }
  double ppl = std::nan("");
  if (model_ckpt) {
    const Checkpoint ckpt = load_checkpoint(*model_ckpt);
    if (!ckpt.model) throw ConfigError(model_ckpt->string() + " does not contain a dialogue model");
    ppl = perplexity(*ckpt.model, encode_corpus(records, ckpt.vocab, SplitTag::kTest));
  }
  MetricsReport report = evaluate(split_sentences(lines), reference_sentences(records), ppl);
  if (out_json) write_text(*out_json, report.to_json() + "\n");
  return report;
}

std::string cmd_augment_preview(const fs::path& neighbor_ckpt, const fs::path& corpus, const RunConfig& config,
                                std::size_t n_samples) {
  config.validate();
  const Checkpoint ckpt = load_checkpoint(neighbor_ckpt);
  if (!ckpt.neighbors) throw ConfigError(neighbor_ckpt.string() + " does not contain a neighbor model");
  const CorpusSplit split = load_corpus(corpus, ckpt.vocab, SplitTag::kTest);
  const EligibilityMask eligible(ckpt.vocab);
  const NeighborIndex index(*ckpt.neighbors, config.k, config.tau);

  std::ostringstream out;
  out << "# rho=" << num(config.rho) << " tau=" << num(config.tau) << " k=" << config.k << " seed=" << config.seed
      << '\n';
  const std::size_t n = std::min(n_samples, split.size());
  for (std::size_t i = 0; i < n; ++i) {
    Rng rng = Rng::stream(config.seed, "preview", i);
    const auto plan = make_plan(split.samples[i], eligible, index, config.rho, rng);
    out << "sample " << (i + 1) << '\n' << describe_plan(split.samples[i], plan, ckpt.vocab);
  }
  return out.str();
}

namespace {

struct ExperimentInputs {
  std::vector<DialogueRecord> train;
  std::vector<DialogueRecord> valid;
  std::vector<DialogueRecord> test;
  PreparedData data;
  NeighborModel neighbors;
};

ExperimentInputs load_experiment(const RunConfig& config, const CorpusPaths& corpus,
                                 const std::optional<fs::path>& neighbor_ckpt) {
  config.validate();
  if (!corpus.test) throw ConfigError("a --test corpus is required");
  ExperimentInputs e;
  e.train = load_records(corpus.train);
  e.valid = load_optional(corpus.valid);
  e.test = load_records(*corpus.test);
  e.data = prepare_data(e.train, e.valid, e.test, config.min_count);
  e.neighbors = neighbor_ckpt ? load_neighbors(*neighbor_ckpt, e.data.vocab) : train_neighbor_model(e.data, config);
  return e;
}

}  // namespace

std::vector<SweepRow> cmd_sweep_rho(const RunConfig& config, const CorpusPaths& corpus,
                                    const std::optional<fs::path>& neighbor_ckpt, const std::vector<double>& rhos,
                                    const fs::path& out_dir) {
  if (rhos.empty()) throw ConfigError("empty rho list");
  const ExperimentInputs e = load_experiment(config, corpus, neighbor_ckpt);

  RunManifest manifest = base_manifest("sweep-rho", config, e.data.vocab, out_dir);
  manifest.mode = "EA";
  add_corpus_inputs(manifest, corpus);
  if (neighbor_ckpt) manifest.inputs["neighbors"] = neighbor_ckpt->string();

  std::vector<SweepRow> rows;
  for (double rho : rhos) {
    RunConfig c = config;
    c.mode = TrainMode::kEA;
    c.rho = rho;
    auto outcome = run_experiment(e.data, e.test, &e.neighbors, c);
    rows.push_back({rho, outcome.metrics});
    manifest.results["plan_digest.rho=" + num(rho)] = hex64(outcome.training.plan_digest);
  }

  ensure_dir(out_dir);
  write_text(out_dir / "sweep.csv", sweep_csv(rows));
  write_text(out_dir / "manifest.json", manifest.to_json() + "\n");
  return rows;
}

std::vector<AblationRow> cmd_ablation(const RunConfig& config, const CorpusPaths& corpus,
                                      const std::optional<fs::path>& neighbor_ckpt, const fs::path& out_dir) {
  const ExperimentInputs e = load_experiment(config, corpus, neighbor_ckpt);

  RunManifest manifest = base_manifest("ablation", config, e.data.vocab, out_dir);
  manifest.mode = "all";
  add_corpus_inputs(manifest, corpus);
  if (neighbor_ckpt) manifest.inputs["neighbors"] = neighbor_ckpt->string();

  std::vector<AblationRow> rows;
  std::string csv = "mode,ppl,bleu,nist4,ent1,ent2,ent3,dist1,dist2,dist3,sen1,sen2,sen3,avg_len,plan_digest,"
                    "history_targets,response_targets\n";
  for (auto mode : {TrainMode::kEA, TrainMode::kBaseline, TrainMode::kRep, TrainMode::kNoSoftLabel,
                    TrainMode::kNoHistoryAug}) {
    RunConfig c = config;
    c.mode = mode;
    auto outcome = run_experiment(e.data, e.test, &e.neighbors, c);
    const auto& t = outcome.training;
    rows.push_back({mode, outcome.metrics, t.plan_digest, t.history_targets, t.response_targets});

    const std::string name(to_string(mode));
    manifest.results["plan_digest." + name] = hex64(t.plan_digest);
    manifest.results["history_targets." + name] = std::to_string(t.history_targets);
    manifest.results["response_targets." + name] = std::to_string(t.response_targets);

    const auto& m = outcome.metrics;
    csv += name + "," + num(m.ppl) + "," + num(m.bleu) + "," + num(m.nist4);
    for (double v : m.ent) csv += "," + num(v);
    for (double v : m.dist) csv += "," + num(v);
    for (double v : m.sen) csv += "," + num(v);
    csv += "," + num(m.avg_len) + "," + hex64(t.plan_digest) + "," + std::to_string(t.history_targets) + "," +
           std::to_string(t.response_targets) + "\n";
  }

  ensure_dir(out_dir);
  write_text(out_dir / "ablation.txt", ablation_table(rows));
  write_text(out_dir / "ablation.csv", csv);
  write_text(out_dir / "manifest.json", manifest.to_json() + "\n");
  return rows;
}

}  // namespace softaug
