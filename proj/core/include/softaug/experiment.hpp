#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "softaug/checkpoint.hpp"
#include "softaug/config.hpp"
#include "softaug/corpus.hpp"
#include "softaug/metrics.hpp"
#include "softaug/neighbors.hpp"
#include "softaug/training.hpp"

namespace softaug {

// Train/valid/test splits encoded against the training vocabulary.
struct PreparedData {
  Vocabulary vocab;
  CorpusSplit train;
  CorpusSplit valid;
  CorpusSplit test;
};

PreparedData prepare_data(const std::vector<DialogueRecord>& train, const std::vector<DialogueRecord>& valid,
                          const std::vector<DialogueRecord>& test, int min_count);

NeighborModel train_neighbor_model(const PreparedData& data, const RunConfig& config);

// Beam-search responses for every sample of `split`, detokenized.
std::vector<std::string> generate_responses(const Seq2SeqParams& params, const Vocabulary& vocab,
                                            const CorpusSplit& split, int beam, int max_len);

std::vector<Sentence> reference_sentences(const std::vector<DialogueRecord>& records);
std::vector<Sentence> split_sentences(const std::vector<std::string>& lines);

struct RunOutcome {
  TrainResult training;
  std::vector<std::string> generated;  // for the test split
  MetricsReport metrics;               // on the test split; ppl = test PPL
};

// Train with `config`, decode the test split, evaluate against its references.
RunOutcome run_experiment(const PreparedData& data, const std::vector<DialogueRecord>& test_records,
                          const NeighborModel* neighbors, const RunConfig& config);

struct SweepRow {
  double rho;
  MetricsReport metrics;
};
std::string sweep_csv(const std::vector<SweepRow>& rows);

struct AblationRow {
  TrainMode mode;
  MetricsReport metrics;
  std::uint64_t plan_digest;
  long history_targets;
  long response_targets;
};
std::string ablation_table(const std::vector<AblationRow>& rows);

// ---- Subcommands. They throw ConfigError for usage/config problems and
// other exceptions for runtime failures.

struct CorpusPaths {
  std::filesystem::path train;
  std::optional<std::filesystem::path> valid;
  std::optional<std::filesystem::path> test;
};

// Writes <out>/neighbors.ckpt and <out>/manifest.json.
Checkpoint cmd_train_neighbors(const RunConfig& config, const std::filesystem::path& corpus,
                               const std::filesystem::path& out_dir);

// Writes <out>/model.ckpt, <out>/train_log.csv, <out>/manifest.json.
// A neighbor checkpoint is required unless mode is baseline.
Checkpoint cmd_train(const RunConfig& config, const CorpusPaths& corpus,
                     const std::optional<std::filesystem::path>& neighbor_ckpt, const std::filesystem::path& out_dir,
                     const std::optional<std::filesystem::path>& init_vectors = std::nullopt);

// One line per corpus record.
std::vector<std::string> cmd_generate(const std::filesystem::path& model_ckpt, const std::filesystem::path& corpus,
                                      int beam, int max_len, const std::filesystem::path& out_file);

// PPL is reported when a model checkpoint is given, otherwise null.
MetricsReport cmd_evaluate(const std::filesystem::path& responses, const std::filesystem::path& corpus,
                           const std::optional<std::filesystem::path>& model_ckpt,
                           const std::optional<std::filesystem::path>& out_json);

std::string cmd_augment_preview(const std::filesystem::path& neighbor_ckpt, const std::filesystem::path& corpus,
                                const RunConfig& config, std::size_t n_samples);

// Trains one EA model per rho; writes <out>/sweep.csv and <out>/manifest.json.
std::vector<SweepRow> cmd_sweep_rho(const RunConfig& config, const CorpusPaths& corpus,
                                    const std::optional<std::filesystem::path>& neighbor_ckpt,
                                    const std::vector<double>& rhos, const std::filesystem::path& out_dir);

// One run per mode (EA, baseline, rep, no-soft-label, no-history-aug) from
// the same seed; writes <out>/ablation.txt, <out>/ablation.csv and
// <out>/manifest.json with per-mode plan digests.
std::vector<AblationRow> cmd_ablation(const RunConfig& config, const CorpusPaths& corpus,
                                      const std::optional<std::filesystem::path>& neighbor_ckpt,
                                      const std::filesystem::path& out_dir);

}  // namespace softaug
