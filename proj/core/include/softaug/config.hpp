#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>

#include "softaug/neighbors.hpp"
#include "softaug/seq2seq.hpp"
#include "softaug/training.hpp"

namespace softaug {

// Flat run configuration. Text form is one "key = value" per line, '#'
// starts a comment. Keys: rho tau k d hidden lr beta1 beta2 eps clip_norm
// batch_size epochs seed mode beam max_len min_count neighbor.dim
// neighbor.window neighbor.epochs neighbor.negatives neighbor.lr
struct RunConfig {
  double rho = 0.4;
  double tau = 0.4;
  int k = 5;
  int d = 300;
  int hidden = 300;
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double clip_norm = 5.0;
  int batch_size = 32;
  int epochs = 30;
  std::uint64_t seed = 1;
  TrainMode mode = TrainMode::kEA;
  int beam = 3;
  int max_len = 20;
  int min_count = 1;
  CbowConfig neighbor;  // its seed follows `seed`

  // Throws ConfigError for unknown keys or unparsable values.
  void set(std::string_view key, std::string_view value);
  void validate() const;

  static RunConfig from_file(const std::filesystem::path& path);
  // Every key with its canonical text value (round-trips through set()).
  std::map<std::string, std::string> to_map() const;

  TrainConfig train_config() const;
  CbowConfig cbow_config() const;
  ModelDims dims(std::size_t vocab_size) const;
};

}  // namespace softaug
