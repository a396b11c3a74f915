#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>

#include "softaug/corpus.hpp"
#include "softaug/neighbors.hpp"
#include "softaug/seq2seq.hpp"
#include "softaug/training.hpp"

namespace softaug {

inline constexpr const char* kArtifactVersion = "softaug-0.1.0";

// Everything needed to reproduce a run. Contains no timestamps, so identical
// inputs serialize identically.
struct RunManifest {
  std::string command;
  std::map<std::string, std::string> config;
  std::uint64_t seed = 0;
  std::uint64_t vocab_hash = 0;
  std::map<std::string, std::string> inputs;   // role -> path
  std::string mode;
  std::string version = kArtifactVersion;
  std::string output_dir;
  std::map<std::string, std::string> results;  // digests, counters

  std::string to_json() const;
  static RunManifest from_json(const std::string& text);  // throws ConfigError
  bool operator==(const RunManifest&) const = default;
};

// Binary container, little-endian:
//   "SOFTAUG\0" | u32 version | u32 section count
//   then sections: 4-byte tag | u64 payload length | payload
// Sections: VOCB (always), NBRM, S2SP, ADAM (optional), MNFT (JSON, last).
struct Checkpoint {
  Vocabulary vocab;
  std::optional<NeighborModel> neighbors;
  std::optional<Seq2SeqParams> model;
  std::optional<AdamState> adam;
  RunManifest manifest;
};

inline constexpr std::uint32_t kCheckpointVersion = 1;

std::string encode_checkpoint(const Checkpoint& ckpt);
// Validates magic, version, section lengths, block shapes against the stored
// dimensions, and the vocabulary hash against the manifest and, if given,
// `expected_vocab_hash`. Throws ConfigError on any mismatch.
Checkpoint decode_checkpoint(const std::string& bytes,
                             std::optional<std::uint64_t> expected_vocab_hash = std::nullopt);

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path,
                           std::optional<std::uint64_t> expected_vocab_hash = std::nullopt);

}  // namespace softaug
