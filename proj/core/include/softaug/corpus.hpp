#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "softaug/types.hpp"

namespace softaug {

inline constexpr TokenId kPad = 0;
inline constexpr TokenId kBos = 1;
inline constexpr TokenId kEos = 2;
inline constexpr TokenId kSep = 3;
inline constexpr TokenId kUnk = 4;
inline constexpr TokenId kNumReserved = 5;

// Lowercases, splits punctuation into single-character tokens and splits on
// whitespace. Apostrophes stay inside words ("don't").
std::vector<std::string> tokenize(std::string_view text);

// One line of a JSONL corpus file, before tokenization.
struct DialogueRecord {
  std::vector<std::string> context;  // persona / topic segments, may be empty
  std::vector<std::string> history;  // dialogue turns, oldest first
  std::string response;

  bool operator==(const DialogueRecord&) const = default;
};

class Vocabulary {
 public:
  // Reserved tokens only.
  Vocabulary();

  // Rebuilds a frozen vocabulary from its non-reserved tokens in id order
  // (as stored in a checkpoint). Throws ConfigError on duplicates.
  static Vocabulary from_tokens(const std::vector<std::string>& tokens);

  // Unknown tokens map to kUnk.
  TokenId id(std::string_view token) const;
  bool contains(std::string_view token) const;
  const std::string& token(TokenId id) const;
  std::size_t size() const { return tokens_.size(); }

  // All tokens in id order, reserved ones included.
  const std::vector<std::string>& tokens() const { return tokens_; }
  std::uint64_t hash() const;

  TokenSeq encode(const std::vector<std::string>& tokens) const;
  std::vector<std::string> decode(const TokenSeq& ids) const;

  static bool is_reserved(TokenId id) { return id >= 0 && id < kNumReserved; }

 private:
  void add(const std::string& token);

  std::vector<std::string> tokens_;
  std::unordered_map<std::string, TokenId> index_;
};

// Tokens with corpus frequency >= min_count, ordered by (frequency desc,
// token asc). Counts context, history and response text.
Vocabulary build_vocab(const std::vector<DialogueRecord>& records, int min_count);

struct DialogueSample {
  TokenSeq history;   // context segments and turns joined by kSep
  TokenSeq response;  // terminated by kEos

  bool operator==(const DialogueSample&) const = default;
};

enum class SplitTag { kTrain, kValid, kTest };

struct CorpusSplit {
  SplitTag tag = SplitTag::kTrain;
  std::vector<DialogueSample> samples;

  std::size_t size() const { return samples.size(); }
  bool empty() const { return samples.empty(); }
};

// Concatenates parts in order with one kSep between adjacent parts.
// Requires at least one turn.
TokenSeq assemble_history(const std::vector<TokenSeq>& context_segments,
                          const std::vector<TokenSeq>& turns);

// Empty segments/turns are dropped before assembly. Throws ConfigError if
// nothing remains of the history.
DialogueSample encode_record(const DialogueRecord& record, const Vocabulary& vocab);

CorpusSplit encode_corpus(const std::vector<DialogueRecord>& records, const Vocabulary& vocab,
                          SplitTag tag);

// JSONL: {"context": [...], "history": [...], "response": "..."} per line.
// Blank lines are skipped. Malformed lines raise ConfigError("line N: ...").
std::vector<DialogueRecord> load_records(const std::filesystem::path& path);
void save_records(const std::filesystem::path& path, const std::vector<DialogueRecord>& records);

CorpusSplit load_corpus(const std::filesystem::path& path, const Vocabulary& vocab, SplitTag tag);

// Generated responses: one line per input sample, same order.
void save_generated(const std::filesystem::path& path, const std::vector<std::string>& responses);
std::vector<std::string> load_generated(const std::filesystem::path& path);

// Space-joined tokens without reserved markers (EOS/PAD/BOS dropped).
std::string detokenize(const TokenSeq& ids, const Vocabulary& vocab);

}  // namespace softaug
