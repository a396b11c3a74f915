#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "softaug/corpus.hpp"

namespace softaug {

// Templated persona dialogues over a ~200-word vocabulary. Nouns, verbs and
// adjectives come in synonym groups whose surface form is drawn uniformly,
// so one history admits several equally good responses.
std::vector<DialogueRecord> make_toy_dialogues(std::size_t count, std::uint64_t seed);

struct SynonymCorpus {
  std::vector<DialogueRecord> records;  // one sentence per record (as response)
  std::vector<std::pair<std::string, std::string>> pairs;
};

// `num_pairs` planted synonym pairs; both members of a pair occur in the same
// pair-specific context templates, and nowhere else.
SynonymCorpus make_synonym_corpus(int num_pairs, std::size_t sentences, std::uint64_t seed);

}  // namespace softaug
