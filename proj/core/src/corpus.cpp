#include "softaug/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <map>

#include <json.hpp>

#include "softaug/rng.hpp"

namespace softaug {

namespace {

const char* const kReservedTokens[kNumReserved] = {"<pad>", "<bos>", "<eos>", "<sep>", "<unk>"};

bool is_word_byte(unsigned char c) {
  return std::isalnum(c) || c == '\'' || c >= 0x80;
}

}  // namespace

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> out;
  std::string current;
  auto flush = [&] {
    if (!current.empty()) {
      out.push_back(std::move(current));
      current.clear();
    }
  };
  for (unsigned char c : text) {
    if (std::isspace(c)) {
      flush();
    } else if (is_word_byte(c)) {
      current.push_back(static_cast<char>(std::tolower(c)));
    } else {
      flush();
      out.emplace_back(1, static_cast<char>(c));
    }
  }
  flush();
  return out;
}

Vocabulary::Vocabulary() {
  for (const char* t : kReservedTokens) add(t);
}

void Vocabulary::add(const std::string& token) {
  if (index_.contains(token)) throw ConfigError("duplicate vocabulary token: " + token);
  index_.emplace(token, static_cast<TokenId>(tokens_.size()));
  tokens_.push_back(token);
}

Vocabulary Vocabulary::from_tokens(const std::vector<std::string>& tokens) {
  Vocabulary v;
  for (const auto& t : tokens) v.add(t);
  return v;
}

TokenId Vocabulary::id(std::string_view token) const {
  auto it = index_.find(std::string(token));
  return it == index_.end() ? kUnk : it->second;
}

bool Vocabulary::contains(std::string_view token) const {
  return index_.contains(std::string(token));
}

const std::string& Vocabulary::token(TokenId id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= tokens_.size()) {
    throw std::out_of_range("token id out of range: " + std::to_string(id));
  }
  return tokens_[static_cast<std::size_t>(id)];
}

std::uint64_t Vocabulary::hash() const {
  std::uint64_t h = fnv1a64("softaug-vocab");
  for (const auto& t : tokens_) {
    h = fnv1a64(t, h);
    h = fnv1a64("\n", h);
  }
  return h;
}

TokenSeq Vocabulary::encode(const std::vector<std::string>& tokens) const {
  TokenSeq ids;
  ids.reserve(tokens.size());
  for (const auto& t : tokens) ids.push_back(id(t));
  return ids;
}

std::vector<std::string> Vocabulary::decode(const TokenSeq& ids) const {
  std::vector<std::string> out;
  out.reserve(ids.size());
  for (TokenId i : ids) out.push_back(token(i));
  return out;
}

Vocabulary build_vocab(const std::vector<DialogueRecord>& records, int min_count) {
  if (min_count < 1) throw ConfigError("min_count must be >= 1");
  if (records.empty()) throw ConfigError("cannot build a vocabulary from an empty corpus");

  std::map<std::string, long> counts;
  auto count_text = [&](const std::string& text) {
    for (auto& t : tokenize(text)) ++counts[t];
  };
  for (const auto& r : records) {
    for (const auto& s : r.context) count_text(s);
    for (const auto& s : r.history) count_text(s);
    count_text(r.response);
  }

  Vocabulary probe;
  std::vector<std::pair<std::string, long>> kept;
  for (auto& [token, n] : counts) {
    if (n >= min_count && !probe.contains(token)) kept.emplace_back(token, n);
  }
  std::stable_sort(kept.begin(), kept.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });

  std::vector<std::string> tokens;
  tokens.reserve(kept.size());
  for (auto& [token, n] : kept) tokens.push_back(token);
  return Vocabulary::from_tokens(tokens);
}

TokenSeq assemble_history(const std::vector<TokenSeq>& context_segments,
                          const std::vector<TokenSeq>& turns) {
  if (turns.empty()) throw std::invalid_argument("assemble_history needs at least one turn");
  TokenSeq out;
  bool first = true;
  auto append = [&](const TokenSeq& part) {
    if (!first) out.push_back(kSep);
    out.insert(out.end(), part.begin(), part.end());
    first = false;
  };
  for (const auto& s : context_segments) append(s);
  for (const auto& t : turns) append(t);
  return out;
}

DialogueSample encode_record(const DialogueRecord& record, const Vocabulary& vocab) {
  auto encode_parts = [&](const std::vector<std::string>& texts) {
    std::vector<TokenSeq> parts;
    for (const auto& text : texts) {
      TokenSeq ids = vocab.encode(tokenize(text));
      if (!ids.empty()) parts.push_back(std::move(ids));
    }
    return parts;
  };
  auto context = encode_parts(record.context);
  auto turns = encode_parts(record.history);
  if (turns.empty()) {
    if (context.empty()) throw ConfigError("empty history");
    // Context alone still conditions the response.
    turns.push_back(std::move(context.back()));
    context.pop_back();
  }

  DialogueSample sample;
  sample.history = assemble_history(context, turns);
  sample.response = vocab.encode(tokenize(record.response));
  sample.response.push_back(kEos);
  return sample;
}

CorpusSplit encode_corpus(const std::vector<DialogueRecord>& records, const Vocabulary& vocab,
                          SplitTag tag) {
  CorpusSplit split;
  split.tag = tag;
  split.samples.reserve(records.size());
  for (std::size_t i = 0; i < records.size(); ++i) {
    try {
      split.samples.push_back(encode_record(records[i], vocab));
    } catch (const ConfigError& e) {
      throw ConfigError("record " + std::to_string(i + 1) + ": " + e.what());
    }
  }
  if (tag == SplitTag::kTrain && split.empty()) throw ConfigError("training split is empty");
  return split;
}

std::vector<DialogueRecord> load_records(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open corpus file: " + path.string());

  std::vector<DialogueRecord> records;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (std::all_of(line.begin(), line.end(), [](unsigned char c) { return std::isspace(c); })) {
      continue;
    }
    const std::string where = "line " + std::to_string(line_no) + ": ";
    nlohmann::json obj;
    try {
      obj = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw ConfigError(where + "invalid JSON (" + e.what() + ")");
    }
    if (!obj.is_object()) throw ConfigError(where + "expected a JSON object");

    DialogueRecord r;
    auto read_list = [&](const char* key, std::vector<std::string>& dst, bool required) {
      if (!obj.contains(key)) {
        if (required) throw ConfigError(where + "missing field \"" + key + "\"");
        return;
      }
      const auto& v = obj.at(key);
      if (!v.is_array()) throw ConfigError(where + "field \"" + key + "\" must be a list of strings");
      for (const auto& s : v) {
        if (!s.is_string()) throw ConfigError(where + "field \"" + key + "\" must be a list of strings");
        dst.push_back(s.get<std::string>());
      }
    };
    read_list("context", r.context, false);
    read_list("history", r.history, true);
    if (!obj.contains("response")) throw ConfigError(where + "missing field \"response\"");
    if (!obj.at("response").is_string()) throw ConfigError(where + "field \"response\" must be a string");
    r.response = obj.at("response").get<std::string>();
    records.push_back(std::move(r));
  }
  return records;
}

void save_records(const std::filesystem::path& path, const std::vector<DialogueRecord>& records) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  for (const auto& r : records) {
    nlohmann::json obj = {{"context", r.context}, {"history", r.history}, {"response", r.response}};
    out << obj.dump() << '\n';
  }
}

CorpusSplit load_corpus(const std::filesystem::path& path, const Vocabulary& vocab, SplitTag tag) {
  return encode_corpus(load_records(path), vocab, tag);
}

void save_generated(const std::filesystem::path& path, const std::vector<std::string>& responses) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  for (const auto& r : responses) {
    if (r.find('\n') != std::string::npos) throw std::invalid_argument("response contains a newline");
    out << r << '\n';
  }
}

std::vector<std::string> load_generated(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open responses file: " + path.string());
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) lines.push_back(line);
  return lines;
}

std::string detokenize(const TokenSeq& ids, const Vocabulary& vocab) {
  std::string out;
  for (TokenId id : ids) {
    if (id == kEos || id == kPad || id == kBos) continue;
    if (!out.empty()) out.push_back(' ');
    out += vocab.token(id);
  }
  return out;
}

}  // namespace softaug
