#include "softaug/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace softaug {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

namespace {

constexpr char kMagic[8] = {'S', 'O', 'F', 'T', 'A', 'U', 'G', '\0'};

class Writer {
 public:
  template <typename T>
  void put(T v) {
    static_assert(std::is_trivially_copyable_v<T>);
    buf_.append(reinterpret_cast<const char*>(&v), sizeof v);
  }
  void put_bytes(const std::string& s) {
    put<std::uint32_t>(static_cast<std::uint32_t>(s.size()));
    buf_ += s;
  }
  template <typename M>
  void put_matrix(const M& m) {
    put<std::uint64_t>(static_cast<std::uint64_t>(m.rows()));
    put<std::uint64_t>(static_cast<std::uint64_t>(m.cols()));
    buf_.append(reinterpret_cast<const char*>(m.data()), static_cast<std::size_t>(m.size()) * sizeof(double));
  }
  void section(const char tag[4], const std::string& payload) {
    buf_.append(tag, 4);
    put<std::uint64_t>(payload.size());
    buf_ += payload;
  }
  std::string& str() { return buf_; }

 private:
  std::string buf_;
};

class Reader {
 public:
  Reader(const std::string& data, std::string what) : data_(data), what_(std::move(what)) {}

  template <typename T>
  T get() {
    T v;
    need(sizeof v);
    std::memcpy(&v, data_.data() + pos_, sizeof v);
    pos_ += sizeof v;
    return v;
  }
  std::string get_bytes() {
    const auto n = get<std::uint32_t>();
    need(n);
    std::string s = data_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  std::string get_raw(std::size_t n) {
    need(n);
    std::string s = data_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  // Reads a matrix whose shape must equal `expected`'s.
  template <typename M>
  void get_matrix_into(M& expected, const std::string& name) {
    const auto rows = get<std::uint64_t>();
    const auto cols = get<std::uint64_t>();
    if (rows != static_cast<std::uint64_t>(expected.rows()) || cols != static_cast<std::uint64_t>(expected.cols())) {
      fail("block " + name + " has shape " + std::to_string(rows) + "x" + std::to_string(cols) + ", expected " +
           std::to_string(expected.rows()) + "x" + std::to_string(expected.cols()));
    }
    const std::size_t bytes = static_cast<std::size_t>(expected.size()) * sizeof(double);
    need(bytes);
    std::memcpy(expected.data(), data_.data() + pos_, bytes);
    pos_ += bytes;
  }
  bool done() const { return pos_ == data_.size(); }
  [[noreturn]] void fail(const std::string& msg) const { throw ConfigError(what_ + ": " + msg); }

 private:
  void need(std::size_t n) const {
    if (data_.size() - pos_ < n) fail("truncated data");
  }
  const std::string& data_;
  std::string what_;
  std::size_t pos_ = 0;
};

std::string encode_vocab(const Vocabulary& v) {
  Writer w;
  w.put<std::uint64_t>(v.size() - kNumReserved);
  for (std::size_t i = kNumReserved; i < v.size(); ++i) w.put_bytes(v.tokens()[i]);
  w.put<std::uint64_t>(v.hash());
  return w.str();
}

Vocabulary decode_vocab(const std::string& payload) {
  Reader r(payload, "VOCB");
  const auto n = r.get<std::uint64_t>();
  std::vector<std::string> tokens;
  for (std::uint64_t i = 0; i < n; ++i) tokens.push_back(r.get_bytes());
  const auto hash = r.get<std::uint64_t>();
  Vocabulary v = Vocabulary::from_tokens(tokens);
  if (v.hash() != hash) r.fail("vocabulary hash does not match its tokens");
  return v;
}

std::string encode_neighbors(const NeighborModel& m) {
  Writer w;
  w.put<std::int32_t>(m.config.dim);
  w.put<std::int32_t>(m.config.window);
  w.put<std::int32_t>(m.config.epochs);
  w.put<std::int32_t>(m.config.negatives);
  w.put<double>(m.config.lr);
  w.put<std::uint64_t>(m.config.seed);
  w.put<std::int32_t>(m.trained_epochs);
  w.put<std::uint64_t>(m.epoch_losses.size());
  for (double l : m.epoch_losses) w.put<double>(l);
  w.put_matrix(m.input);
  w.put_matrix(m.output);
  return w.str();
}

NeighborModel decode_neighbors(const std::string& payload, std::size_t vocab_size) {
  Reader r(payload, "NBRM");
  NeighborModel m;
  m.config.dim = r.get<std::int32_t>();
  m.config.window = r.get<std::int32_t>();
  m.config.epochs = r.get<std::int32_t>();
  m.config.negatives = r.get<std::int32_t>();
  m.config.lr = r.get<double>();
  m.config.seed = r.get<std::uint64_t>();
  m.trained_epochs = r.get<std::int32_t>();
  const auto n = r.get<std::uint64_t>();
  if (n > 1'000'000) r.fail("implausible epoch count");
  for (std::uint64_t i = 0; i < n; ++i) m.epoch_losses.push_back(r.get<double>());
  if (m.config.dim < 1) r.fail("invalid dimension");
  m.input = Matrix::Zero(static_cast<Eigen::Index>(vocab_size), m.config.dim);
  m.output = Matrix::Zero(static_cast<Eigen::Index>(vocab_size), m.config.dim);
  r.get_matrix_into(m.input, "input");
  r.get_matrix_into(m.output, "output");
  if (!r.done()) r.fail("trailing bytes");
  return m;
}

void encode_blocks(Writer& w, const Seq2SeqParams& p) {
  p.for_each_block([&](std::string_view name, const auto& b) {
    w.put_bytes(std::string(name));
    w.put<std::uint64_t>(static_cast<std::uint64_t>(b.rows()));
    w.put<std::uint64_t>(static_cast<std::uint64_t>(b.cols()));
    w.str().append(reinterpret_cast<const char*>(b.data()), static_cast<std::size_t>(b.size()) * sizeof(double));
  });
}

void decode_blocks(Reader& r, Seq2SeqParams& p) {
  p.for_each_block([&](std::string_view name, auto& b) {
    const std::string stored = r.get_bytes();
    if (stored != name) r.fail("expected block " + std::string(name) + ", found " + stored);
    r.get_matrix_into(b, stored);
  });
}

ModelDims read_dims(Reader& r) {
  ModelDims d;
  d.vocab = r.get<std::int32_t>();
  d.embed = r.get<std::int32_t>();
  d.hidden = r.get<std::int32_t>();
  try {
    d.validate();
  } catch (const ConfigError& e) {
    r.fail(e.what());
  }
  return d;
}

void write_dims(Writer& w, const ModelDims& d) {
  w.put<std::int32_t>(d.vocab);
  w.put<std::int32_t>(d.embed);
  w.put<std::int32_t>(d.hidden);
}

std::string hex64(std::uint64_t v) {
  char buf[24];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

}  // namespace

std::string RunManifest::to_json() const {
  nlohmann::ordered_json j;
  j["command"] = command;
  j["version"] = version;
  j["mode"] = mode;
  j["seed"] = seed;
  j["vocab_hash"] = hex64(vocab_hash);
  j["inputs"] = inputs;
  j["output_dir"] = output_dir;
  j["config"] = config;
  j["results"] = results;
  return j.dump(2);
}

RunManifest RunManifest::from_json(const std::string& text) {
  try {
    const auto j = nlohmann::json::parse(text);
    RunManifest m;
    m.command = j.at("command").get<std::string>();
    m.version = j.at("version").get<std::string>();
    m.mode = j.at("mode").get<std::string>();
    m.seed = j.at("seed").get<std::uint64_t>();
    m.vocab_hash = std::stoull(j.at("vocab_hash").get<std::string>(), nullptr, 16);
    m.inputs = j.at("inputs").get<std::map<std::string, std::string>>();
    m.output_dir = j.at("output_dir").get<std::string>();
    m.config = j.at("config").get<std::map<std::string, std::string>>();
    m.results = j.at("results").get<std::map<std::string, std::string>>();
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("invalid manifest: ") + e.what());
  } catch (const std::logic_error& e) {
    throw ConfigError(std::string("invalid manifest: ") + e.what());
  }
}

std::string encode_checkpoint(const Checkpoint& ckpt) {
  std::vector<std::pair<const char*, std::string>> sections;
  sections.emplace_back("VOCB", encode_vocab(ckpt.vocab));
  if (ckpt.neighbors) sections.emplace_back("NBRM", encode_neighbors(*ckpt.neighbors));
  if (ckpt.model) {
    Writer w;
    write_dims(w, ckpt.model->dims);
    encode_blocks(w, *ckpt.model);
    sections.emplace_back("S2SP", w.str());
  }
  if (ckpt.adam) {
    Writer w;
    write_dims(w, ckpt.adam->m.dims);
    w.put<std::int64_t>(ckpt.adam->step);
    encode_blocks(w, ckpt.adam->m);
    encode_blocks(w, ckpt.adam->v);
    sections.emplace_back("ADAM", w.str());
  }
  sections.emplace_back("MNFT", ckpt.manifest.to_json());

  Writer out;
  out.str().append(kMagic, sizeof kMagic);
  out.put<std::uint32_t>(kCheckpointVersion);
  out.put<std::uint32_t>(static_cast<std::uint32_t>(sections.size()));
  for (const auto& [tag, payload] : sections) out.section(tag, payload);
  return out.str();
}

Checkpoint decode_checkpoint(const std::string& bytes, std::optional<std::uint64_t> expected_vocab_hash) {
  Reader r(bytes, "checkpoint");
  if (r.get_raw(sizeof kMagic) != std::string(kMagic, sizeof kMagic)) r.fail("bad magic (not a softaug checkpoint)");
  const auto version = r.get<std::uint32_t>();
  if (version != kCheckpointVersion) r.fail("unsupported format version " + std::to_string(version));
  const auto count = r.get<std::uint32_t>();

  std::map<std::string, std::string> sections;
  std::string last_tag;
  for (std::uint32_t i = 0; i < count; ++i) {
    std::string tag = r.get_raw(4);
    const auto len = r.get<std::uint64_t>();
    if (len > bytes.size()) r.fail("section " + tag + " length exceeds file size");
    if (sections.contains(tag)) r.fail("duplicate section " + tag);
    sections[tag] = r.get_raw(static_cast<std::size_t>(len));
    last_tag = tag;
  }
  if (!r.done()) r.fail("trailing bytes after the last section");
  if (!sections.contains("VOCB")) r.fail("missing VOCB section");
  if (last_tag != "MNFT") r.fail("manifest trailer missing");

  Checkpoint ckpt;
  ckpt.vocab = decode_vocab(sections["VOCB"]);
  ckpt.manifest = RunManifest::from_json(sections["MNFT"]);
  if (ckpt.manifest.vocab_hash != ckpt.vocab.hash()) r.fail("manifest vocabulary hash does not match the vocabulary");
  if (expected_vocab_hash && *expected_vocab_hash != ckpt.vocab.hash()) {
    r.fail("vocabulary hash mismatch: checkpoint " + hex64(ckpt.vocab.hash()) + ", expected " +
           hex64(*expected_vocab_hash));
  }

  if (auto it = sections.find("NBRM"); it != sections.end()) {
    ckpt.neighbors = decode_neighbors(it->second, ckpt.vocab.size());
  }
  auto check_vocab = [&](const ModelDims& d) {
    if (static_cast<std::size_t>(d.vocab) != ckpt.vocab.size()) r.fail("model vocabulary size does not match VOCB");
  };
  if (auto it = sections.find("S2SP"); it != sections.end()) {
    Reader s(it->second, "S2SP");
    const ModelDims dims = read_dims(s);
    check_vocab(dims);
    Seq2SeqParams p = Seq2SeqParams::zeros(dims);
    decode_blocks(s, p);
    if (!s.done()) s.fail("trailing bytes");
    ckpt.model = std::move(p);
  }
  if (auto it = sections.find("ADAM"); it != sections.end()) {
    Reader s(it->second, "ADAM");
    const ModelDims dims = read_dims(s);
    check_vocab(dims);
    AdamState a = AdamState::zeros(dims);
    a.step = s.get<std::int64_t>();
    decode_blocks(s, a.m);
    decode_blocks(s, a.v);
    if (!s.done()) s.fail("trailing bytes");
    ckpt.adam = std::move(a);
  }
  return ckpt;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  const std::string bytes = encode_checkpoint(ckpt);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path, std::optional<std::uint64_t> expected_vocab_hash) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open checkpoint: " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return decode_checkpoint(ss.str(), expected_vocab_hash);
}

}  // namespace softaug
