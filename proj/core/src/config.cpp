#include "softaug/config.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>

namespace softaug {

namespace {

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <typename T>
T parse_number(std::string_view key, std::string_view value) {
  T out{};
  const auto* end = value.data() + value.size();
  auto [ptr, ec] = std::from_chars(value.data(), end, out);
  if (ec != std::errc() || ptr != end) {
    throw ConfigError("invalid value \"" + std::string(value) + "\" for " + std::string(key));
  }
  return out;
}

double parse_double(std::string_view key, std::string_view value) {
  // from_chars for double is unavailable in some libstdc++ versions.
  std::string s(value);
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (s.empty() || end != s.c_str() + s.size()) {
    throw ConfigError("invalid value \"" + s + "\" for " + std::string(key));
  }
  return v;
}

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

void RunConfig::set(std::string_view key, std::string_view raw) {
  const std::string_view value = trim(raw);
  if (key == "rho") rho = parse_double(key, value);
  else if (key == "tau") tau = parse_double(key, value);
  else if (key == "k") k = parse_number<int>(key, value);
  else if (key == "d") d = parse_number<int>(key, value);
  else if (key == "hidden") hidden = parse_number<int>(key, value);
  else if (key == "lr") lr = parse_double(key, value);
  else if (key == "beta1") beta1 = parse_double(key, value);
  else if (key == "beta2") beta2 = parse_double(key, value);
  else if (key == "eps") eps = parse_double(key, value);
  else if (key == "clip_norm") clip_norm = parse_double(key, value);
  else if (key == "batch_size") batch_size = parse_number<int>(key, value);
  else if (key == "epochs") epochs = parse_number<int>(key, value);
  else if (key == "seed") seed = parse_number<std::uint64_t>(key, value);
  else if (key == "mode") mode = parse_train_mode(value);
  else if (key == "beam") beam = parse_number<int>(key, value);
  else if (key == "max_len") max_len = parse_number<int>(key, value);
  else if (key == "min_count") min_count = parse_number<int>(key, value);
  else if (key == "neighbor.dim") neighbor.dim = parse_number<int>(key, value);
  else if (key == "neighbor.window") neighbor.window = parse_number<int>(key, value);
  else if (key == "neighbor.epochs") neighbor.epochs = parse_number<int>(key, value);
  else if (key == "neighbor.negatives") neighbor.negatives = parse_number<int>(key, value);
  else if (key == "neighbor.lr") neighbor.lr = parse_double(key, value);
  else throw ConfigError("unknown config key: " + std::string(key));
}

void RunConfig::validate() const {
  train_config().validate();
  if (d < 1 || hidden < 1) throw ConfigError("d and hidden must be >= 1");
  if (beam < 1) throw ConfigError("beam must be >= 1");
  if (max_len < 1) throw ConfigError("max_len must be >= 1");
  if (min_count < 1) throw ConfigError("min_count must be >= 1");
  if (neighbor.dim < 1 || neighbor.window < 1 || neighbor.epochs < 0 || neighbor.negatives < 1 ||
      !(neighbor.lr > 0.0)) {
    throw ConfigError("invalid neighbor.* settings");
  }
}

RunConfig RunConfig::from_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path.string());
  RunConfig cfg;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::string_view s = line;
    if (auto hash = s.find('#'); hash != std::string_view::npos) s = s.substr(0, hash);
    s = trim(s);
    if (s.empty()) continue;
    const auto eq = s.find('=');
    if (eq == std::string_view::npos) {
      throw ConfigError(path.string() + ":" + std::to_string(line_no) + ": expected key = value");
    }
    try {
      cfg.set(trim(s.substr(0, eq)), s.substr(eq + 1));
    } catch (const ConfigError& e) {
      throw ConfigError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return cfg;
}

std::map<std::string, std::string> RunConfig::to_map() const {
  return {
      {"rho", format_double(rho)},
      {"tau", format_double(tau)},
      {"k", std::to_string(k)},
      {"d", std::to_string(d)},
      {"hidden", std::to_string(hidden)},
      {"lr", format_double(lr)},
      {"beta1", format_double(beta1)},
      {"beta2", format_double(beta2)},
      {"eps", format_double(eps)},
      {"clip_norm", format_double(clip_norm)},
      {"batch_size", std::to_string(batch_size)},
      {"epochs", std::to_string(epochs)},
      {"seed", std::to_string(seed)},
      {"mode", std::string(to_string(mode))},
      {"beam", std::to_string(beam)},
      {"max_len", std::to_string(max_len)},
      {"min_count", std::to_string(min_count)},
      {"neighbor.dim", std::to_string(neighbor.dim)},
      {"neighbor.window", std::to_string(neighbor.window)},
      {"neighbor.epochs", std::to_string(neighbor.epochs)},
      {"neighbor.negatives", std::to_string(neighbor.negatives)},
      {"neighbor.lr", format_double(neighbor.lr)},
  };
}

TrainConfig RunConfig::train_config() const {
  TrainConfig t;
  t.augment = {rho, tau, k};
  t.adam = {lr, beta1, beta2, eps};
  t.batch_size = batch_size;
  t.epochs = epochs;
  t.seed = seed;
  t.mode = mode;
  t.clip_norm = clip_norm;
  return t;
}

CbowConfig RunConfig::cbow_config() const {
  CbowConfig c = neighbor;
  c.seed = seed;
  return c;
}

ModelDims RunConfig::dims(std::size_t vocab_size) const {
  return {static_cast<int>(vocab_size), d, hidden};
}

}  // namespace softaug
