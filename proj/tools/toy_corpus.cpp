// Writes a synthetic templated dialogue corpus as train/valid/test JSONL (80/10/10).

#include <filesystem>
#include <iostream>

#include <CLI11.hpp>

#include "softaug/corpus.hpp"
#include "softaug/toy_corpus.hpp"

namespace fs = std::filesystem;

int main(int argc, char** argv) {
  CLI::App app{"Generate a toy dialogue corpus"};
  std::size_t count = 2000;
  std::uint64_t seed = 1;
  std::string out;
  app.add_option("--count", count, "total number of dialogue pairs")->check(CLI::Range(10, 10000000));
  app.add_option("--seed", seed, "generator seed");
  app.add_option("--out", out, "output directory")->required();
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return e.get_exit_code() == 0 ? app.exit(e) : (app.exit(e), 2);
  }

  try {
    const auto records = softaug::make_toy_dialogues(count, seed);
    const auto n_train = static_cast<long>(count * 8 / 10);
    const auto n_valid = static_cast<long>(count / 10);
    fs::create_directories(out);
    softaug::save_records(fs::path(out) / "train.jsonl", {records.begin(), records.begin() + n_train});
    softaug::save_records(fs::path(out) / "valid.jsonl",
                          {records.begin() + n_train, records.begin() + n_train + n_valid});
    softaug::save_records(fs::path(out) / "test.jsonl", {records.begin() + n_train + n_valid, records.end()});
    std::cout << "wrote " << count << " dialogue pairs to " << out << '\n';
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
