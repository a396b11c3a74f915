#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace softaug {

using TokenId = std::int32_t;
using TokenSeq = std::vector<TokenId>;

// Row-major so that embedding rows E.row(t) are contiguous.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

// Raised for invalid user input: bad config values, malformed files, wrong
// shapes. The CLI maps it to exit code 2.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Raised when a computation cannot proceed (non-finite loss, log of zero).
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace softaug
