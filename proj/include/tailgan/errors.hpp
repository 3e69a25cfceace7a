#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace tailgan {

// Parameter or argument outside the mathematical domain of an operation
// (invalid GPD parameters, probability >= 1, deficit outside the support...).
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// Shapes of matrices or vectors do not chain.
class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// A statistical fit could not be carried out on the given sample.
class FitError : public std::runtime_error {
 public:
  FitError(const std::string& what, std::size_t sample_count)
      : std::runtime_error(what + " (n=" + std::to_string(sample_count) + ")"),
        sample_count_(sample_count) {}

  std::size_t sample_count() const noexcept { return sample_count_; }

 private:
  std::size_t sample_count_;
};

// Invalid configuration values or malformed configuration documents.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// File-system and data-format failures (missing file, malformed CSV row...).
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Training produced non-finite values or diverged.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace tailgan
