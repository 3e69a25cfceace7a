#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace tailgan {

// Mixes a root seed with a stage name into an independent child seed.
// Every stage of a pipeline draws its randomness from derive_seed(root, "stage").
std::uint64_t derive_seed(std::uint64_t root, std::string_view stage) noexcept;
std::uint64_t derive_seed(std::uint64_t root, std::uint64_t stream) noexcept;

// Caller-owned random stream. Not shared between threads.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }

  // Uniform on [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  // Uniform on the open interval (0, 1).
  double uniform_open() {
    return (static_cast<double>(engine_() >> 12) + 0.5) * 0x1.0p-52;
  }

  double normal() { return normal_(engine_); }

  // Uniform integer in [0, n).
  std::size_t index(std::size_t n) {
    return static_cast<std::size_t>(std::uniform_int_distribution<std::uint64_t>(0, n - 1)(engine_));
  }

  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
};

}  // namespace tailgan
