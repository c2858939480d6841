#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <utility>

namespace saflbench {

// Counter-based Philox4x32-10 generator.
//
// Every output is a pure function of (seed, stream, counter), so draws are
// identical on every platform and sub-streams can be derived without sharing
// state. Distribution transforms are implemented here rather than through
// <random> because the standard distributions are implementation-defined.
class SeededRng {
 public:
  explicit SeededRng(std::uint64_t seed, std::uint64_t stream = 0) noexcept;

  std::uint64_t seed() const noexcept { return seed_; }
  std::uint64_t stream() const noexcept { return stream_; }

  // Independent generator for a named sub-stream. Does not advance *this.
  SeededRng derive(std::uint64_t stream_id) const noexcept;

  std::uint64_t next_u64() noexcept;

  // Uniform on [0, 1) with 53 bits of resolution.
  double uniform() noexcept;
  // Uniform on (0, 1).
  double uniform_open() noexcept;
  // Unbiased integer in [0, n). n must be > 0.
  std::uint64_t below(std::uint64_t n) noexcept;

  double normal() noexcept;
  // Gamma(shape, 1); shape > 0.
  double gamma(double shape) noexcept;
  // log of a Gamma(shape, 1) variate. Stays finite for tiny shapes where the
  // variate itself underflows to zero.
  double log_gamma_variate(double shape) noexcept;

  template <typename T>
  void shuffle(std::span<T> items) noexcept {
    for (std::size_t i = items.size(); i > 1; --i) {
      const auto j = static_cast<std::size_t>(below(i));
      std::swap(items[i - 1], items[j]);
    }
  }

 private:
  std::array<std::uint32_t, 4> block(std::uint64_t counter) const noexcept;

  std::uint64_t seed_;
  std::uint64_t stream_;
  std::uint64_t counter_ = 0;
  std::uint64_t spare_ = 0;
  bool has_spare_ = false;
};

// One Philox4x32-10 block: the raw bijection behind SeededRng.
std::array<std::uint32_t, 4> philox4x32_10(std::array<std::uint32_t, 4> counter,
                                           std::array<std::uint32_t, 2> key) noexcept;

// SplitMix64 finalizer; used to turn (seed, tag) pairs into well-mixed seeds.
std::uint64_t mix64(std::uint64_t x) noexcept;

}  // namespace saflbench
