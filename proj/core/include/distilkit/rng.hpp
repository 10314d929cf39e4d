// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <span>
#include <utility>
#include <vector>

namespace distilkit {

/// splitmix64 finaliser; used for seeding and stream derivation.
std::uint64_t splitmix64(std::uint64_t& state) noexcept;

/// Deterministic random source: xoshiro256** seeded through splitmix64.
///
/// Every draw is defined in terms of next_u64() with integer arithmetic only,
/// so a given seed yields the same sequence on every platform:
///   uniform()        = (next_u64() >> 11) * 2^-53
///   uniform_int(n)   = rejection sampling on next_u64() % n, rejecting draws
///                      below (2^64 - n) % n
///   bernoulli(p)     = uniform() < p
///   shuffle(xs)      = Fisher-Yates from the back, j = uniform_int(i + 1)
class SeededRng {
 public:
  explicit SeededRng(std::uint64_t seed = 0) noexcept;

  /// Seed for an independent stream keyed by (seed, streams...).
  static std::uint64_t derive(std::uint64_t seed, std::initializer_list<std::uint64_t> streams) noexcept;

  std::uint64_t seed() const noexcept { return seed_; }

  std::uint64_t next_u64() noexcept;
  double uniform() noexcept;
  double uniform(double lo, double hi) noexcept;
  std::uint64_t uniform_int(std::uint64_t n);
  bool bernoulli(double p) noexcept;

  template <typename T>
  void shuffle(std::span<T> items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      const auto j = static_cast<std::size_t>(uniform_int(i));
      std::swap(items[i - 1], items[j]);
    }
  }

  template <typename T>
  void shuffle(std::vector<T>& items) {
    shuffle(std::span<T>(items));
  }

  /// Random permutation of 0..n-1.
  std::vector<std::size_t> permutation(std::size_t n);

  /// k distinct indices from 0..n-1, in draw order (partial Fisher-Yates).
  std::vector<std::size_t> sample_without_replacement(std::size_t n, std::size_t k);

 private:
  std::uint64_t seed_;
  std::array<std::uint64_t, 4> s_{};
};

}  // namespace distilkit
