// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <span>
#include <string_view>

namespace distilkit {

/// Incremental 64-bit FNV-1a, used for content fingerprints (corpora,
/// vocabularies, checkpoints, configs). Not a cryptographic hash.
class Fnv1a {
 public:
  void update(std::span<const std::byte> bytes) noexcept;
  void update(std::string_view text) noexcept;
  void update_u64(std::uint64_t value) noexcept;
  void update_f64(double value) noexcept;
  std::uint64_t digest() const noexcept { return state_; }

 private:
  std::uint64_t state_ = 0xcbf29ce484222325ULL;
};

std::uint64_t fnv1a64(std::string_view text) noexcept;

}  // namespace distilkit
