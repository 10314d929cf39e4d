// SPDX-License-Identifier: Apache-2.0
#include "distilkit/hash.hpp"

#include <bit>
#include <cstring>

namespace distilkit {

namespace {
constexpr std::uint64_t kPrime = 0x100000001b3ULL;
}

void Fnv1a::update(std::span<const std::byte> bytes) noexcept {
  for (std::byte b : bytes) {
    state_ ^= static_cast<std::uint64_t>(b);
    state_ *= kPrime;
  }
}

void Fnv1a::update(std::string_view text) noexcept {
  update(std::as_bytes(std::span<const char>(text.data(), text.size())));
}

void Fnv1a::update_u64(std::uint64_t value) noexcept {
  for (int i = 0; i < 8; ++i) {
    state_ ^= (value >> (8 * i)) & 0xffU;
    state_ *= kPrime;
  }
}

void Fnv1a::update_f64(double value) noexcept { update_u64(std::bit_cast<std::uint64_t>(value)); }

std::uint64_t fnv1a64(std::string_view text) noexcept {
  Fnv1a h;
  h.update(text);
  return h.digest();
}

}  // namespace distilkit
