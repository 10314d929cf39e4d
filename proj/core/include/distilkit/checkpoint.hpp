// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <string>

#include "distilkit/encoder.hpp"

namespace distilkit {

/// Binary checkpoint, little-endian:
///
///   magic    8 bytes  "DKCKPT01"
///   config   u64 vocab_size, d_model, n_heads, n_layers, d_ff, max_len; f64 dropout_rate
///   vocab    u64 vocabulary hash
///   heads    u64 count, then per head: u64 name length, name bytes, u64 K
///   tensors  u64 count, then per tensor (name order): u64 name length, name
///            bytes, u64 rank, rank x u64 dims, numel x f64 values
///
/// The vocabulary itself is stored next to it as a token-per-line file.
std::string serialize_checkpoint(const ModelParams& params);
ModelParams deserialize_checkpoint(const std::string& bytes);

void save_checkpoint(const std::filesystem::path& path, const ModelParams& params);
ModelParams load_checkpoint(const std::filesystem::path& path);

}  // namespace distilkit
