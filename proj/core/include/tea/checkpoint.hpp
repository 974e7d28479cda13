#pragma once

#include <optional>
#include <string>

#include "tea/network.hpp"

namespace tea {

// Binary checkpoint, magic "TEAW", little-endian:
//   magic[4] | u32 version | u64 spec_digest | u64 payload_digest
//   | u32 spec_len | spec json | u32 n_params
//   | per param: u32 name_len, name, u32 ndim, u32 dims[], f32 data[]
//   | u32 n_buffers | per buffer: u32 name_len, name, u32 count, f32 data[]
// Buffers are the batch-norm running statistics. payload_digest is FNV-1a
// over every parameter's and buffer's raw data bytes in file order. Loading
// rebuilds the network from the embedded spec and fails with a distinct
// error type per corruption mode.
inline constexpr std::uint32_t kCheckpointVersion = 1;

void save_checkpoint(const std::string& path, Network& net);

// If `expect` is given its digest must match the stored spec digest.
Network load_checkpoint(const std::string& path,
                        const std::optional<NetworkSpec>& expect = std::nullopt);

}  // namespace tea
