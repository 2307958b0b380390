#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>

#include "vlmd/transformer.hpp"

namespace vlmd {

// Layout (all integers and floats little-endian):
//   char[8]  magic "VLMDCKPT"
//   u32      format version
//   u32 x 6  vocab_size, d_model, n_heads, n_layers, d_ff, max_len
//   u32      tensor count
//   f32[]    tensors in parameter_layout() order
inline constexpr char kCheckpointMagic[8] = {'V', 'L', 'M', 'D', 'C', 'K', 'P', 'T'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

void save_checkpoint(std::ostream& os, const Transformer<float>& net);
void save_checkpoint(const std::filesystem::path& path, const Transformer<float>& net);

/// Throws std::runtime_error on bad magic, unsupported version, inconsistent
/// hyperparameters or truncation.
Transformer<float> load_checkpoint(std::istream& is);
Transformer<float> load_checkpoint(const std::filesystem::path& path);

}  // namespace vlmd
