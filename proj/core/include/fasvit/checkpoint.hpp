#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "fasvit/vit.hpp"

namespace fasvit {

// Model checkpoint container, all little-endian:
//   magic "FASV" | u16 version (currently 1)
//   config record: i32 image_size, patch_size, depth, embed_dim, heads;
//                  f64 mlp_ratio, alpha; i32 score_tap, loss_tap, n_classes
//   u32 tensor_count, then per tensor:
//     u32 name_len | name bytes | u32 rank | u32 dims[rank] | f32 payload,
//     row-major. Tensors appear in for_each_tensor order and values are
//     stored as 32-bit floats regardless of the in-memory scalar type.

inline constexpr std::uint16_t kCheckpointVersion = 1;

template <typename T>
std::vector<std::uint8_t> serialize_checkpoint(const ModelConfig& cfg,
                                               const ModelParams<T>& params);

template <typename T>
std::pair<ModelConfig, ModelParams<T>> parse_checkpoint(const std::vector<std::uint8_t>& bytes,
                                                        const std::string& what);

template <typename T>
void save_checkpoint(const ModelConfig& cfg, const ModelParams<T>& params,
                     const std::string& path);

template <typename T>
std::pair<ModelConfig, ModelParams<T>> load_checkpoint(const std::string& path);

// FNV-1a over the whole file; used to tie reference banks and run summaries
// to the exact checkpoint they came from.
std::uint64_t file_fingerprint(const std::string& path);

}  // namespace fasvit
