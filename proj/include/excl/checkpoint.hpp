#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "excl/config.hpp"

namespace excl {

// Checkpoint file layout, little-endian:
//   bytes 0..7    "EXCLCKPT"
//   bytes 8..11   u32 format version
//   bytes 12..19  u64 metadata length N
//   N bytes       UTF-8 JSON metadata: config, model spec, vocabulary,
//                 epoch, best metric, Adam step, tensor index
//   then, for every tensor in the index, rows*cols float32 in column-major
//   order: all parameter values, then Adam first moments, then second moments.
inline constexpr char kCheckpointMagic[8] = {'E', 'X', 'C', 'L', 'C', 'K', 'P', 'T'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  RunConfig config;
  ModelSpec spec;
  Vocabulary vocab;
  ParameterStore<float> params;
  AdamState<float> adam;
  int epoch = 0;
  double best_metric = 0.0;
};

std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& ckpt);
Checkpoint decode_checkpoint(std::span<const std::uint8_t> bytes, const std::string& origin = "<memory>");
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace excl
