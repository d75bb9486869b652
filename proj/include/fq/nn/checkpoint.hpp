#pragma once

#include <cstdint>
#include <filesystem>
#include <json.hpp>
#include <span>
#include <string>
#include <vector>

#include "fq/nn/adam.hpp"
#include "fq/nn/network.hpp"

namespace fq::nn {

/// Self-describing training snapshot.
///
///   "FQCK" | u16 version | u64 header length | JSON header | f32 blobs
///
/// The JSON header carries the topology, parameter names and shapes, Adam
/// scalars, RNG state, epoch counter and caller-defined `extra` fields. Blobs
/// follow in header order: parameters, Adam first moments, Adam second
/// moments, then `extra_tensors`. All numbers are little-endian.
struct Checkpoint {
  Topology topology;
  std::vector<Parameter<float>> params;
  AdamState<float> adam;
  std::string rng_state;
  int epoch = 0;
  nlohmann::json extra = nlohmann::json::object();
  std::vector<Matrix<float>> extra_tensors;
};

inline constexpr std::uint16_t kCheckpointVersion = 1;

nlohmann::json topology_to_json(const Topology& t);
Topology topology_from_json(const nlohmann::json& j);

std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& c);
/// Throws std::runtime_error on malformed input.
Checkpoint decode_checkpoint(std::span<const std::uint8_t> bytes);

}  // namespace fq::nn
