#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "rfz/forest.hpp"

namespace rfz {

/// Prediction-only serialization of a forest: schema, value tables, then per
/// tree one record per node in preorder (structure byte, and varint variable,
/// split index and fit index as applicable). `bytes` is that serialization
/// compressed as a raw DEFLATE stream.
struct LightBaseline {
  std::vector<std::uint8_t> bytes;
  std::uint64_t raw_size = 0;

  std::uint64_t size() const noexcept { return bytes.size(); }
};

std::vector<std::uint8_t> light_serialize(const Forest& forest);
Forest light_parse(std::span<const std::uint8_t> raw);  // throws CorruptContainer

LightBaseline light_baseline(const Forest& forest);
/// Inflates and parses a baseline back into a forest.
Forest light_restore(std::span<const std::uint8_t> deflated);

std::vector<std::uint8_t> deflate_raw(std::span<const std::uint8_t> data);
std::vector<std::uint8_t> inflate_raw(std::span<const std::uint8_t> data);  // throws CorruptContainer

}  // namespace rfz
