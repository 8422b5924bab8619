#pragma once

#include <cstdint>
#include <vector>

#include "rfz/container.hpp"

namespace rfz::detail {

// Per-tree payload lengths recovered by walking the trees in order. Only
// prefix-coded containers are self-delimiting this way.
std::vector<std::uint64_t> walk_segments(const CompressedContainer& c);

}  // namespace rfz::detail
