#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

#include "dhia/matrix.hpp"

namespace dhia {

inline constexpr std::uint32_t kTensorContainerVersion = 1;

// Flat binary container:
//   "DHIA" | version u32 | tensor count u64 | per tensor: rows u64, cols u64, f64 payload
// All integers and payloads little-endian.
void write_tensor_container(std::ostream& out, std::span<const Matrix> tensors);
std::vector<Matrix> read_tensor_container(std::istream& in);

}  // namespace dhia
