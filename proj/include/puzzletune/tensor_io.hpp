#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "puzzletune/tensor.hpp"

// PTNSR1: "PTNSR1" magic, dtype byte (0x01 = float64), rank byte,
// rank x uint32 LE extents, then the row-major LE float64 payload.
namespace puzzletune::tensor_io {

inline constexpr std::uint8_t kDtypeFloat64 = 0x01;

std::vector<std::uint8_t> encode(const Tensor& tensor);
Tensor decode(std::span<const std::uint8_t> bytes);

void write_file(const std::filesystem::path& path, const Tensor& tensor);
Tensor read_file(const std::filesystem::path& path);

}  // namespace puzzletune::tensor_io
