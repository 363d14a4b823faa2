#include "puzzletune/tensor_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <limits>
#include <string_view>

#include "puzzletune/error.hpp"

namespace puzzletune::tensor_io {
namespace {

constexpr std::string_view kMagic = "PTNSR1";

template <typename T>
void put_le(std::vector<std::uint8_t>& out, T value) {
    for (std::size_t i = 0; i < sizeof(T); ++i) {
        out.push_back(static_cast<std::uint8_t>(value >> (8 * i)));
    }
}

template <typename T>
T get_le(std::span<const std::uint8_t> bytes, std::size_t offset) {
    T value = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) {
        value |= static_cast<T>(bytes[offset + i]) << (8 * i);
    }
    return value;
}

}  // namespace

std::vector<std::uint8_t> encode(const Tensor& tensor) {
    if (tensor.rank() > std::numeric_limits<std::uint8_t>::max()) {
        fail(ErrorCode::RankOverflow, "rank " + std::to_string(tensor.rank()) + " does not fit in one byte");
    }
    std::vector<std::uint8_t> out(kMagic.begin(), kMagic.end());
    out.push_back(kDtypeFloat64);
    out.push_back(static_cast<std::uint8_t>(tensor.rank()));
    for (auto extent : tensor.shape()) {
        if (extent > std::numeric_limits<std::uint32_t>::max()) {
            fail(ErrorCode::RankOverflow, "extent exceeds 32 bits");
        }
        put_le(out, static_cast<std::uint32_t>(extent));
    }
    out.reserve(out.size() + tensor.numel() * 8);
    for (double v : tensor.data()) {
        put_le(out, std::bit_cast<std::uint64_t>(v));
    }
    return out;
}

Tensor decode(std::span<const std::uint8_t> bytes) {
    if (bytes.size() < kMagic.size() + 2 ||
        std::memcmp(bytes.data(), kMagic.data(), kMagic.size()) != 0) {
        fail(ErrorCode::BadMagic, "missing PTNSR1 magic");
    }
    if (bytes[kMagic.size()] != kDtypeFloat64) {
        fail(ErrorCode::FileFormatError, "unsupported dtype code " + std::to_string(bytes[kMagic.size()]));
    }
    const std::size_t rank = bytes[kMagic.size() + 1];
    std::size_t offset = kMagic.size() + 2;
    if (bytes.size() < offset + rank * 4) {
        fail(ErrorCode::TruncatedPayload, "header shorter than its extents");
    }
    Shape shape(rank);
    for (auto& extent : shape) {
        extent = get_le<std::uint32_t>(bytes, offset);
        offset += 4;
    }
    const std::size_t count = element_count(shape);
    if (bytes.size() - offset != count * 8) {
        fail(ErrorCode::TruncatedPayload, "payload holds " + std::to_string(bytes.size() - offset) +
                                              " bytes, expected " + std::to_string(count * 8));
    }
    std::vector<double> data(count);
    for (auto& v : data) {
        v = std::bit_cast<double>(get_le<std::uint64_t>(bytes, offset));
        offset += 8;
    }
    return Tensor(std::move(shape), std::move(data));
}

void write_file(const std::filesystem::path& path, const Tensor& tensor) {
    const auto bytes = encode(tensor);
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        fail(ErrorCode::IoError, "cannot open " + path.string() + " for writing");
    }
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) {
        fail(ErrorCode::IoError, "failed writing " + path.string());
    }
}

Tensor read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        fail(ErrorCode::IoError, "cannot open " + path.string());
    }
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return decode(bytes);
}

}  // namespace puzzletune::tensor_io
