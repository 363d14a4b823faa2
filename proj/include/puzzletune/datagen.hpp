#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "puzzletune/tensor.hpp"

namespace puzzletune {

struct ClassTexture {
    std::array<double, 3> base{};
    std::array<double, 3> blob_color{};
    // Expected blobs per 16x16 area.
    double blob_density = 1.0;
    // Blob semi-axes as fractions of the image side.
    double radius_min = 0.05;
    double radius_max = 0.12;
    double noise = 0.04;
};

struct SyntheticSpec {
    std::size_t class_count = 4;
    std::size_t per_class = 64;
    std::size_t side = 32;
    std::uint64_t seed = 0;
    // Per-image uniform shift of every channel of the base color, +-jitter.
    double color_jitter = 0.0;
    // Derived from the seed when empty.
    std::vector<ClassTexture> textures;
};

// Minimum Chebyshev distance between class base colors.
inline constexpr double kMinBaseDistance = 0.15;

std::vector<ClassTexture> default_textures(std::size_t class_count, std::uint64_t seed);

struct Corpus {
    Tensor images;  // [N, 3, side, side]
    std::vector<int> labels;
};

// Image i belongs to class i / per_class and draws from its own RNG fork.
Corpus generate(const SyntheticSpec& spec);

// images/NNNN.ppm plus labels.csv (filename,class).
void write_corpus(const Corpus& corpus, const std::filesystem::path& dir);
Corpus read_corpus(const std::filesystem::path& dir);

struct Learnability {
    double within_class = 0.0;
    double between_class = 0.0;
};

// Mean L1 distance between per-image color histograms (8 bins per channel).
Learnability histogram_distances(const Corpus& corpus);

namespace ppm {

// Nearest 8-bit level, ties rounded up.
std::uint8_t quantize(double value);
// Tensor rounded through 8 bits.
Tensor quantize8(const Tensor& image);

// Binary P6 with maxval 255. `image` is [3, h, w] or [1, 3, h, w].
std::vector<std::uint8_t> encode(const Tensor& image);
// Returns [3, h, w].
Tensor decode(std::span<const std::uint8_t> bytes);

void write_file(const std::filesystem::path& path, const Tensor& image);
Tensor read_file(const std::filesystem::path& path);

}  // namespace ppm

}  // namespace puzzletune
