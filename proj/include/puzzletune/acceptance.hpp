#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "puzzletune/model.hpp"

namespace puzzletune::acceptance {

struct Options {
    std::uint64_t seed = 2024;
    // Scratch space for criteria that write checkpoints.
    std::filesystem::path work_dir;
};

struct Result {
    std::string id;
    bool passed = false;
    std::string detail;
    double seconds = 0.0;
};

// 16x16 images, two 16-wide encoder layers, one decoder layer.
ModelConfig tiny_model();

const std::vector<std::string>& criterion_ids();
std::string describe(const std::string& id);

// Runs one criterion ("A1" .. "A12"); unknown ids raise ConfigError.
Result run(const std::string& id, const Options& options);

}  // namespace puzzletune::acceptance
