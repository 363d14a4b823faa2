#pragma once

#include <cstddef>
#include <utility>
#include <vector>

#include <json.hpp>

#include "puzzletune/rng.hpp"
#include "puzzletune/tensor.hpp"

namespace puzzletune {

// Validated image batch: [B, 3, h, w] with every value in [0, 1].
class ImageBatch {
public:
    explicit ImageBatch(Tensor pixels);

    const Tensor& pixels() const noexcept { return pixels_; }
    std::size_t count() const noexcept { return pixels_.dim(0); }
    std::size_t height() const noexcept { return pixels_.dim(2); }
    std::size_t width() const noexcept { return pixels_.dim(3); }

private:
    Tensor pixels_;
};

// Row-major tiling of an image into square patches. Location x covers
// rows [x / cols * P, ...) and columns [x % cols * P, ...).
struct PatchGrid {
    std::size_t patch_size = 0;
    std::size_t rows = 0;
    std::size_t cols = 0;

    std::size_t locations() const noexcept { return rows * cols; }
    bool operator==(const PatchGrid&) const = default;
};

PatchGrid make_grid(std::size_t height, std::size_t width, std::size_t patch_size);

enum class PuzzleMode { shuffle, mask };

const char* to_string(PuzzleMode mode) noexcept;
PuzzleMode puzzle_mode_from_string(const std::string& name);

struct PuzzleSpec {
    double fix_ratio = 0.0;
    std::size_t position_count = 0;
    std::size_t group_size = 1;
    // true = position patch, shared by every bag in the batch.
    std::vector<bool> fix_mask;
    PuzzleMode mode = PuzzleMode::shuffle;

    std::vector<std::size_t> position_locations() const;
    std::vector<std::size_t> relation_locations() const;
};

// r = round-half-even(ratio * m), clamped to [1, m - 1].
std::size_t position_count_for(std::size_t locations, double fix_ratio);

PuzzleSpec assign_fix_positions(const PatchGrid& grid, double fix_ratio, std::size_t group_size,
                                PuzzleMode mode, Rng& rng);

// Shuffle plan for one batch. For group g and the i-th relation location,
// perms[g * relation_count + i][j] is the in-group bag that receives bag j's
// patch, so puzzle[g*G + perm[j]] = input[g*G + j] at that location.
struct PermutationRecord {
    PuzzleMode mode = PuzzleMode::shuffle;
    std::size_t batch_size = 0;
    std::size_t group_size = 1;
    std::size_t patch_size = 0;
    std::vector<bool> fix_mask;
    std::vector<std::vector<std::size_t>> perms;
    std::vector<std::vector<std::size_t>> inverse;

    std::size_t locations() const noexcept { return fix_mask.size(); }
    std::vector<std::size_t> relation_locations() const;

    nlohmann::json to_json() const;
    static PermutationRecord from_json(const nlohmann::json& doc);
};

// [B, 3, h, w] -> [B, m, 3, P, P]. Differentiable (composed of primitives).
std::pair<PatchGrid, Tensor> patchify(const Tensor& images, std::size_t patch_size);
// Exact inverse of patchify.
Tensor unpatchify(const Tensor& patches, const PatchGrid& grid);

struct PuzzleResult {
    Tensor puzzle;
    PermutationRecord record;
};

// Cross-bag swap of relation patches inside consecutive groups of G bags.
// Group g draws from rng.fork("group", g), so results do not depend on the
// number of threads.
PuzzleResult shuffle_in_place(const Tensor& patches, const PuzzleSpec& spec, const Rng& rng);
// Zeroes every relation location instead of swapping it.
PuzzleResult mask_in_place(const Tensor& patches, const PuzzleSpec& spec);

struct Restoration {
    Tensor patches;
    // Relation locations whose content cannot be recovered (mask mode).
    std::vector<std::size_t> unrecoverable;
};

Restoration restore(const Tensor& puzzle, const PermutationRecord& record);

}  // namespace puzzletune
