#include "puzzletune/puzzle.hpp"

#include <algorithm>
#include <cfenv>
#include <cmath>
#include <cstdint>

#include "puzzletune/error.hpp"
#include "puzzletune/kernels.hpp"
#include "puzzletune/ops.hpp"

namespace puzzletune {
namespace {

void check_patch_tensor(const Tensor& patches) {
    if (patches.rank() != 5 || patches.dim(2) != 3 || patches.dim(3) != patches.dim(4)) {
        fail(ErrorCode::ShapeMismatch, "expected patches [B,m,3,P,P], got " + to_string(patches.shape()));
    }
}

std::vector<std::size_t> invert(const std::vector<std::size_t>& perm) {
    std::vector<std::size_t> inv(perm.size());
    for (std::size_t j = 0; j < perm.size(); ++j) {
        inv[perm[j]] = j;
    }
    return inv;
}

std::vector<std::size_t> locations_where(const std::vector<bool>& mask, bool value) {
    std::vector<std::size_t> out;
    for (std::size_t x = 0; x < mask.size(); ++x) {
        if (mask[x] == value) {
            out.push_back(x);
        }
    }
    return out;
}

}  // namespace

ImageBatch::ImageBatch(Tensor pixels) : pixels_(std::move(pixels)) {
    if (pixels_.rank() != 4 || pixels_.dim(1) != 3 || pixels_.dim(0) == 0) {
        fail(ErrorCode::ShapeMismatch, "image batch must be [B,3,h,w] with B > 0, got " + to_string(pixels_.shape()));
    }
    for (double v : pixels_.data()) {
        if (!(v >= 0.0 && v <= 1.0)) {
            fail(ErrorCode::ShapeMismatch, "image values must lie in [0,1]");
        }
    }
}

PatchGrid make_grid(std::size_t height, std::size_t width, std::size_t patch_size) {
    if (patch_size == 0 || height % patch_size != 0 || width % patch_size != 0) {
        fail(ErrorCode::IndivisiblePatchSize, "patch size " + std::to_string(patch_size) + " does not divide " +
                                                  std::to_string(height) + "x" + std::to_string(width));
    }
    return PatchGrid{patch_size, height / patch_size, width / patch_size};
}

const char* to_string(PuzzleMode mode) noexcept {
    return mode == PuzzleMode::shuffle ? "shuffle" : "mask";
}

PuzzleMode puzzle_mode_from_string(const std::string& name) {
    if (name == "shuffle") {
        return PuzzleMode::shuffle;
    }
    if (name == "mask") {
        return PuzzleMode::mask;
    }
    fail(ErrorCode::ConfigError, "unknown puzzle task '" + name + "' (expected shuffle or mask)");
}

std::vector<std::size_t> PuzzleSpec::position_locations() const { return locations_where(fix_mask, true); }
std::vector<std::size_t> PuzzleSpec::relation_locations() const { return locations_where(fix_mask, false); }
std::vector<std::size_t> PermutationRecord::relation_locations() const { return locations_where(fix_mask, false); }

std::size_t position_count_for(std::size_t locations, double fix_ratio) {
    if (locations < 2) {
        fail(ErrorCode::ConfigError, "a puzzle needs at least two patch locations, got " + std::to_string(locations));
    }
    if (!(fix_ratio >= 0.0 && fix_ratio <= 1.0)) {
        fail(ErrorCode::ConfigError, "fix-position ratio must lie in [0,1]");
    }
    const int previous = std::fegetround();
    std::fesetround(FE_TONEAREST);
    const double rounded = std::nearbyint(fix_ratio * static_cast<double>(locations));
    std::fesetround(previous);
    const auto r = static_cast<std::size_t>(rounded);
    return std::clamp<std::size_t>(r, 1, locations - 1);
}

PuzzleSpec assign_fix_positions(const PatchGrid& grid, double fix_ratio, std::size_t group_size, PuzzleMode mode,
                                Rng& rng) {
    const std::size_t m = grid.locations();
    PuzzleSpec spec;
    spec.fix_ratio = fix_ratio;
    spec.position_count = position_count_for(m, fix_ratio);
    spec.group_size = group_size;
    spec.mode = mode;
    spec.fix_mask.assign(m, false);
    // Partial Fisher-Yates: the first r entries are a uniform r-subset.
    std::vector<std::size_t> order(m);
    for (std::size_t i = 0; i < m; ++i) {
        order[i] = i;
    }
    for (std::size_t i = 0; i < spec.position_count; ++i) {
        const std::size_t j = i + static_cast<std::size_t>(rng.below(m - i));
        std::swap(order[i], order[j]);
        spec.fix_mask[order[i]] = true;
    }
    return spec;
}

std::pair<PatchGrid, Tensor> patchify(const Tensor& images, std::size_t patch_size) {
    if (images.rank() != 4 || images.dim(1) != 3) {
        fail(ErrorCode::ShapeMismatch, "expected images [B,3,h,w], got " + to_string(images.shape()));
    }
    const PatchGrid grid = make_grid(images.dim(2), images.dim(3), patch_size);
    const std::size_t b = images.dim(0);
    const std::size_t p = patch_size;
    auto tiles = ops::reshape(images, {b, 3, grid.rows, p, grid.cols, p});
    tiles = ops::transpose(tiles, {0, 2, 4, 1, 3, 5});
    return {grid, ops::reshape(tiles, {b, grid.locations(), 3, p, p})};
}

Tensor unpatchify(const Tensor& patches, const PatchGrid& grid) {
    check_patch_tensor(patches);
    if (patches.dim(1) != grid.locations() || patches.dim(3) != grid.patch_size) {
        fail(ErrorCode::ShapeMismatch, "patches " + to_string(patches.shape()) + " do not match the grid");
    }
    const std::size_t b = patches.dim(0);
    const std::size_t p = grid.patch_size;
    auto tiles = ops::reshape(patches, {b, grid.rows, grid.cols, 3, p, p});
    tiles = ops::transpose(tiles, {0, 3, 1, 4, 2, 5});
    return ops::reshape(tiles, {b, 3, grid.rows * p, grid.cols * p});
}

PuzzleResult shuffle_in_place(const Tensor& patches, const PuzzleSpec& spec, const Rng& rng) {
    check_patch_tensor(patches);
    const std::size_t batch = patches.dim(0);
    const std::size_t m = patches.dim(1);
    const std::size_t g_size = spec.group_size;
    if (spec.mode != PuzzleMode::shuffle) {
        fail(ErrorCode::ConfigError, "shuffle_in_place needs a shuffle-mode spec");
    }
    if (spec.fix_mask.size() != m) {
        fail(ErrorCode::ShapeMismatch, "fix mask covers " + std::to_string(spec.fix_mask.size()) +
                                           " locations, patches have " + std::to_string(m));
    }
    if (g_size == 0 || batch % g_size != 0) {
        fail(ErrorCode::GroupSizeMismatch, "batch of " + std::to_string(batch) + " is not a multiple of group size " +
                                               std::to_string(g_size));
    }
    const auto relation = spec.relation_locations();
    const std::size_t groups = batch / g_size;
    const std::size_t patch_len = patches.numel() / (batch * m);

    PermutationRecord record;
    record.mode = PuzzleMode::shuffle;
    record.batch_size = batch;
    record.group_size = g_size;
    record.patch_size = patches.dim(3);
    record.fix_mask = spec.fix_mask;
    record.perms.resize(groups * relation.size());
    record.inverse.resize(groups * relation.size());

    Tensor puzzle = patches.clone();
    auto out = puzzle.mutable_data();
    auto in = patches.data();
    const auto group_count = static_cast<std::int64_t>(groups);
#pragma omp parallel for schedule(static) if (kernels::num_threads() > 1)
    for (std::int64_t gi = 0; gi < group_count; ++gi) {
        const auto g = static_cast<std::size_t>(gi);
        Rng group_rng = rng.fork("group", g);
        for (std::size_t i = 0; i < relation.size(); ++i) {
            auto perm = group_rng.permutation(g_size);
            const std::size_t x = relation[i];
            for (std::size_t j = 0; j < g_size; ++j) {
                const std::size_t src = ((g * g_size + j) * m + x) * patch_len;
                const std::size_t dst = ((g * g_size + perm[j]) * m + x) * patch_len;
                std::copy_n(in.begin() + static_cast<std::ptrdiff_t>(src), patch_len,
                            out.begin() + static_cast<std::ptrdiff_t>(dst));
            }
            record.inverse[g * relation.size() + i] = invert(perm);
            record.perms[g * relation.size() + i] = std::move(perm);
        }
    }
    return {std::move(puzzle), std::move(record)};
}

PuzzleResult mask_in_place(const Tensor& patches, const PuzzleSpec& spec) {
    check_patch_tensor(patches);
    const std::size_t batch = patches.dim(0);
    const std::size_t m = patches.dim(1);
    if (spec.mode != PuzzleMode::mask) {
        fail(ErrorCode::ConfigError, "mask_in_place needs a mask-mode spec");
    }
    if (spec.fix_mask.size() != m) {
        fail(ErrorCode::ShapeMismatch, "fix mask does not match patch count");
    }
    if (spec.group_size == 0 || batch % spec.group_size != 0) {
        fail(ErrorCode::GroupSizeMismatch, "batch is not a multiple of the group size");
    }
    const std::size_t patch_len = patches.numel() / (batch * m);
    Tensor masked = patches.clone();
    auto out = masked.mutable_data();
    for (std::size_t b = 0; b < batch; ++b) {
        for (std::size_t x : spec.relation_locations()) {
            std::fill_n(out.begin() + static_cast<std::ptrdiff_t>((b * m + x) * patch_len), patch_len, 0.0);
        }
    }
    PermutationRecord record;
    record.mode = PuzzleMode::mask;
    record.batch_size = batch;
    record.group_size = spec.group_size;
    record.patch_size = patches.dim(3);
    record.fix_mask = spec.fix_mask;
    return {std::move(masked), std::move(record)};
}

Restoration restore(const Tensor& puzzle, const PermutationRecord& record) {
    check_patch_tensor(puzzle);
    const std::size_t batch = puzzle.dim(0);
    const std::size_t m = puzzle.dim(1);
    const auto relation = record.relation_locations();
    const bool shuffled = record.mode == PuzzleMode::shuffle;
    if (batch != record.batch_size || m != record.locations() || puzzle.dim(3) != record.patch_size ||
        record.group_size == 0 || batch % record.group_size != 0 ||
        (shuffled && record.inverse.size() != (batch / record.group_size) * relation.size())) {
        fail(ErrorCode::RecordMismatch, "permutation record does not describe a puzzle of shape " +
                                            to_string(puzzle.shape()));
    }
    if (!shuffled) {
        return {puzzle.clone(), relation};
    }
    const std::size_t g_size = record.group_size;
    const std::size_t patch_len = puzzle.numel() / (batch * m);
    Tensor original = puzzle.clone();
    auto out = original.mutable_data();
    auto in = puzzle.data();
    for (std::size_t g = 0; g < batch / g_size; ++g) {
        for (std::size_t i = 0; i < relation.size(); ++i) {
            const auto& inv = record.inverse[g * relation.size() + i];
            if (inv.size() != g_size) {
                fail(ErrorCode::RecordMismatch, "permutation length differs from the group size");
            }
            const std::size_t x = relation[i];
            // puzzle[perm[j]] holds input[j]; equivalently input[inv[k]] = puzzle[k].
            for (std::size_t k = 0; k < g_size; ++k) {
                const std::size_t src = ((g * g_size + k) * m + x) * patch_len;
                const std::size_t dst = ((g * g_size + inv[k]) * m + x) * patch_len;
                std::copy_n(in.begin() + static_cast<std::ptrdiff_t>(src), patch_len,
                            out.begin() + static_cast<std::ptrdiff_t>(dst));
            }
        }
    }
    return {std::move(original), {}};
}

nlohmann::json PermutationRecord::to_json() const {
    nlohmann::json doc;
    doc["mode"] = puzzletune::to_string(mode);
    doc["batch_size"] = batch_size;
    doc["group_size"] = group_size;
    doc["patch_size"] = patch_size;
    doc["fix_mask"] = fix_mask;
    doc["perms"] = perms;
    return doc;
}

PermutationRecord PermutationRecord::from_json(const nlohmann::json& doc) {
    PermutationRecord record;
    try {
        record.mode = puzzle_mode_from_string(doc.at("mode").get<std::string>());
        record.batch_size = doc.at("batch_size").get<std::size_t>();
        record.group_size = doc.at("group_size").get<std::size_t>();
        record.patch_size = doc.at("patch_size").get<std::size_t>();
        record.fix_mask = doc.at("fix_mask").get<std::vector<bool>>();
        record.perms = doc.at("perms").get<std::vector<std::vector<std::size_t>>>();
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorCode::FileFormatError, std::string("permutation record: ") + e.what());
    }
    for (const auto& perm : record.perms) {
        std::vector<bool> seen(perm.size(), false);
        for (auto v : perm) {
            if (v >= perm.size() || seen[v]) {
                fail(ErrorCode::RecordMismatch, "permutation record holds a non-bijective entry");
            }
            seen[v] = true;
        }
        record.inverse.push_back(invert(perm));
    }
    return record;
}

}  // namespace puzzletune
