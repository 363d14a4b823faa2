#include <gtest/gtest.h>

#include <algorithm>
#include <cstring>
#include <map>

#include "puzzletune/kernels.hpp"
#include "puzzletune/puzzle.hpp"
#include "test_util.hpp"

using namespace puzzletune;
using puzzletune::testing::error_code_of;
using puzzletune::testing::random_tensor;

namespace {

std::vector<double> patch_at(const Tensor& patches, std::size_t bag, std::size_t loc) {
    const std::size_t m = patches.dim(1);
    const std::size_t len = patches.numel() / (patches.dim(0) * m);
    auto begin = patches.data().begin() + static_cast<std::ptrdiff_t>((bag * m + loc) * len);
    return {begin, begin + static_cast<std::ptrdiff_t>(len)};
}

struct Setup {
    Tensor patches;
    PatchGrid grid;
    PuzzleSpec spec;
};

Setup make_setup(std::size_t batch, std::size_t group, std::size_t side, std::size_t p, double ratio,
                 std::uint64_t seed, PuzzleMode mode = PuzzleMode::shuffle) {
    Rng rng(seed);
    auto images = random_tensor({batch, 3, side, side}, rng);
    auto [grid, patches] = patchify(images, p);
    Rng fix_rng = rng.fork("fix");
    auto spec = assign_fix_positions(grid, ratio, group, mode, fix_rng);
    return {patches, grid, spec};
}

}  // namespace

TEST(Patchify, LocationCounts) {
    Rng rng(1);
    EXPECT_EQ(make_grid(224, 224, 16).locations(), 196u);
    auto images = random_tensor({2, 3, 64, 64}, rng);
    auto [grid, patches] = patchify(images, 32);
    EXPECT_EQ(grid.locations(), 4u);
    EXPECT_EQ(patches.shape(), (Shape{2, 4, 3, 32, 32}));
    // Location 0 is the top-left tile of bag 0; location 1 is the tile to its right.
    for (std::size_t c = 0; c < 3; ++c) {
        for (std::size_t y = 0; y < 32; ++y) {
            for (std::size_t x = 0; x < 32; ++x) {
                const double px = images.data()[(c * 64 + y) * 64 + x];
                EXPECT_EQ(patches.data()[(c * 32 + y) * 32 + x], px);
                const double right = images.data()[(c * 64 + y) * 64 + 32 + x];
                EXPECT_EQ(patches.data()[((1 * 3 + c) * 32 + y) * 32 + x], right);
            }
        }
    }
}

TEST(Patchify, RejectsIndivisiblePatch) {
    EXPECT_EQ(error_code_of([] { make_grid(224, 224, 48); }), ErrorCode::IndivisiblePatchSize);
    EXPECT_EQ(error_code_of([] { make_grid(224, 224, 96); }), ErrorCode::IndivisiblePatchSize);
}

TEST(Patchify, UnpatchifyIsExactInverse) {
    Rng rng(2);
    for (std::size_t p : {1u, 4u, 8u, 16u}) {
        auto images = random_tensor({3, 3, 16, 16}, rng);
        auto [grid, patches] = patchify(images, p);
        EXPECT_TRUE(unpatchify(patches, grid).bit_equal(images));
    }
}

TEST(Patchify, SinglePatchIsWholeImage) {
    Rng rng(3);
    auto images = random_tensor({1, 3, 8, 8}, rng);
    auto [grid, patches] = patchify(images, 8);
    EXPECT_EQ(grid.locations(), 1u);
    EXPECT_EQ(std::memcmp(patches.data().data(), images.data().data(), images.numel() * 8), 0);
    EXPECT_TRUE(unpatchify(patches, grid).bit_equal(images));
}

TEST(Patchify, UnpatchifyRejectsWrongGrid) {
    EXPECT_EQ(error_code_of([] { unpatchify(Tensor::zeros({1, 4, 3, 8, 8}), PatchGrid{8, 3, 3}); }),
              ErrorCode::ShapeMismatch);
}

TEST(FixPositions, CountFollowsRoundHalfEvenWithClamp) {
    EXPECT_EQ(position_count_for(196, 0.9), 176u);
    EXPECT_EQ(position_count_for(4, 1.0), 3u);
    EXPECT_EQ(position_count_for(4, 0.0), 1u);
    EXPECT_EQ(position_count_for(16, 0.25), 4u);
    // 2.5 and 0.5 are exact ties: round to even.
    EXPECT_EQ(position_count_for(10, 0.25), 2u);
    EXPECT_EQ(position_count_for(6, 0.25), 2u);
    EXPECT_EQ(error_code_of([] { position_count_for(1, 0.5); }), ErrorCode::ConfigError);
}

TEST(FixPositions, MaskHasExactlyRPositions) {
    Rng rng(4);
    const PatchGrid grid{4, 4, 4};
    for (double ratio : {0.0, 0.2, 0.5, 0.9, 1.0}) {
        const auto spec = assign_fix_positions(grid, ratio, 2, PuzzleMode::shuffle, rng);
        EXPECT_EQ(std::count(spec.fix_mask.begin(), spec.fix_mask.end(), true),
                  static_cast<std::ptrdiff_t>(spec.position_count));
        EXPECT_EQ(spec.position_locations().size() + spec.relation_locations().size(), 16u);
    }
}

TEST(FixPositions, SelectionIsUniformOverLocations) {
    Rng rng(5);
    const PatchGrid grid{4, 2, 4};
    std::vector<int> hits(8, 0);
    const int trials = 8000;
    for (int t = 0; t < trials; ++t) {
        const auto spec = assign_fix_positions(grid, 0.25, 1, PuzzleMode::shuffle, rng);
        for (auto x : spec.position_locations()) {
            ++hits[x];
        }
    }
    // Each location is chosen with probability r/m = 2/8.
    for (int h : hits) {
        EXPECT_NEAR(h, trials / 4, 150);
    }
}

TEST(Shuffle, SingleBagIsIdentity) {
    auto s = make_setup(1, 1, 16, 4, 0.5, 7);
    auto result = shuffle_in_place(s.patches, s.spec, Rng(7));
    EXPECT_TRUE(result.puzzle.bit_equal(s.patches));
}

TEST(Shuffle, TwoBagsExchangeTheRelationPatch) {
    // m = 2 with r = 1 leaves exactly one relation location; S2 has two elements.
    int swaps = 0;
    for (std::uint64_t seed = 0; seed < 200; ++seed) {
        Rng rng(seed);
        auto images = random_tensor({2, 3, 8, 4}, rng);
        auto [g2, patches] = patchify(images, 4);
        Rng fix(seed + 1);
        auto spec = assign_fix_positions(g2, 0.5, 2, PuzzleMode::shuffle, fix);
        ASSERT_EQ(spec.relation_locations().size(), 1u);
        const std::size_t rel = spec.relation_locations()[0];
        const std::size_t pos = spec.position_locations()[0];
        auto result = shuffle_in_place(patches, spec, Rng(seed));
        const auto& perm = result.record.perms.at(0);
        if (perm == std::vector<std::size_t>{1, 0}) {
            ++swaps;
            EXPECT_EQ(patch_at(result.puzzle, 0, rel), patch_at(patches, 1, rel));
            EXPECT_EQ(patch_at(result.puzzle, 1, rel), patch_at(patches, 0, rel));
        } else {
            ASSERT_EQ(perm, (std::vector<std::size_t>{0, 1}));
            EXPECT_TRUE(result.puzzle.bit_equal(patches));
        }
        EXPECT_EQ(patch_at(result.puzzle, 0, pos), patch_at(patches, 0, pos));
        EXPECT_EQ(patch_at(result.puzzle, 1, pos), patch_at(patches, 1, pos));
    }
    EXPECT_GT(swaps, 70);
    EXPECT_LT(swaps, 130);
}

TEST(Shuffle, InPlaceBijectionAndFixedPositions) {
    Rng cfg(11);
    for (int trial = 0; trial < 30; ++trial) {
        const std::size_t group = std::size_t{1} << cfg.below(3);
        const std::size_t batch = group * (1 + cfg.below(3));
        auto s = make_setup(batch, group, 16, 4, cfg.uniform(0.2, 0.9), cfg.next_u64());
        auto result = shuffle_in_place(s.patches, s.spec, Rng(trial));
        const auto relation = s.spec.relation_locations();
        for (std::size_t g = 0; g < batch / group; ++g) {
            for (std::size_t i = 0; i < relation.size(); ++i) {
                const auto& perm = result.record.perms[g * relation.size() + i];
                for (std::size_t j = 0; j < group; ++j) {
                    EXPECT_EQ(patch_at(result.puzzle, g * group + perm[j], relation[i]),
                              patch_at(s.patches, g * group + j, relation[i]));
                }
            }
        }
        for (std::size_t b = 0; b < batch; ++b) {
            for (auto x : s.spec.position_locations()) {
                EXPECT_EQ(patch_at(result.puzzle, b, x), patch_at(s.patches, b, x));
            }
        }
    }
}

TEST(Shuffle, RoundTripAcrossRandomConfigs) {
    Rng cfg(12);
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t group = std::size_t{1} << cfg.below(3);
        const std::size_t batch = group * (1 + cfg.below(4));
        const std::size_t p = std::size_t{4} << cfg.below(2);
        auto s = make_setup(batch, group, 16, p, cfg.uniform(0.0, 1.0), cfg.next_u64());
        auto result = shuffle_in_place(s.patches, s.spec, Rng(cfg.next_u64()));
        EXPECT_TRUE(restore(result.puzzle, result.record).patches.bit_equal(s.patches));
    }
}

TEST(Shuffle, FullRatioLeavesOneRelationLocation) {
    auto single = make_setup(4, 1, 16, 4, 1.0, 3);
    EXPECT_EQ(single.spec.relation_locations().size(), 1u);
    EXPECT_TRUE(shuffle_in_place(single.patches, single.spec, Rng(3)).puzzle.bit_equal(single.patches));

    auto grouped = make_setup(8, 4, 16, 4, 1.0, 4);
    auto result = shuffle_in_place(grouped.patches, grouped.spec, Rng(4));
    for (std::size_t b = 0; b < 8; ++b) {
        int differing = 0;
        for (std::size_t x = 0; x < 16; ++x) {
            differing += patch_at(result.puzzle, b, x) != patch_at(grouped.patches, b, x) ? 1 : 0;
        }
        EXPECT_LE(differing, 1);
    }
}

TEST(Shuffle, DeterministicAndThreadIndependent) {
    auto s = make_setup(16, 4, 32, 4, 0.3, 5);
    auto a = shuffle_in_place(s.patches, s.spec, Rng(99));
    auto b = shuffle_in_place(s.patches, s.spec, Rng(99));
    EXPECT_EQ(a.record.perms, b.record.perms);
    kernels::set_num_threads(4);
    auto c = shuffle_in_place(s.patches, s.spec, Rng(99));
    kernels::set_num_threads(1);
    EXPECT_EQ(a.record.perms, c.record.perms);
    EXPECT_TRUE(a.puzzle.bit_equal(c.puzzle));
}

TEST(Shuffle, SwappedPatchLandsOnSameTileOfOtherImage) {
    Rng rng(6);
    auto images = random_tensor({2, 3, 8, 8}, rng);
    auto [grid, patches] = patchify(images, 4);
    PuzzleSpec spec;
    spec.group_size = 2;
    spec.fix_mask = {true, true, true, false};
    spec.position_count = 3;
    // Find a seed whose permutation swaps the two bags.
    for (std::uint64_t seed = 0;; ++seed) {
        auto result = shuffle_in_place(patches, spec, Rng(seed));
        if (result.record.perms[0][0] != 1) {
            continue;
        }
        auto out = unpatchify(result.puzzle, grid);
        // Location 3 is the bottom-right 4x4 tile.
        for (std::size_t c = 0; c < 3; ++c) {
            for (std::size_t y = 4; y < 8; ++y) {
                for (std::size_t x = 4; x < 8; ++x) {
                    EXPECT_EQ(out.data()[((0 * 3 + c) * 8 + y) * 8 + x], images.data()[((1 * 3 + c) * 8 + y) * 8 + x]);
                }
            }
        }
        break;
    }
}

TEST(Shuffle, RejectsBatchNotMultipleOfGroup) {
    auto s = make_setup(6, 4, 16, 4, 0.5, 1);
    EXPECT_EQ(error_code_of([&] { shuffle_in_place(s.patches, s.spec, Rng(1)); }), ErrorCode::GroupSizeMismatch);
}

TEST(Restore, IdentityRecordIsIdentity) {
    auto s = make_setup(4, 2, 16, 8, 0.5, 8);
    auto result = shuffle_in_place(s.patches, s.spec, Rng(1));
    for (auto& perm : result.record.perms) {
        perm = {0, 1};
    }
    result.record.inverse = result.record.perms;
    EXPECT_TRUE(restore(s.patches, result.record).patches.bit_equal(s.patches));
}

TEST(Restore, RejectsRecordFromDifferentShape) {
    auto s = make_setup(4, 2, 16, 8, 0.5, 9);
    auto result = shuffle_in_place(s.patches, s.spec, Rng(1));
    auto other = make_setup(8, 2, 16, 8, 0.5, 9);
    EXPECT_EQ(error_code_of([&] { restore(other.patches, result.record); }), ErrorCode::RecordMismatch);
    auto finer = make_setup(4, 2, 16, 4, 0.5, 9);
    EXPECT_EQ(error_code_of([&] { restore(finer.patches, result.record); }), ErrorCode::RecordMismatch);
}

TEST(Restore, RecordSurvivesJson) {
    auto s = make_setup(8, 4, 16, 4, 0.4, 10);
    auto result = shuffle_in_place(s.patches, s.spec, Rng(10));
    const auto doc = result.record.to_json();
    EXPECT_EQ(doc.at("group_size"), 4);
    EXPECT_EQ(doc.at("patch_size"), 4);
    auto parsed = PermutationRecord::from_json(nlohmann::json::parse(doc.dump()));
    EXPECT_EQ(parsed.perms, result.record.perms);
    EXPECT_TRUE(restore(result.puzzle, parsed).patches.bit_equal(s.patches));

    auto bad = doc;
    bad["perms"][0][0] = bad["perms"][0][1];
    EXPECT_EQ(error_code_of([&] { PermutationRecord::from_json(bad); }), ErrorCode::RecordMismatch);
}

TEST(Mask, ZeroesRelationLocationsOnly) {
    auto s = make_setup(4, 2, 16, 4, 0.25, 12, PuzzleMode::mask);
    ASSERT_EQ(s.spec.position_count, 4u);
    auto result = mask_in_place(s.patches, s.spec);
    const std::vector<double> zeros(48, 0.0);
    for (std::size_t b = 0; b < 4; ++b) {
        int zeroed = 0;
        for (std::size_t x = 0; x < 16; ++x) {
            if (s.spec.fix_mask[x]) {
                EXPECT_EQ(patch_at(result.puzzle, b, x), patch_at(s.patches, b, x));
            } else {
                EXPECT_EQ(patch_at(result.puzzle, b, x), zeros);
                ++zeroed;
            }
        }
        EXPECT_EQ(zeroed, 12);
    }
    auto restored = restore(result.puzzle, result.record);
    EXPECT_EQ(restored.unrecoverable, s.spec.relation_locations());
}

TEST(Mask, AllZeroInputStaysZero) {
    auto s = make_setup(2, 1, 16, 4, 0.5, 13, PuzzleMode::mask);
    auto zeros = Tensor::zeros(s.patches.shape());
    EXPECT_TRUE(mask_in_place(zeros, s.spec).puzzle.bit_equal(zeros));
}

TEST(ImageBatchType, ValidatesShapeAndRange) {
    EXPECT_EQ(error_code_of([] { ImageBatch(Tensor::zeros({1, 1, 4, 4})); }), ErrorCode::ShapeMismatch);
    EXPECT_EQ(error_code_of([] { ImageBatch(Tensor::full({1, 3, 2, 2}, 1.5)); }), ErrorCode::ShapeMismatch);
    EXPECT_EQ(ImageBatch(Tensor::full({2, 3, 4, 6}, 0.5)).width(), 6u);
}
