#include <gtest/gtest.h>

#include "puzzletune/curriculum.hpp"
#include "test_util.hpp"

using namespace puzzletune;
using puzzletune::testing::error_code_of;

TEST(Curriculum, BaseLoopsPatchSizesEveryEpoch) {
    const auto state = describe_variant("base", 180);
    const std::vector<std::size_t> expected{16, 32, 48, 64, 96, 112, 16};
    for (std::size_t e = 0; e < expected.size(); ++e) {
        EXPECT_EQ(patch_size_at(state, e), expected[e]);
    }
}

TEST(Curriculum, FixedPatchVariants) {
    for (const char* name : {"p16-rd", "p16-r25"}) {
        const auto state = describe_variant(name, 50);
        for (std::size_t e = 0; e < 50; ++e) {
            EXPECT_EQ(patch_size_at(state, e), 16u);
        }
    }
    ScheduleState single;
    single.patch_cycle = {8};
    EXPECT_EQ(patch_size_at(single, 12345), 8u);
}

TEST(Curriculum, RatioEndpointsAreExact) {
    const auto state = describe_variant("base", 180);
    EXPECT_EQ(fix_ratio_at(state, 0), 0.9);
    EXPECT_EQ(fix_ratio_at(state, 179), 0.2);
    // 0.9 - 0.7 * 90 / 179
    EXPECT_NEAR(fix_ratio_at(state, 90), 0.548044692737430, 1e-12);
}

TEST(Curriculum, RatioIsMonotoneNonIncreasing) {
    for (std::size_t epochs : {2u, 3u, 7u, 180u, 1000u}) {
        const auto state = describe_variant("p16-rd", epochs);
        for (std::size_t e = 1; e < epochs; ++e) {
            EXPECT_LE(fix_ratio_at(state, e), fix_ratio_at(state, e - 1));
        }
    }
}

TEST(Curriculum, ConstantRatioVariant) {
    const auto state = describe_variant("p16-r25", 40);
    for (std::size_t e = 0; e < 40; ++e) {
        EXPECT_EQ(fix_ratio_at(state, e), 0.25);
    }
}

TEST(Curriculum, SingleEpochReturnsStartRatio) {
    EXPECT_EQ(fix_ratio_at(describe_variant("base", 1), 0), 0.9);
}

TEST(Curriculum, PeriodicWithStride) {
    auto state = describe_variant("base", 100);
    state.cycle_stride = kSlowCycleStride;
    const std::size_t period = state.cycle_stride * state.patch_cycle.size();
    for (std::size_t e = 0; e < 60; ++e) {
        EXPECT_EQ(patch_size_at(state, e), patch_size_at(state, e + period));
    }
    EXPECT_EQ(patch_size_at(state, 2), 16u);
    EXPECT_EQ(patch_size_at(state, 3), 32u);
}

TEST(Curriculum, DescribeVariantContents) {
    const auto base = describe_variant("base", 10);
    EXPECT_EQ(base.patch_cycle, kPatchLoop);
    EXPECT_EQ(base.ratio_start, 0.9);
    EXPECT_EQ(base.ratio_end, 0.2);
    const auto r25 = describe_variant("p16-r25", 10);
    EXPECT_EQ(r25.patch_cycle, (std::vector<std::size_t>{16}));
    EXPECT_EQ(r25.ratio_start, 0.25);
    EXPECT_EQ(error_code_of([] { describe_variant("nosuch", 10); }), ErrorCode::UnknownVariant);
}

TEST(Curriculum, ValidationAgainstImageSize) {
    auto base = describe_variant("base", 10);
    EXPECT_EQ(error_code_of([&] { validate(base, 224, 16); }), ErrorCode::IndivisiblePatchSize);
    base.patch_cycle = kDeskPatchLoop;
    EXPECT_NO_THROW(validate(base, 64, 8));
    EXPECT_EQ(error_code_of([&] { validate(base, 64, 16); }), ErrorCode::IndivisibleTokenPatch);
    base.patch_cycle = {64};
    EXPECT_EQ(error_code_of([&] { validate(base, 64, 8); }), ErrorCode::ConfigError);
    auto rising = describe_variant("base", 10);
    rising.ratio_start = 0.1;
    EXPECT_EQ(error_code_of([&] { validate(rising); }), ErrorCode::ConfigError);
}

TEST(Curriculum, CsvTable) {
    const auto csv = schedule_csv(describe_variant("base", 180));
    EXPECT_EQ(csv.substr(0, csv.find('\n', csv.find('\n') + 1) + 1), "epoch,patch_size,fix_ratio\n0,16,0.900000\n");
    EXPECT_NE(csv.find("179,112,0.200000\n"), std::string::npos);
}
