#include <gtest/gtest.h>

#include <algorithm>
#include <set>

#include "puzzletune/rng.hpp"

using puzzletune::Rng;

namespace {

std::vector<std::uint64_t> draws(Rng rng, std::size_t n) {
    std::vector<std::uint64_t> out(n);
    for (auto& v : out) {
        v = rng.next_u64();
    }
    return out;
}

}  // namespace

TEST(Rng, ForkWithSameLabelIsDeterministic) {
    const Rng parent(7);
    EXPECT_EQ(draws(parent.fork("shuffle"), 1000), draws(parent.fork("shuffle"), 1000));
}

TEST(Rng, ForkIgnoresParentConsumption) {
    Rng parent(7);
    const auto before = draws(parent.fork("x"), 16);
    parent.next_u64();
    parent.next_u64();
    EXPECT_EQ(before, draws(parent.fork("x"), 16));
}

TEST(Rng, DistinctLabelsGiveDistinctStreams) {
    const Rng parent(7);
    const auto a = draws(parent.fork("shuffle"), 1000);
    const auto b = draws(parent.fork("init"), 1000);
    EXPECT_NE(a, b);
    EXPECT_NE(draws(parent, 1000), a);
}

TEST(Rng, DistinctSeedsGiveDistinctStreams) {
    EXPECT_NE(draws(Rng(7).fork("x"), 1000), draws(Rng(8).fork("x"), 1000));
}

TEST(Rng, IndexedForksAreDistinct) {
    const Rng parent(11);
    std::set<std::uint64_t> firsts;
    for (std::uint64_t i = 0; i < 256; ++i) {
        firsts.insert(parent.fork("group", i).next_u64());
    }
    EXPECT_EQ(firsts.size(), 256u);
}

TEST(Rng, UniformStaysInUnitInterval) {
    Rng rng(3);
    for (int i = 0; i < 10000; ++i) {
        const double u = rng.uniform();
        ASSERT_GE(u, 0.0);
        ASSERT_LT(u, 1.0);
    }
}

TEST(Rng, BelowIsRoughlyUniform) {
    Rng rng(5);
    std::vector<int> counts(6, 0);
    const int n = 60000;
    for (int i = 0; i < n; ++i) {
        ++counts[rng.below(6)];
    }
    for (int c : counts) {
        EXPECT_NEAR(c, n / 6, 500);
    }
}

TEST(Rng, TruncatedNormalWithinTwoSigma) {
    Rng rng(9);
    double sum = 0.0;
    for (int i = 0; i < 5000; ++i) {
        const double v = rng.truncated_normal(0.02);
        ASSERT_LE(std::abs(v), 0.04);
        sum += v;
    }
    EXPECT_NEAR(sum / 5000.0, 0.0, 0.002);
}

TEST(Rng, PermutationIsBijection) {
    Rng rng(1);
    for (std::size_t n : {1u, 2u, 5u, 16u}) {
        auto p = rng.permutation(n);
        std::sort(p.begin(), p.end());
        for (std::size_t i = 0; i < n; ++i) {
            EXPECT_EQ(p[i], i);
        }
    }
}

TEST(Rng, PermutationOfTwoHitsBothElements) {
    Rng rng(2);
    int swapped = 0;
    for (int i = 0; i < 1000; ++i) {
        swapped += rng.permutation(2)[0] == 1 ? 1 : 0;
    }
    EXPECT_NEAR(swapped, 500, 80);
}
