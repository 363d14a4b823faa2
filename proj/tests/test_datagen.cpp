#include <gtest/gtest.h>

#include <algorithm>
#include <filesystem>
#include <string>

#include "puzzletune/curriculum.hpp"
#include "puzzletune/datagen.hpp"
#include "puzzletune/puzzle.hpp"
#include "test_util.hpp"

using namespace puzzletune;
using puzzletune::testing::error_code_of;
using puzzletune::testing::random_tensor;

namespace {

std::vector<std::uint8_t> bytes_of(const std::string& s) { return {s.begin(), s.end()}; }

}  // namespace

TEST(Synthetic, DeterministicAndBalanced) {
    SyntheticSpec spec;
    spec.class_count = 4;
    spec.per_class = 64;
    spec.seed = 3;
    const auto a = generate(spec);
    const auto b = generate(spec);
    EXPECT_TRUE(a.images.bit_equal(b.images));
    EXPECT_EQ(a.labels, b.labels);
    EXPECT_EQ(a.images.shape(), (Shape{256, 3, 32, 32}));
    for (int c = 0; c < 4; ++c) {
        EXPECT_EQ(std::count(a.labels.begin(), a.labels.end(), c), 64);
    }
    EXPECT_TRUE(std::all_of(a.images.data().begin(), a.images.data().end(),
                            [](double v) { return v >= 0.0 && v <= 1.0; }));
    spec.seed = 4;
    EXPECT_FALSE(generate(spec).images.bit_equal(a.images));
}

TEST(Synthetic, ClassesAreDistinguishable) {
    for (double jitter : {0.0, 0.35}) {
        SyntheticSpec spec;
        spec.per_class = 24;
        spec.seed = 5;
        spec.color_jitter = jitter;
        const auto report = histogram_distances(generate(spec));
        EXPECT_LT(report.within_class, report.between_class) << jitter;
    }
}

TEST(Synthetic, BaseColorsAreSeparated) {
    const auto textures = default_textures(6, 7);
    for (std::size_t a = 0; a < textures.size(); ++a) {
        for (std::size_t b = 0; b < a; ++b) {
            double d = 0.0;
            for (std::size_t c = 0; c < 3; ++c) {
                d = std::max(d, std::abs(textures[a].base[c] - textures[b].base[c]));
            }
            EXPECT_GE(d, kMinBaseDistance);
        }
    }
    SyntheticSpec spec;
    spec.class_count = 2;
    spec.textures = {textures[0], textures[0]};
    EXPECT_EQ(error_code_of([&] { generate(spec); }), ErrorCode::ConfigError);
    spec.textures.clear();
    spec.side = 8;
    EXPECT_EQ(error_code_of([&] { generate(spec); }), ErrorCode::ConfigError);
}

TEST(Synthetic, ImagesFitDefaultPuzzleSizes) {
    SyntheticSpec spec;
    spec.side = 64;
    spec.per_class = 2;
    const auto corpus = generate(spec);
    ScheduleState state = describe_variant("custom", 3);
    state.patch_cycle = kDeskPatchLoop;
    EXPECT_NO_THROW(validate(state, spec.side, 8));
    for (auto p : kDeskPatchLoop) {
        EXPECT_GE(make_grid(spec.side, spec.side, p).locations(), 2u);
    }
    (void)corpus;
}

TEST(Ppm, WhitePixelBytes) {
    const auto bytes = ppm::encode(Tensor::full({3, 1, 1}, 1.0));
    auto expected = bytes_of("P6\n1 1\n255\n");
    expected.insert(expected.end(), {0xFF, 0xFF, 0xFF});
    EXPECT_EQ(bytes, expected);
}

TEST(Ppm, RoundTripIsQuantization) {
    Rng rng(8);
    const auto image = random_tensor({3, 5, 7}, rng);
    const auto back = ppm::decode(ppm::encode(image));
    EXPECT_TRUE(back.bit_equal(ppm::quantize8(image)));
    EXPECT_TRUE(ppm::decode(ppm::encode(back)).bit_equal(back));
    // Interleaved RGB, row-major.
    const auto bytes = ppm::encode(image);
    const std::size_t header = bytes_of("P6\n7 5\n255\n").size();
    EXPECT_EQ(bytes[header + 1], ppm::quantize(image.data()[35]));
}

TEST(Ppm, RoundsHalfUp) {
    EXPECT_EQ(ppm::quantize(0.5), 128);
    EXPECT_EQ(ppm::quantize(0.0), 0);
    EXPECT_EQ(ppm::quantize(1.0), 255);
    EXPECT_EQ(ppm::quantize(1.0 / 255.0), 1);
}

TEST(Ppm, RejectsBadInput) {
    EXPECT_EQ(error_code_of([] { ppm::decode(bytes_of("P5\n1 1\n255\n\x01")); }), ErrorCode::MalformedHeader);
    EXPECT_EQ(error_code_of([] { ppm::decode(bytes_of("P6\n1 1\n65535\n")); }), ErrorCode::MalformedHeader);
    EXPECT_EQ(error_code_of([] { ppm::decode(bytes_of("P6\nx 1\n255\n")); }), ErrorCode::MalformedHeader);
    EXPECT_EQ(error_code_of([] { ppm::decode(bytes_of("P6\n2 1\n255\n\x01\x02\x03")); }), ErrorCode::TruncatedPayload);
    EXPECT_EQ(ppm::decode(bytes_of("P6\n# comment\n1 1\n255\nabc")).shape(), (Shape{3, 1, 1}));
}

TEST(Corpus, DirectoryRoundTrip) {
    SyntheticSpec spec;
    spec.class_count = 2;
    spec.per_class = 3;
    spec.side = 16;
    const auto corpus = generate(spec);
    const auto dir = std::filesystem::temp_directory_path() / "puzzletune_corpus_test";
    std::filesystem::remove_all(dir);
    write_corpus(corpus, dir);
    EXPECT_TRUE(std::filesystem::exists(dir / "images" / "0005.ppm"));
    const auto back = read_corpus(dir);
    EXPECT_EQ(back.labels, corpus.labels);
    EXPECT_TRUE(back.images.bit_equal(ppm::quantize8(corpus.images)));
    std::filesystem::remove_all(dir);
}
