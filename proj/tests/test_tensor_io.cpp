#include <gtest/gtest.h>

#include <filesystem>
#include <limits>

#include "puzzletune/error.hpp"
#include "puzzletune/rng.hpp"
#include "puzzletune/tensor_io.hpp"

using namespace puzzletune;

TEST(TensorIo, ScalarRoundTrips) {
    const Tensor s = Tensor::scalar(-3.25);
    const auto bytes = tensor_io::encode(s);
    EXPECT_EQ(bytes.size(), 6u + 1 + 1 + 8);
    EXPECT_TRUE(tensor_io::decode(bytes).bit_equal(s));
}

TEST(TensorIo, HeaderLayoutIsExact) {
    const Tensor t({2, 3}, {1, 2, 3, 4, 5, 6});
    const auto bytes = tensor_io::encode(t);
    ASSERT_EQ(bytes.size(), 8u + 2 * 4 + 6 * 8);
    EXPECT_EQ(std::string(bytes.begin(), bytes.begin() + 6), "PTNSR1");
    EXPECT_EQ(bytes[6], 0x01);
    EXPECT_EQ(bytes[7], 2);
    EXPECT_EQ(bytes[8], 2);
    EXPECT_EQ(bytes[9], 0);
    EXPECT_EQ(bytes[12], 3);
    // 1.0 = 0x3FF0000000000000, little-endian.
    EXPECT_EQ(bytes[16 + 7], 0x3F);
    EXPECT_EQ(bytes[16 + 6], 0xF0);
    EXPECT_TRUE(tensor_io::decode(bytes).bit_equal(t));
}

TEST(TensorIo, SpecialValuesSurviveBitExactly) {
    Rng rng(3);
    std::vector<double> values{0.0, -0.0, std::numeric_limits<double>::denorm_min(), 1e308, -1e-308};
    for (int i = 0; i < 50; ++i) {
        values.push_back(rng.normal());
    }
    const Tensor t({values.size()}, values);
    EXPECT_TRUE(tensor_io::decode(tensor_io::encode(t)).bit_equal(t));
}

TEST(TensorIo, FileRoundTrip) {
    const auto path = std::filesystem::temp_directory_path() / "puzzletune_io_test.ptnsr";
    const Tensor t({2, 1, 2}, {0.5, 1.5, -2.5, 3.5});
    tensor_io::write_file(path, t);
    EXPECT_TRUE(tensor_io::read_file(path).bit_equal(t));
    std::filesystem::remove(path);
}

TEST(TensorIo, CorruptInputsAreRejected) {
    auto bytes = tensor_io::encode(Tensor({2}, {1, 2}));
    auto code_of = [](std::vector<std::uint8_t> b) {
        try {
            tensor_io::decode(b);
        } catch (const Error& e) {
            return e.code();
        }
        return ErrorCode::IoError;
    };
    auto bad_magic = bytes;
    bad_magic[0] = 'X';
    EXPECT_EQ(code_of(bad_magic), ErrorCode::BadMagic);
    auto truncated = bytes;
    truncated.pop_back();
    EXPECT_EQ(code_of(truncated), ErrorCode::TruncatedPayload);
    EXPECT_EQ(code_of({'P', 'T'}), ErrorCode::BadMagic);
}

TEST(TensorIo, RankBeyondOneByteOverflows) {
    Shape shape(256, 1);
    try {
        tensor_io::encode(Tensor::zeros(shape));
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::RankOverflow);
    }
}
